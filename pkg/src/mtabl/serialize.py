"""Versioned binary container for checkpoints and dataset caches.

Layout: an 8-byte magic, a u32 format version, a u32 header length, a JSON
header, then the raw block payloads in header order. Each block is a 2-D
array stored little-endian (float64 or int64) with its shape recorded in
the header, so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .network import NetworkSpec

MAGIC = b"MTABLBIN"
VERSION = 1

_DTYPES = {"f8": "<f8", "i8": "<i8"}


def write_container(path, kind: str, meta: dict, blocks: list[tuple[str, np.ndarray]]) -> None:
    entries = []
    payloads = []
    for name, array in blocks:
        if array.ndim != 2:
            raise FormatError(f"block {name!r} must be 2-D, got ndim={array.ndim}")
        if array.dtype.kind == "f":
            tag, dtype = "f8", "<f8"
        elif array.dtype.kind in "iu":
            tag, dtype = "i8", "<i8"
        else:
            raise FormatError(f"block {name!r} has unsupported dtype {array.dtype}")
        data = np.ascontiguousarray(array, dtype=dtype)
        entries.append({"name": name, "rows": array.shape[0],
                        "cols": array.shape[1], "dtype": tag})
        payloads.append(data.tobytes())
    header = json.dumps({"kind": kind, "meta": meta, "blocks": entries}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for payload in payloads:
            fh.write(payload)


def read_container(path, expect_kind: str | None = None):
    """Returns (meta, ordered dict of name -> array)."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 8:
        raise FormatError(f"{path}: truncated container")
    if raw[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic, not a container file")
    version, header_len = struct.unpack_from("<II", raw, len(MAGIC))
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    offset = len(MAGIC) + 8
    try:
        header = json.loads(raw[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise FormatError(f"{path}: corrupt header ({err})") from err
    offset += header_len
    if expect_kind is not None and header.get("kind") != expect_kind:
        raise FormatError(
            f"{path}: container holds {header.get('kind')!r}, expected {expect_kind!r}"
        )
    blocks: dict[str, np.ndarray] = {}
    for entry in header["blocks"]:
        rows, cols = entry["rows"], entry["cols"]
        dtype = _DTYPES.get(entry["dtype"])
        if dtype is None:
            raise FormatError(f"{path}: unknown block dtype {entry['dtype']!r}")
        nbytes = rows * cols * 8
        if offset + nbytes > len(raw):
            raise FormatError(f"{path}: truncated payload for block {entry['name']!r}")
        array = np.frombuffer(raw[offset:offset + nbytes], dtype=dtype).reshape(rows, cols)
        blocks[entry["name"]] = array.copy()
        offset += nbytes
    return header["meta"], blocks


def save_checkpoint(path, spec: NetworkSpec, params: list, meta: dict | None = None) -> None:
    """Write the network layout and every parameter, bit-exact."""
    from .layers import param_items

    blocks = []
    for i, layer_params in enumerate(params):
        for name, value in param_items(layer_params):
            if isinstance(value, float):
                value = np.array([[value]])
            blocks.append((f"layer{i:02d}/{name}", value))
    container_meta = {"spec": spec.to_dict(), "extra": meta or {}}
    write_container(path, "checkpoint", container_meta, blocks)


def load_checkpoint(path):
    """Returns (spec, params, meta)."""
    from .layers import KIND_BL, KIND_TABL, BLParams, MTABLParams, TABLParams

    meta, blocks = read_container(path, expect_kind="checkpoint")
    spec = NetworkSpec.from_dict(meta["spec"])
    params = []
    for i, layer in enumerate(spec.layers):
        prefix = f"layer{i:02d}/"

        def block(name):
            key = prefix + name
            if key not in blocks:
                raise FormatError(f"{path}: checkpoint is missing block {key!r}")
            return blocks[key]

        base = BLParams(W1=block("W1"), W2=block("W2"), B=block("B"))
        if layer.kind == KIND_BL:
            params.append(base)
        elif layer.kind == KIND_TABL:
            params.append(TABLParams(
                base=base, W=block("W"), lam=float(block("lam")[0, 0]),
                fix_attention_diag=layer.fix_attention_diag,
            ))
        else:
            heads = [block(f"head{k}") for k in range(layer.heads)]
            params.append(MTABLParams(
                base=base, heads=heads, lam=float(block("lam")[0, 0]),
                Wtilde1=block("Wtilde1"),
                fix_attention_diag=layer.fix_attention_diag,
            ))
    return spec, params, meta["extra"]
