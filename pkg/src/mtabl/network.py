"""Network composition: layer descriptors, initialization and sequential
forward/backward over a stack of bilinear layers.

A network is an ordered list of layer descriptors whose shapes chain, with
the attention layer last producing a (3, 1) column of class probabilities.
Shape mismatches are configuration errors raised at construction, never at
run time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError
from .layers import (
    ACTIVATIONS,
    BLParams,
    KIND_BL,
    KIND_MTABL,
    KIND_TABL,
    LAYER_KINDS,
    MTABLParams,
    TABLParams,
    layer_backward,
    layer_forward,
)
from .linalg import Matrix

N_CLASSES = 3

# Hidden shapes for the two- and three-layer topologies; overridable.
DEFAULT_HIDDEN = {
    "A": [],
    "B": [(120, 5)],
    "C": [(60, 10), (120, 5)],
}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_dims: tuple[int, int]
    activation: str = "identity"
    heads: int = 1
    fix_attention_diag: bool = False

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        d, t = self.out_dims
        if d < 1 or t < 1:
            raise ConfigurationError(f"output dims must be positive, got {self.out_dims}")
        if self.heads < 1:
            raise ConfigurationError(f"head count must be >= 1, got {self.heads}")
        if self.kind != KIND_MTABL and self.heads != 1:
            raise ConfigurationError(f"{self.kind} layers take exactly one head")
        if self.activation == "softmax" and t != 1:
            raise ConfigurationError("softmax activation requires a single output column")


@dataclass(frozen=True)
class NetworkSpec:
    """Input shape plus the chained layer descriptors."""

    input_dims: tuple[int, int]
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if len(self.layers) == 0:
            raise ConfigurationError("network needs at least one layer")
        d, t = self.input_dims
        if d < 1 or t < 1:
            raise ConfigurationError(f"input dims must be positive, got {self.input_dims}")
        last = self.layers[-1]
        if last.out_dims != (N_CLASSES, 1):
            raise ConfigurationError(
                f"final layer must output ({N_CLASSES}, 1) class scores, got {last.out_dims}"
            )
        if last.activation != "softmax":
            raise ConfigurationError("final layer must use the softmax activation")

    def shapes(self) -> list[tuple[int, int]]:
        """Shape at every layer boundary, input first."""
        chain = [self.input_dims]
        for layer in self.layers:
            chain.append(layer.out_dims)
        return chain

    def to_dict(self) -> dict:
        return {
            "input_dims": list(self.input_dims),
            "layers": [
                {
                    "kind": l.kind,
                    "out_dims": list(l.out_dims),
                    "activation": l.activation,
                    "heads": l.heads,
                    "fix_attention_diag": l.fix_attention_diag,
                }
                for l in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        layers = tuple(
            LayerSpec(
                kind=l["kind"],
                out_dims=tuple(l["out_dims"]),
                activation=l["activation"],
                heads=l.get("heads", 1),
                fix_attention_diag=l.get("fix_attention_diag", False),
            )
            for l in d["layers"]
        )
        return cls(input_dims=tuple(d["input_dims"]), layers=layers)


def topology(name: str, *, input_dims: tuple[int, int] = (40, 10),
             attention_kind: str = KIND_TABL, heads: int = 1,
             hidden_dims: list[tuple[int, int]] | None = None,
             fix_attention_diag: bool = False) -> NetworkSpec:
    """Build one of the three reference topologies.

    A is the attention layer alone; B puts one BL layer in front of it;
    C puts two. Hidden shapes default to :data:`DEFAULT_HIDDEN` and can be
    overridden per layer.
    """
    name = name.upper()
    if name not in DEFAULT_HIDDEN:
        raise ConfigurationError(f"unknown topology {name!r}, expected A, B or C")
    if attention_kind not in (KIND_TABL, KIND_MTABL):
        raise ConfigurationError(f"attention layer must be tabl or mtabl, got {attention_kind!r}")
    hidden = DEFAULT_HIDDEN[name] if hidden_dims is None else hidden_dims
    if len(hidden) != len(DEFAULT_HIDDEN[name]):
        raise ConfigurationError(
            f"topology {name} takes {len(DEFAULT_HIDDEN[name])} hidden layers, got {len(hidden)}"
        )
    layers = [
        LayerSpec(kind=KIND_BL, out_dims=tuple(dims), activation="relu")
        for dims in hidden
    ]
    layers.append(
        LayerSpec(
            kind=attention_kind, out_dims=(N_CLASSES, 1), activation="softmax",
            heads=heads if attention_kind == KIND_MTABL else 1,
            fix_attention_diag=fix_attention_diag,
        )
    )
    return NetworkSpec(input_dims=input_dims, layers=tuple(layers))


def _uniform_fan(rng: np.random.Generator, rows: int, cols: int, fan_in: int) -> Matrix:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, (rows, cols))


def _attention_matrix(rng: np.random.Generator, t: int, fix_diag: bool) -> Matrix:
    # Uniform attention start, 1/T everywhere; the noise breaks the
    # symmetry between heads, which would otherwise receive identical
    # gradients forever.
    w = np.full((t, t), 1.0 / t)
    noise = rng.normal(0.0, 0.01, (t, t))
    if fix_diag:
        np.fill_diagonal(noise, 0.0)
    return w + noise


def init_layer_params(spec: LayerSpec, in_dims: tuple[int, int],
                      rng: np.random.Generator):
    d, t = in_dims
    d_out, t_out = spec.out_dims
    base = BLParams(
        W1=_uniform_fan(rng, d_out, d, fan_in=d),
        W2=_uniform_fan(rng, t, t_out, fan_in=t),
        B=np.zeros((d_out, t_out)),
    )
    if spec.kind == KIND_BL:
        return base
    if spec.kind == KIND_TABL:
        return TABLParams(
            base=base, W=_attention_matrix(rng, t, spec.fix_attention_diag),
            lam=0.5, fix_attention_diag=spec.fix_attention_diag,
        )
    heads = [
        _attention_matrix(rng, t, spec.fix_attention_diag) for _ in range(spec.heads)
    ]
    return MTABLParams(
        base=base, heads=heads, lam=0.5,
        Wtilde1=_uniform_fan(rng, d_out, d_out * spec.heads, fan_in=d_out * spec.heads),
        fix_attention_diag=spec.fix_attention_diag,
    )


def init_network_params(spec: NetworkSpec, seed_or_rng) -> list:
    rng = (seed_or_rng if isinstance(seed_or_rng, np.random.Generator)
           else np.random.default_rng(seed_or_rng))
    params = []
    shapes = spec.shapes()
    for layer, in_dims in zip(spec.layers, shapes[:-1]):
        params.append(init_layer_params(layer, in_dims, rng))
    return params


def network_forward(x: Matrix, spec: NetworkSpec, params: list):
    """Run the stack; returns the (3, 1) class probabilities and all caches."""
    if x.shape != spec.input_dims:
        raise DimensionError(f"input {x.shape} does not match network input {spec.input_dims}")
    caches = []
    out = x
    for layer, p in zip(spec.layers, params):
        out, cache = layer_forward(out, p, layer.activation)
        caches.append(cache)
    return out, caches


def network_backward(spec: NetworkSpec, params: list, caches: list, grad,
                     *, grad_wrt_preactivation: bool = False):
    """Reverse the stack; returns per-layer gradient dicts and dL/dx.

    With ``grad_wrt_preactivation`` the incoming gradient is taken with
    respect to the final layer's pre-activation scores, as produced by the
    fused softmax cross-entropy backward.
    """
    grads: list = [None] * len(params)
    upstream = grad
    for i in range(len(params) - 1, -1, -1):
        fused = grad_wrt_preactivation and i == len(params) - 1
        grads[i], upstream = layer_backward(
            caches[i], params[i], upstream, grad_wrt_preactivation=fused
        )
    return grads, upstream


def predict_labels(spec: NetworkSpec, params: list, samples) -> list[int]:
    """Hard class decisions for a list of samples."""
    out = []
    for sample in samples:
        probs, _ = network_forward(sample.x, spec, params)
        out.append(int(np.argmax(probs[:, 0])))
    return out


def clone_network_params(params: list) -> list:
    from .layers import clone_params

    return [clone_params(p) for p in params]


def attention_lambdas(params: list) -> list[float]:
    """The mixing coefficient of every attention layer, in layer order."""
    return [p.lam for p in params if isinstance(p, (TABLParams, MTABLParams))]
