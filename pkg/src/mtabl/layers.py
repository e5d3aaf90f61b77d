"""Bilinear layers with temporal attention, single- and multi-head.

All three layer kinds map a matrix-valued series X of shape (D, T), whose
columns are consecutive time steps, to an output of shape (D', T'):

  BL     y = act(W1 @ X @ W2 + B)

  TABL   xbar = W1 @ X                    feature projection, (D', T)
         e    = xbar @ W                  attention scores, (D', T)
         a    = softmax over each row     attention mask, rows sum to 1
         mix  = lam*(xbar*a) + (1-lam)*xbar
         y    = act(mix @ W2 + B)

  MTABL  K attention heads, each with its own score matrix W_k, share the
         projection xbar and the scalar lam. The per-head mixed features
         are stacked on the feature axis into a (D'*K, T) block and
         projected back to D' rows by Wtilde1 before the temporal map:
         y = act((Wtilde1 @ stack) @ W2 + B)

The mixing coefficient lam is constrained to [0, 1]; at lam=0 the attention
path is inert and TABL degenerates to BL. Backward passes are exact
analytic gradients, derived by hand; there is no autodiff anywhere.

Forward passes are pure given (params, input) and parameters are never
mutated here, so concurrent forward/backward over different samples with
shared parameters is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CacheMismatchError,
    ConfigurationError,
    ConstraintError,
    DimensionError,
)
from .linalg import (
    Matrix,
    add,
    concat_rows,
    hadamard,
    matmul,
    scale,
    scope,
    softmax_rows,
    transpose,
)

KIND_BL = "bl"
KIND_TABL = "tabl"
KIND_MTABL = "mtabl"
LAYER_KINDS = (KIND_BL, KIND_TABL, KIND_MTABL)

ACTIVATIONS = ("identity", "relu", "softmax")

# Scope labels for the multiplication counter; the complexity checks in
# the verify module read these back per forward step.
SCOPE_PROJECT = "feature_projection"
SCOPE_ATTENTION = "attention_scores"
SCOPE_MIX = "attention_mixing"
SCOPE_RECOMBINE = "head_recombination"
SCOPE_OUTPUT = "temporal_projection"

MASK_ROW_SUM_TOL = 1e-12


@dataclass
class BLParams:
    """Weights of an attention-free bilinear layer.

    W1 is (D', D), W2 is (T, T'), B is (D', T').
    """

    W1: Matrix
    W2: Matrix
    B: Matrix


@dataclass
class TABLParams:
    """BL weights plus a single attention score matrix W (T, T) and lam."""

    base: BLParams
    W: Matrix
    lam: float
    fix_attention_diag: bool = False


@dataclass
class MTABLParams:
    """BL weights plus K score matrices, a shared lam, and the head
    recombination matrix Wtilde1 of shape (D', D'*K)."""

    base: BLParams
    heads: list[Matrix]
    lam: float
    Wtilde1: Matrix
    fix_attention_diag: bool = False


@dataclass
class LayerCache:
    """Every intermediate the backward pass needs, kept per forward call."""

    kind: str
    activation: str
    x: Matrix
    xbar: Matrix
    scores: list[Matrix]
    masks: list[Matrix]
    mixed: list[Matrix]
    stacked: Matrix | None
    xtilde: Matrix
    z: Matrix
    y: Matrix


def apply_activation(z: Matrix, kind: str) -> Matrix:
    if kind == "identity":
        return z
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "softmax":
        if z.shape[1] != 1:
            raise ConfigurationError(
                f"softmax activation needs a single output column, got shape {z.shape}"
            )
        col = z[:, 0]
        expd = np.exp(col - col.max())
        return (expd / expd.sum())[:, None]
    raise ConfigurationError(f"unknown activation {kind!r}")


def activation_backward(grad_y: Matrix, cache: LayerCache) -> Matrix:
    """Pull the upstream gradient back through the activation: dL/dy -> dL/dz."""
    kind = cache.activation
    if kind == "identity":
        return grad_y
    if kind == "relu":
        return grad_y * (cache.z > 0.0)
    if kind == "softmax":
        y = cache.y
        inner = float(y[:, 0] @ grad_y[:, 0])
        return y * (grad_y - inner)
    raise ConfigurationError(f"unknown activation {kind!r}")


def _require_lam(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise ConstraintError(f"lam must lie in [0, 1], got {lam}")


def _require_base_shapes(x: Matrix, p: BLParams) -> None:
    d, t = x.shape
    if p.W1.shape[1] != d:
        raise DimensionError(f"W1 {p.W1.shape} does not accept input with D={d}")
    if p.W2.shape[0] != t:
        raise DimensionError(f"W2 {p.W2.shape} does not accept input with T={t}")
    if p.B.shape != (p.W1.shape[0], p.W2.shape[1]):
        raise DimensionError(
            f"B {p.B.shape} does not match output shape "
            f"({p.W1.shape[0]}, {p.W2.shape[1]})"
        )


def _check_mask(a: Matrix) -> None:
    assert np.abs(a.sum(axis=1) - 1.0).max() <= MASK_ROW_SUM_TOL, (
        "attention mask rows do not sum to 1"
    )


def _attend(xbar: Matrix, w: Matrix, lam: float, carry: Matrix):
    """One attention head: scores, mask, and the mixed features.

    ``carry`` is (1-lam)*xbar, computed once by the caller and shared
    between heads.
    """
    with scope(SCOPE_ATTENTION):
        e = matmul(xbar, w)
    a = softmax_rows(e)
    _check_mask(a)
    with scope(SCOPE_MIX):
        mixed = add(scale(hadamard(xbar, a), lam), carry)
    return e, a, mixed


def _output_map(xtilde: Matrix, p: BLParams, activation: str):
    with scope(SCOPE_OUTPUT):
        z = add(matmul(xtilde, p.W2), p.B)
    return z, apply_activation(z, activation)


def bl_forward(x: Matrix, p: BLParams, activation: str = "identity"):
    """Attention-free bilinear map: y = act(W1 @ x @ W2 + B)."""
    _require_base_shapes(x, p)
    with scope(SCOPE_PROJECT):
        xbar = matmul(p.W1, x)
    z, y = _output_map(xbar, p, activation)
    cache = LayerCache(
        kind=KIND_BL, activation=activation, x=x, xbar=xbar,
        scores=[], masks=[], mixed=[], stacked=None, xtilde=xbar, z=z, y=y,
    )
    return y, cache


def tabl_forward(x: Matrix, p: TABLParams, activation: str = "identity"):
    """Single-head temporal attention bilinear layer."""
    _require_base_shapes(x, p.base)
    _require_lam(p.lam)
    t = x.shape[1]
    if p.W.shape != (t, t):
        raise DimensionError(f"attention matrix W {p.W.shape} must be ({t}, {t})")
    with scope(SCOPE_PROJECT):
        xbar = matmul(p.base.W1, x)
    with scope(SCOPE_MIX):
        carry = scale(xbar, 1.0 - p.lam)
    e, a, mixed = _attend(xbar, p.W, p.lam, carry)
    z, y = _output_map(mixed, p.base, activation)
    cache = LayerCache(
        kind=KIND_TABL, activation=activation, x=x, xbar=xbar,
        scores=[e], masks=[a], mixed=[mixed], stacked=None, xtilde=mixed, z=z, y=y,
    )
    return y, cache


def mtabl_forward(x: Matrix, p: MTABLParams, activation: str = "identity"):
    """Multi-head temporal attention bilinear layer.

    Heads run on the shared projection xbar; their mixed features are
    stacked on the feature axis and recombined by Wtilde1.
    """
    k = len(p.heads)
    if k == 0:
        raise ConfigurationError("mtabl needs at least one attention head")
    _require_base_shapes(x, p.base)
    _require_lam(p.lam)
    t = x.shape[1]
    d_out = p.base.W1.shape[0]
    for i, w in enumerate(p.heads):
        if w.shape != (t, t):
            raise DimensionError(f"head {i} matrix {w.shape} must be ({t}, {t})")
    if p.Wtilde1.shape != (d_out, d_out * k):
        raise DimensionError(
            f"Wtilde1 {p.Wtilde1.shape} must be ({d_out}, {d_out * k}) for K={k}"
        )
    with scope(SCOPE_PROJECT):
        xbar = matmul(p.base.W1, x)
    with scope(SCOPE_MIX):
        carry = scale(xbar, 1.0 - p.lam)
    scores, masks, mixed = [], [], []
    for w in p.heads:
        e, a, m = _attend(xbar, w, p.lam, carry)
        scores.append(e)
        masks.append(a)
        mixed.append(m)
    stacked = concat_rows(mixed)
    with scope(SCOPE_RECOMBINE):
        xtilde = matmul(p.Wtilde1, stacked)
    z, y = _output_map(xtilde, p.base, activation)
    cache = LayerCache(
        kind=KIND_MTABL, activation=activation, x=x, xbar=xbar,
        scores=scores, masks=masks, mixed=mixed, stacked=stacked,
        xtilde=xtilde, z=z, y=y,
    )
    return y, cache


def layer_forward(x: Matrix, params, activation: str = "identity"):
    """Dispatch on the parameter type."""
    if isinstance(params, MTABLParams):
        return mtabl_forward(x, params, activation)
    if isinstance(params, TABLParams):
        return tabl_forward(x, params, activation)
    if isinstance(params, BLParams):
        return bl_forward(x, params, activation)
    raise ConfigurationError(f"unknown parameter type {type(params).__name__}")


def _check_cache(cache: LayerCache, params, grad_y: Matrix) -> None:
    expected_kind = {
        BLParams: KIND_BL, TABLParams: KIND_TABL, MTABLParams: KIND_MTABL,
    }.get(type(params))
    if expected_kind != cache.kind:
        raise CacheMismatchError(
            f"cache built by a {cache.kind} forward, parameters are {expected_kind}"
        )
    if grad_y.shape != cache.y.shape:
        raise CacheMismatchError(
            f"upstream gradient {grad_y.shape} does not match output {cache.y.shape}"
        )
    base = params if isinstance(params, BLParams) else params.base
    if cache.xbar.shape != (base.W1.shape[0], cache.x.shape[1]):
        raise CacheMismatchError("cached projection does not match W1")
    if isinstance(params, MTABLParams) and len(params.heads) != len(cache.masks):
        raise CacheMismatchError(
            f"cache holds {len(cache.masks)} heads, parameters have {len(params.heads)}"
        )


def _softmax_rows_backward(grad_a: Matrix, a: Matrix) -> Matrix:
    # Row-wise Jacobian of the softmax: de = a * (da - sum(da * a, row))
    inner = np.sum(grad_a * a, axis=1, keepdims=True)
    return a * (grad_a - inner)


def layer_backward(cache: LayerCache, params, grad_y: Matrix,
                   *, grad_wrt_preactivation: bool = False):
    """Exact gradients of a scalar loss w.r.t. every parameter and the input.

    ``grad_y`` is dL/dy, or dL/dz when ``grad_wrt_preactivation`` is set
    (the fused softmax + cross-entropy path supplies the latter). Returns
    ``(grads, grad_x)`` where ``grads`` maps parameter names as produced
    by :func:`param_items` to arrays (and ``"lam"`` to a float).
    """
    _check_cache(cache, params, grad_y)
    dz = grad_y if grad_wrt_preactivation else activation_backward(grad_y, cache)
    base = params if isinstance(params, BLParams) else params.base

    grads: dict[str, Matrix | float] = {}
    grads["B"] = dz.copy()
    grads["W2"] = matmul(transpose(cache.xtilde), dz)
    dxtilde = matmul(dz, transpose(base.W2))

    if cache.kind == KIND_BL:
        dxbar = dxtilde
    else:
        if cache.kind == KIND_MTABL:
            grads["Wtilde1"] = matmul(dxtilde, transpose(cache.stacked))
            dstacked = matmul(transpose(params.Wtilde1), dxtilde)
            d_out = cache.xbar.shape[0]
            dmixed = [dstacked[k * d_out:(k + 1) * d_out] for k in range(len(params.heads))]
            head_mats = params.heads
            head_names = [f"head{k}" for k in range(len(params.heads))]
        else:
            dmixed = [dxtilde]
            head_mats = [params.W]
            head_names = ["W"]

        xbar = cache.xbar
        lam = params.lam
        dxbar = np.zeros_like(xbar)
        dlam = 0.0
        for dmix, a, w, name in zip(dmixed, cache.masks, head_mats, head_names):
            dlam += float(np.sum(dmix * (xbar * a - xbar)))
            dxbar += (1.0 - lam) * dmix
            da = lam * (dmix * xbar)
            dxbar += lam * (dmix * a)
            de = _softmax_rows_backward(da, a)
            grads[name] = matmul(transpose(xbar), de)
            dxbar += matmul(de, transpose(w))
        grads["lam"] = dlam

    grads["W1"] = matmul(dxbar, transpose(cache.x))
    grad_x = matmul(transpose(base.W1), dxbar)
    return grads, grad_x


def param_items(params) -> list[tuple[str, Matrix | float]]:
    """Flatten a parameter object into (name, value) pairs, stable order."""
    if isinstance(params, BLParams):
        return [("W1", params.W1), ("W2", params.W2), ("B", params.B)]
    if isinstance(params, TABLParams):
        return param_items(params.base) + [("W", params.W), ("lam", params.lam)]
    if isinstance(params, MTABLParams):
        items = param_items(params.base)
        items += [(f"head{k}", w) for k, w in enumerate(params.heads)]
        items += [("Wtilde1", params.Wtilde1), ("lam", params.lam)]
        return items
    raise ConfigurationError(f"unknown parameter type {type(params).__name__}")


def params_to_dict(params) -> dict[str, Matrix | float]:
    return dict(param_items(params))


def params_from_dict(template, values: dict[str, Matrix | float]):
    """Rebuild a parameter object of the same kind as ``template``."""
    if isinstance(template, BLParams):
        return BLParams(W1=values["W1"], W2=values["W2"], B=values["B"])
    base = BLParams(W1=values["W1"], W2=values["W2"], B=values["B"])
    if isinstance(template, TABLParams):
        return TABLParams(base=base, W=values["W"], lam=float(values["lam"]),
                          fix_attention_diag=template.fix_attention_diag)
    if isinstance(template, MTABLParams):
        heads = [values[f"head{k}"] for k in range(len(template.heads))]
        return MTABLParams(base=base, heads=heads, lam=float(values["lam"]),
                           Wtilde1=values["Wtilde1"],
                           fix_attention_diag=template.fix_attention_diag)
    raise ConfigurationError(f"unknown parameter type {type(template).__name__}")


def clone_params(params):
    """Deep copy of one layer's parameters."""
    if isinstance(params, BLParams):
        return BLParams(W1=params.W1.copy(), W2=params.W2.copy(), B=params.B.copy())
    if isinstance(params, TABLParams):
        return replace(params, base=clone_params(params.base), W=params.W.copy())
    if isinstance(params, MTABLParams):
        return replace(
            params, base=clone_params(params.base),
            heads=[w.copy() for w in params.heads], Wtilde1=params.Wtilde1.copy(),
        )
    raise ConfigurationError(f"unknown parameter type {type(params).__name__}")
