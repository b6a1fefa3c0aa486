"""Multi-head graph attention over the neighbor graph, forward and backward.

For head k with linear map W^k (F' x F) and scoring vector a^k (2F'), the
attention of node i over its neighborhood N_i (which includes i itself) is

    alpha_ij = softmax_{j in N_i} LeakyReLU(a^kT [W^k h_i || W^k h_j]),

each head aggregates g_i^k = sum_{j in N_i} alpha_ij^k W^k h_j, and heads
combine either by averaging pre-activations (output dim F', activation
applied after the average) or by concatenating activated head outputs
(output dim K F'). Softmax rows are max-shifted for overflow safety.

The backward pass is an exact vector-Jacobian product through the
activation, aggregation, softmax, LeakyReLU, and linear maps; the test
suite checks it against central differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .graph import NeighborGraph
from .numerics import as_matrix, make_rng

__all__ = [
    "GatParams",
    "init_gat",
    "init_gat_stack",
    "attention_coeffs",
    "gat_forward",
    "gat_backward",
    "stack_forward",
    "stack_backward",
    "stack_output_dim",
]


@dataclass
class GatParams:
    """Parameters of one attention layer."""

    w: list  # per head: (F', F)
    a: list  # per head: (2 F',)
    activation: str = "sigmoid"  # "sigmoid" | "elu"
    combine: str = "average"  # "average" | "concat"
    leaky_slope: float = 0.2

    def __post_init__(self):
        if not self.w or len(self.w) != len(self.a):
            raise ShapeError("need one scoring vector per head")
        fp, f = self.w[0].shape
        for wk, ak in zip(self.w, self.a):
            if wk.shape != (fp, f):
                raise ShapeError("heads must share the same W shape")
            if ak.shape != (2 * fp,):
                raise ShapeError(f"scoring vector must have length {2 * fp}")
        if self.activation not in ("sigmoid", "elu"):
            raise ParameterError(f"unknown activation {self.activation!r}")
        if self.combine not in ("average", "concat"):
            raise ParameterError(f"unknown combine mode {self.combine!r}")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ParameterError("leaky_slope must lie in (0, 1)")

    @property
    def heads(self) -> int:
        return len(self.w)

    @property
    def f_in(self) -> int:
        return self.w[0].shape[1]

    @property
    def f_prime(self) -> int:
        return self.w[0].shape[0]

    @property
    def f_out(self) -> int:
        return self.f_prime if self.combine == "average" else self.heads * self.f_prime


def init_gat(
    f_in: int,
    f_prime: int,
    heads: int,
    seed_or_rng,
    activation: str = "sigmoid",
    combine: str = "average",
    leaky_slope: float = 0.2,
) -> GatParams:
    """He-uniform head weights (fan-in only) and Glorot-uniform scoring vectors.

    The fan-in rule keeps the post-attention sigmoid inputs at a usable
    contrast; Glorot-width scoring vectors keep the initial attention
    close to uniform.
    """
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else make_rng(seed_or_rng)
    sw = np.sqrt(6.0 / f_in)
    sa = np.sqrt(6.0 / (2 * f_prime + 1))
    return GatParams(
        w=[rng.uniform(-sw, sw, size=(f_prime, f_in)) for _ in range(heads)],
        a=[rng.uniform(-sa, sa, size=2 * f_prime) for _ in range(heads)],
        activation=activation,
        combine=combine,
        leaky_slope=leaky_slope,
    )


def init_gat_stack(
    layers: int,
    f_in: int,
    f_prime: int,
    heads: int,
    seed: int,
    activation: str = "sigmoid",
    combine: str = "average",
    leaky_slope: float = 0.2,
) -> list:
    """A stack of attention layers with chained dimensions; [] when layers=0."""
    rng = make_rng(seed)
    stack = []
    dim = f_in
    for _ in range(layers):
        layer = init_gat(dim, f_prime, heads, rng, activation, combine, leaky_slope)
        stack.append(layer)
        dim = layer.f_out
    return stack


def stack_output_dim(stack: list, f_in: int) -> int:
    return stack[-1].f_out if stack else f_in


def _activate(params: GatParams, x: np.ndarray) -> np.ndarray:
    if params.activation == "sigmoid":
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out
    return np.where(x > 0, x, np.exp(np.minimum(x, 0.0)) - 1.0)


def _activate_deriv(params: GatParams, x: np.ndarray) -> np.ndarray:
    if params.activation == "sigmoid":
        s = _activate(params, x)
        return s * (1.0 - s)
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def _resolve_neighborhoods(g, n: int, include_self: bool):
    """Accept a NeighborGraph or a prebuilt (indptr, indices) pair."""
    if isinstance(g, NeighborGraph):
        if g.n != n:
            raise ShapeError(f"graph covers {g.n} nodes, features cover {n}")
        return g.neighborhoods(include_self=include_self)
    indptr, indices = g
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    if indptr.shape[0] != n + 1:
        raise ShapeError(f"indptr covers {indptr.shape[0] - 1} nodes, features cover {n}")
    return indptr, indices


class _HeadCache:
    __slots__ = ("z", "t", "alpha", "agg")

    def __init__(self, z, t, alpha, agg):
        self.z = z
        self.t = t
        self.alpha = alpha
        self.agg = agg


class _LayerCache:
    __slots__ = ("indptr", "indices", "row", "heads", "pre_combine", "h_in")

    def __init__(self, indptr, indices, row, heads, pre_combine, h_in):
        self.indptr = indptr
        self.indices = indices
        self.row = row
        self.heads = heads
        self.pre_combine = pre_combine
        self.h_in = h_in

    def alpha_row_sums(self) -> np.ndarray:
        """Per-head per-node attention row sums (should all be 1)."""
        n = self.indptr.shape[0] - 1
        sums = np.empty((len(self.heads), n))
        for k, head in enumerate(self.heads):
            acc = np.zeros(n)
            np.add.at(acc, self.row, head.alpha)
            sums[k] = acc
        return sums


def _head_forward(params: GatParams, k: int, h, indptr, indices, row):
    n = h.shape[0]
    fp = params.f_prime
    z = h @ params.w[k].T
    s_src = z @ params.a[k][:fp]
    s_dst = z @ params.a[k][fp:]
    t = s_src[row] + s_dst[indices]
    e = np.where(t > 0, t, params.leaky_slope * t)
    rowmax = np.full(n, -np.inf)
    np.maximum.at(rowmax, row, e)
    rowmax[~np.isfinite(rowmax)] = 0.0  # empty neighborhoods contribute nothing
    ex = np.exp(e - rowmax[row])
    denom = np.zeros(n)
    np.add.at(denom, row, ex)
    alpha = ex / denom[row]
    agg = np.zeros((n, fp))
    np.add.at(agg, row, alpha[:, None] * z[indices])
    return _HeadCache(z=z, t=t, alpha=alpha, agg=agg)


def _layer_forward(params: GatParams, h, indptr, indices):
    row = np.repeat(np.arange(indptr.shape[0] - 1), np.diff(indptr))
    heads = [_head_forward(params, k, h, indptr, indices, row) for k in range(params.heads)]
    if params.combine == "average":
        pre = sum(hc.agg for hc in heads) / params.heads
        out = _activate(params, pre)
    else:
        pre = None
        out = np.concatenate([_activate(params, hc.agg) for hc in heads], axis=1)
    cache = _LayerCache(indptr=indptr, indices=indices, row=row, heads=heads, pre_combine=pre, h_in=h)
    return out, cache


def _layer_backward(params: GatParams, cache: _LayerCache, upstream):
    h = cache.h_in
    indptr, indices, row = cache.indptr, cache.indices, cache.row
    n = h.shape[0]
    fp = params.f_prime
    grad_h = np.zeros_like(h)
    grad_w, grad_a = [], []
    if params.combine == "average":
        d_pre = upstream * _activate_deriv(params, cache.pre_combine)
    for k, hc in enumerate(cache.heads):
        if params.combine == "average":
            d_agg = d_pre / params.heads
        else:
            u_k = upstream[:, k * fp : (k + 1) * fp]
            d_agg = u_k * _activate_deriv(params, hc.agg)
        d_alpha = np.einsum("ef,ef->e", d_agg[row], hc.z[indices])
        dz = np.zeros_like(hc.z)
        np.add.at(dz, indices, hc.alpha[:, None] * d_agg[row])
        # softmax rows: d e_ij = alpha_ij (d alpha_ij - sum_j' alpha_ij' d alpha_ij')
        dot = np.zeros(n)
        np.add.at(dot, row, hc.alpha * d_alpha)
        d_e = hc.alpha * (d_alpha - dot[row])
        d_t = d_e * np.where(hc.t > 0, 1.0, params.leaky_slope)
        a_src = params.a[k][:fp]
        a_dst = params.a[k][fp:]
        da_src = d_t @ hc.z[row]
        da_dst = d_t @ hc.z[indices]
        row_dt = np.zeros(n)
        np.add.at(row_dt, row, d_t)
        col_dt = np.zeros(n)
        np.add.at(col_dt, indices, d_t)
        dz += row_dt[:, None] * a_src[None, :]
        dz += col_dt[:, None] * a_dst[None, :]
        grad_w.append(dz.T @ h)
        grad_a.append(np.concatenate([da_src, da_dst]))
        grad_h += dz @ params.w[k]
    return grad_w, grad_a, grad_h


def attention_coeffs(params: GatParams, head: int, h, g, include_self: bool = True) -> list:
    """Per-node attention coefficient arrays for one head.

    Entry i is aligned with node i's neighborhood (self included by default)
    in ascending neighbor order and sums to 1.
    """
    h = as_matrix(h, "h")
    if not 0 <= head < params.heads:
        raise ParameterError(f"head {head} outside [0, {params.heads})")
    indptr, indices = _resolve_neighborhoods(g, h.shape[0], include_self)
    row = np.repeat(np.arange(indptr.shape[0] - 1), np.diff(indptr))
    hc = _head_forward(params, head, h, indptr, indices, row)
    return [hc.alpha[indptr[i] : indptr[i + 1]] for i in range(h.shape[0])]


def gat_forward(params: GatParams, h, g, include_self: bool = True) -> np.ndarray:
    """Structured representation: one attention layer applied to h."""
    h = as_matrix(h, "h")
    if h.shape[1] != params.f_in:
        raise ShapeError(f"layer expects {params.f_in} features, got {h.shape[1]}")
    indptr, indices = _resolve_neighborhoods(g, h.shape[0], include_self)
    out, _ = _layer_forward(params, h, indptr, indices)
    return out


def gat_backward(params: GatParams, h, g, upstream, include_self: bool = True):
    """Gradients of sum(upstream * gat_forward(...)) for W^k, a^k, and h.

    Returns (grad_w, grad_a, grad_h) with grad_w/grad_a as per-head lists.
    """
    h = as_matrix(h, "h")
    upstream = as_matrix(upstream, "upstream")
    indptr, indices = _resolve_neighborhoods(g, h.shape[0], include_self)
    out, cache = _layer_forward(params, h, indptr, indices)
    if upstream.shape != out.shape:
        raise ShapeError(f"upstream shape {upstream.shape} does not match output {out.shape}")
    return _layer_backward(params, cache, upstream)


def stack_forward(stack: list, h, g, include_self: bool = True):
    """Forward through a layer stack; identity for an empty stack.

    Returns (output, caches); caches feed ``stack_backward`` and expose the
    per-layer attention row sums.
    """
    h = as_matrix(h, "h")
    if not stack:
        return h, []
    indptr, indices = _resolve_neighborhoods(g, h.shape[0], include_self)
    caches = []
    x = h
    for layer in stack:
        if x.shape[1] != layer.f_in:
            raise ShapeError(f"layer expects {layer.f_in} features, got {x.shape[1]}")
        x, cache = _layer_forward(layer, x, indptr, indices)
        caches.append(cache)
    return x, caches


def stack_backward(stack: list, caches: list, upstream):
    """Backward through a layer stack; returns (per-layer grads, grad_h).

    per-layer grads is a list of (grad_w, grad_a) matching ``stack`` order.
    For an empty stack the upstream passes through unchanged.
    """
    if not stack:
        return [], np.asarray(upstream, dtype=np.float64)
    grads = [None] * len(stack)
    g_out = upstream
    for idx in range(len(stack) - 1, -1, -1):
        grad_w, grad_a, g_out = _layer_backward(stack[idx], caches[idx], g_out)
        grads[idx] = (grad_w, grad_a)
    return grads, g_out
