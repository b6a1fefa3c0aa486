"""Symmetric k-nearest-neighbor graph over the latent representation.

Edges follow the union rule: (i, j) is present iff i is among the k nearest
neighbors of j or vice versa. Weights come from either a Gaussian kernel,

    w_ij = exp(-||h_i - h_j||^2 / (2 sigma^2)),

or the raw dot product h_j^T h_i. The attention layer consumes only the
edge set; weights are retained for inspection and debugging dumps.

Neighbor search is exact (full pairwise distances) with ties broken toward
the smaller index, so construction is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .numerics import as_matrix

__all__ = [
    "NeighborGraph",
    "knn_indices",
    "build_gaussian",
    "build_dot",
    "build_graph",
    "dump_edges",
]


@dataclass
class NeighborGraph:
    """Symmetric weighted adjacency stored as per-node sorted neighbor lists."""

    n: int
    k: int
    kernel: str  # "gaussian" | "dot"
    sigma: float | None
    nbrs: list  # nbrs[i]: sorted int64 array of neighbor ids, no self
    wts: list  # wts[i]: weights aligned with nbrs[i]

    def degree(self, i: int) -> int:
        return len(self.nbrs[i])

    def weight(self, i: int, j: int) -> float:
        """Edge weight, 0.0 for absent pairs."""
        pos = np.searchsorted(self.nbrs[i], j)
        if pos < len(self.nbrs[i]) and self.nbrs[i][pos] == j:
            return float(self.wts[i][pos])
        return 0.0

    def neighborhoods(self, include_self: bool = True):
        """CSR-style (indptr, indices) over per-node neighborhoods.

        With ``include_self`` each node's own id is inserted into its sorted
        neighbor list, which is the form the attention layer consumes.
        """
        lists = []
        for i in range(self.n):
            ids = self.nbrs[i]
            if include_self:
                ids = np.insert(ids, np.searchsorted(ids, i), i)
            lists.append(ids)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(v) for v in lists])
        indices = np.concatenate(lists) if lists else np.zeros(0, dtype=np.int64)
        return indptr, indices.astype(np.int64)


def _pairwise_sq_dists(h: np.ndarray) -> np.ndarray:
    sq = np.sum(h * h, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (h @ h.T)
    d = np.maximum(d, 0.0)
    # force exact symmetry so both directions of an edge share one distance
    return (d + d.T) / 2.0


def knn_indices(h, k: int) -> list:
    """For each node, the k nearest other nodes by Euclidean distance.

    Ties are broken toward the smaller index. Returns a list of int64 arrays
    in ascending-distance order.
    """
    h = as_matrix(h, "h")
    n = h.shape[0]
    if not 1 <= k <= n - 1:
        raise ParameterError(f"k={k} outside [1, {n - 1}]")
    d = _pairwise_sq_dists(h)
    np.fill_diagonal(d, np.inf)
    out = []
    for i in range(n):
        order = np.argsort(d[i], kind="stable")  # stable: equal distances keep index order
        out.append(order[:k].astype(np.int64))
    return out


def _union_edges(nn: list):
    """Symmetrized edge set { (i,j) : j in knn(i) or i in knn(j) }, i != j."""
    n = len(nn)
    adj = [set() for _ in range(n)]
    for i, ids in enumerate(nn):
        for j in ids:
            adj[int(i)].add(int(j))
            adj[int(j)].add(int(i))
    return [np.array(sorted(s), dtype=np.int64) for s in adj]


def _median_knn_distance(h: np.ndarray, nn: list) -> float:
    d2 = _pairwise_sq_dists(h)
    dists = np.concatenate([np.sqrt(d2[i, ids]) for i, ids in enumerate(nn)])
    return float(np.median(dists))


def build_gaussian(h, k: int, sigma: float | None = None) -> NeighborGraph:
    """Union-kNN graph with Gaussian kernel weights.

    When ``sigma`` is not given it defaults to the median distance over all
    selected kNN pairs; degenerate data (all points identical) makes that
    heuristic collapse, in which case an explicit sigma is required.
    """
    h = as_matrix(h, "h")
    nn = knn_indices(h, k)
    if sigma is None:
        sigma = _median_knn_distance(h, nn)
        if sigma <= 0.0:
            raise ParameterError(
                "sigma heuristic degenerate (all selected neighbor distances are zero); "
                "pass an explicit sigma"
            )
    elif sigma <= 0.0:
        raise ParameterError("sigma must be positive")
    adj = _union_edges(nn)
    d2 = _pairwise_sq_dists(h)
    wts = [np.exp(-d2[i, ids] / (2.0 * sigma * sigma)) for i, ids in enumerate(adj)]
    return NeighborGraph(n=h.shape[0], k=k, kernel="gaussian", sigma=float(sigma), nbrs=adj, wts=wts)


def build_dot(h, k: int) -> NeighborGraph:
    """Union-kNN graph with dot-product weights (may be negative)."""
    h = as_matrix(h, "h")
    nn = knn_indices(h, k)
    adj = _union_edges(nn)
    gram = h @ h.T
    gram = (gram + gram.T) / 2.0
    wts = [gram[i, ids].copy() for i, ids in enumerate(adj)]
    return NeighborGraph(n=h.shape[0], k=k, kernel="dot", sigma=None, nbrs=adj, wts=wts)


def build_graph(h, k: int, kernel: str = "gaussian", sigma: float | None = None) -> NeighborGraph:
    if kernel == "gaussian":
        return build_gaussian(h, k, sigma)
    if kernel == "dot":
        return build_dot(h, k)
    raise ParameterError(f"unknown kernel {kernel!r}")


def dump_edges(g: NeighborGraph) -> str:
    """Text dump, one ``i j weight`` line per undirected edge with i < j."""
    lines = []
    for i in range(g.n):
        for j, w in zip(g.nbrs[i], g.wts[i]):
            if i < j:
                lines.append(f"{i} {j} {w:.17g}")
    return "\n".join(lines) + ("\n" if lines else "")
