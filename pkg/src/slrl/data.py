"""Multi-view datasets: container, on-disk format, normalization, synthesis, split.

A dataset is V feature matrices over one shared sample index (row i of every
view describes the same object) plus optional ground-truth labels.

On-disk layout, rooted at a directory:
  * ``manifest.txt`` with one line per view
        view <name> <relative-path> <continuous|discrete>
    and an optional line
        labels <relative-path>
  * matrix files either as whitespace/comma-delimited text or as binary
    blocks: magic ``MVM1``, rows (u64 LE), cols (u64 LE), then rows*cols
    float64 LE values in row-major order
  * labels as one integer per line
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError
from .numerics import make_rng

__all__ = [
    "MultiViewDataset",
    "load_dataset",
    "save_dataset",
    "read_matrix",
    "write_matrix",
    "normalize",
    "synth_multiview",
    "split",
]

MAGIC = b"MVM1"
MANIFEST = "manifest.txt"


@dataclass
class MultiViewDataset:
    """Per-view feature matrices over a shared sample index."""

    views: list
    labels: np.ndarray | None = None
    view_names: list = field(default_factory=list)
    kinds: list = field(default_factory=list)  # "continuous" | "discrete" per view

    def __post_init__(self):
        if not self.views:
            raise FormatError("dataset needs at least one view")
        self.views = [np.asarray(v, dtype=np.float64) for v in self.views]
        n = self.views[0].shape[0]
        for i, v in enumerate(self.views):
            if v.ndim != 2:
                raise FormatError(f"view {i} is not a matrix")
            if v.shape[0] != n:
                raise FormatError(f"view {i} has {v.shape[0]} rows, expected {n}")
            if v.shape[1] < 1:
                raise FormatError(f"view {i} has no features")
            if not np.isfinite(v).all():
                raise FormatError(f"view {i} contains non-finite entries")
        if n < 1:
            raise FormatError("dataset has no samples")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
            if self.labels.shape[0] != n:
                raise FormatError(f"{self.labels.shape[0]} labels for {n} samples")
        if not self.view_names:
            self.view_names = [f"view{i}" for i in range(len(self.views))]
        if not self.kinds:
            self.kinds = ["continuous"] * len(self.views)
        if len(self.view_names) != len(self.views) or len(self.kinds) != len(self.views):
            raise FormatError("view metadata length mismatch")

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> list:
        return [v.shape[1] for v in self.views]

    def n_clusters(self) -> int | None:
        return int(np.unique(self.labels).size) if self.labels is not None else None

    def take(self, idx) -> "MultiViewDataset":
        """Dataset restricted to the given row indices (in the given order)."""
        idx = np.asarray(idx, dtype=np.int64)
        return MultiViewDataset(
            views=[v[idx] for v in self.views],
            labels=self.labels[idx] if self.labels is not None else None,
            view_names=list(self.view_names),
            kinds=list(self.kinds),
        )


def write_matrix(path, m: np.ndarray) -> None:
    """Binary matrix block: MVM1 magic, u64 rows, u64 cols, float64 data."""
    m = np.ascontiguousarray(np.asarray(m, dtype=np.float64))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", m.shape[0], m.shape[1]))
        fh.write(m.astype("<f8").tobytes())


def read_matrix(path) -> np.ndarray:
    """Read a matrix file, sniffing binary (MVM1) versus delimited text."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == MAGIC:
            rows, cols = struct.unpack("<QQ", fh.read(16))
            data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
            if data.size != rows * cols:
                raise FormatError(f"{path}: truncated matrix block")
            return data.reshape(rows, cols).astype(np.float64)
    try:
        m = np.loadtxt(path, dtype=np.float64, delimiter=None, ndmin=2)
    except ValueError:
        m = np.loadtxt(path, dtype=np.float64, delimiter=",", ndmin=2)
    return m


def load_dataset(path) -> MultiViewDataset:
    """Load a dataset directory via its manifest."""
    root = Path(path)
    manifest = root / MANIFEST
    if not manifest.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {root}")
    views, names, kinds = [], [], []
    labels = None
    for lineno, raw in enumerate(manifest.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "view":
            if len(parts) != 4 or parts[3] not in ("continuous", "discrete"):
                raise FormatError(f"{manifest}:{lineno}: bad view line")
            names.append(parts[1])
            kinds.append(parts[3])
            views.append(read_matrix(root / parts[2]))
        elif parts[0] == "labels":
            if len(parts) != 2:
                raise FormatError(f"{manifest}:{lineno}: bad labels line")
            labels = np.loadtxt(root / parts[1], dtype=np.int64, ndmin=1)
        else:
            raise FormatError(f"{manifest}:{lineno}: unknown directive {parts[0]!r}")
    if not views:
        raise FormatError(f"{manifest}: no views declared")
    return MultiViewDataset(views=views, labels=labels, view_names=names, kinds=kinds)


def save_dataset(ds: MultiViewDataset, path) -> None:
    """Write a dataset directory (binary matrices plus manifest)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for name, kind, view in zip(ds.view_names, ds.kinds, ds.views):
        fname = f"{name}.mvm"
        write_matrix(root / fname, view)
        lines.append(f"view {name} {fname} {kind}")
    if ds.labels is not None:
        np.savetxt(root / "labels.txt", ds.labels, fmt="%d")
        lines.append("labels labels.txt")
    (root / MANIFEST).write_text("\n".join(lines) + "\n")


def normalize(ds: MultiViewDataset) -> MultiViewDataset:
    """Min-max scale every feature column to [0, 1]; constant columns map to 0."""
    out = []
    for view in ds.views:
        lo = view.min(axis=0)
        hi = view.max(axis=0)
        span = hi - lo
        scaled = np.where(span > 0, (view - lo) / np.where(span > 0, span, 1.0), 0.0)
        out.append(scaled)
    return replace(ds, views=out)


def synth_multiview(
    clusters: int,
    per_cluster: int,
    view_dims,
    noise: float = 0.05,
    seed: int = 0,
    min_separation: float = 0.5,
) -> MultiViewDataset:
    """Synthetic multi-view data with ground-truth cluster labels.

    Each cluster has one shared latent center; each view observes the center
    through a random linear map plus isotropic Gaussian noise, so at
    ``noise=0`` all samples of a cluster coincide within every view.
    Centers are redrawn until their pairwise distance is at least
    ``min_separation``, which keeps the difficulty of a given noise level
    comparable across seeds.
    """
    if clusters < 2 or per_cluster < 2:
        raise ParameterError("need clusters >= 2 and per_cluster >= 2")
    view_dims = [int(d) for d in view_dims]
    if not view_dims or any(d < 2 for d in view_dims):
        raise ParameterError("each view needs dimension >= 2")
    if noise < 0:
        raise ParameterError("noise must be >= 0")
    rng = make_rng(seed)
    gen_dim = max(2, min(view_dims))
    scale = 1.0 / np.sqrt(gen_dim)
    for _ in range(100):
        centers = rng.normal(size=(clusters, gen_dim))
        d = np.sqrt(
            np.maximum(
                np.sum(centers**2, 1)[:, None]
                + np.sum(centers**2, 1)[None, :]
                - 2 * centers @ centers.T,
                0.0,
            )
        )
        np.fill_diagonal(d, np.inf)
        if d.min() * scale >= min_separation:
            break
    centers = centers * scale
    n = clusters * per_cluster
    labels = np.repeat(np.arange(clusters), per_cluster)
    latent = centers[labels]
    views = []
    for d_v in view_dims:
        basis = rng.normal(size=(gen_dim, d_v)) / np.sqrt(gen_dim)
        clean = latent @ basis
        views.append(clean + noise * rng.normal(size=(n, d_v)))
    return MultiViewDataset(
        views=views,
        labels=labels,
        view_names=[f"view{i}" for i in range(len(view_dims))],
        kinds=["continuous"] * len(view_dims),
    )


def split(ds: MultiViewDataset, fraction: float, seed: int):
    """Disjoint row partition of sizes round(fraction*N) and the remainder.

    Every view (and the labels) is split by the same index set; indices are
    kept in original order within each part. Raises if either part would be
    empty.
    """
    if not 0.0 < fraction < 1.0:
        raise ParameterError("fraction must lie in (0, 1)")
    n = ds.n_samples
    n_first = int(round(fraction * n))
    if n_first < 1 or n - n_first < 1:
        raise ParameterError(f"split {fraction} of {n} samples leaves an empty part")
    perm = make_rng(seed).permutation(n)
    first = np.sort(perm[:n_first])
    second = np.sort(perm[n_first:])
    return ds.take(first), ds.take(second)
