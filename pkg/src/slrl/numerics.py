"""Dense float64 matrix helpers, seeded RNG, and the gradient-check contract.

Matrices are plain 2-D ``numpy.ndarray`` objects in float64; every public
operation validates shapes and finiteness rather than trusting callers.
Randomness is always threaded through an explicit ``numpy.random.Generator``
(PCG64), never global state, so a seed fully determines a run.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NumericError, ShapeError

__all__ = [
    "as_matrix",
    "make_rng",
    "matmul",
    "finite_diff_grad",
    "relative_error",
]


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator: equal seeds give equal draw sequences."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise NumericError(f"{name} contains non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product with explicit shape validation."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    if not np.isfinite(out).all():
        raise NumericError("matmul produced non-finite entries")
    return out


def finite_diff_grad(f: Callable[[np.ndarray], float], x, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector.

    Each coordinate i is estimated as (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64).ravel()
    grad = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xp[i] += eps
        xm = x.copy()
        xm[i] -= eps
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite loss at coordinate {i} during finite differencing")
        grad[i] = (fp - fm) / (2.0 * eps)
    return grad


def relative_error(analytic, numeric) -> float:
    """Max elementwise |g_a - g_n| / max(1, |g_a|, |g_n|) over both gradients."""
    ga = np.asarray(analytic, dtype=np.float64).ravel()
    gn = np.asarray(numeric, dtype=np.float64).ravel()
    if ga.shape != gn.shape:
        raise ShapeError(f"gradient shapes differ: {ga.shape} vs {gn.shape}")
    if ga.size == 0:
        return 0.0
    denom = np.maximum(1.0, np.maximum(np.abs(ga), np.abs(gn)))
    return float(np.max(np.abs(ga - gn) / denom))
