"""Small linear-algebra, interpolation and sampling utilities.

Provides:
* SpdMatrix / Grid1D / QuadratureDraws value types
* rank-one inverse update with its positivity certificate
* linear / bilinear interpolation with linear extrapolation beyond the grid
* a guarded symmetric positive-definite solve used by the backward recursion
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import DegenerateModelError, InvalidArgumentError

# Pivots below this fraction of the largest diagonal entry are treated as a
# singular (degenerate) model rather than silently regularized.
PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class SpdMatrix:
    """Symmetric positive-definite matrix wrapper with validation on build."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidArgumentError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidArgumentError("matrix entries must be finite")
        if np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
            raise InvalidArgumentError("matrix is not symmetric within 1e-12")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        # fails with DegenerateModelError when not positive definite
        spd_factor(a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Grid1D:
    """Strictly increasing 1-D grid. Queries beyond [lo, hi] extrapolate
    linearly from the boundary segment."""

    nodes: np.ndarray
    lo: float = field(init=False)
    hi: float = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidArgumentError("grid needs at least 2 nodes")
        if not np.all(np.isfinite(nodes)):
            raise InvalidArgumentError("grid nodes must be finite")
        if not np.all(np.diff(nodes) > 0):
            raise InvalidArgumentError("grid nodes must be strictly increasing")
        nodes = nodes.copy()
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "lo", float(nodes[0]))
        object.__setattr__(self, "hi", float(nodes[-1]))

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int) -> "Grid1D":
        return cls(np.linspace(lo, hi, n))

    @property
    def size(self) -> int:
        return self.nodes.size

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        steps = np.diff(self.nodes)
        return bool(np.max(np.abs(steps - steps[0])) <= rtol * steps[0])


@dataclass(frozen=True)
class QuadratureDraws:
    """A frozen block of innovation draws, generated once per experiment and
    reused at every grid node and period (common random numbers)."""

    seed: int
    draws: np.ndarray

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        if not np.all(np.isfinite(draws)):
            raise InvalidArgumentError("draws must be finite")
        draws = draws.copy()
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)

    @property
    def size(self) -> int:
        return self.draws.shape[0]


def spd_factor(a: np.ndarray):
    """Cholesky factor of a symmetric positive-definite matrix.

    Raises DegenerateModelError when the factorization fails or any pivot
    falls below PIVOT_RTOL times the largest diagonal entry.
    """
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError("matrix entries must be finite")
    try:
        chol, lower = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise DegenerateModelError(f"matrix is not positive definite: {exc}") from exc
    pivots = np.diag(chol) ** 2
    if np.min(pivots) < PIVOT_RTOL * np.max(np.diag(a)):
        raise DegenerateModelError(
            f"near-singular matrix: pivot ratio {np.min(pivots) / np.max(np.diag(a)):.3e}"
        )
    return chol, lower


def spd_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a @ x = rhs for symmetric positive-definite a, with the pivot guard."""
    factor = spd_factor(a)
    return scipy.linalg.cho_solve(factor, np.asarray(rhs, dtype=float), check_finite=False)


def rank_one_inverse(sigma_inv: np.ndarray, b: np.ndarray):
    """Inverse of A = Sigma + b b^T given Sigma^{-1}, plus the residual
    1 - b^T A^{-1} b = 1/(1 + b^T Sigma^{-1} b), which is positive whenever
    Sigma is positive definite.  Returns (a_inv, residual).
    """
    sigma_inv = np.asarray(sigma_inv, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(sigma_inv)) and np.all(np.isfinite(b))):
        raise InvalidArgumentError("rank_one_inverse requires finite inputs")
    if sigma_inv.ndim != 2 or sigma_inv.shape[0] != sigma_inv.shape[1]:
        raise InvalidArgumentError(f"sigma_inv must be square, got {sigma_inv.shape}")
    if np.max(np.abs(sigma_inv - sigma_inv.T)) > 1e-10 * max(1.0, np.max(np.abs(sigma_inv))):
        raise InvalidArgumentError("sigma_inv must be symmetric")
    if b.shape != (sigma_inv.shape[0],):
        raise InvalidArgumentError("b has wrong length")
    u = sigma_inv @ b
    denom = 1.0 + b @ u
    a_inv = sigma_inv - np.outer(u, u) / denom
    return a_inv, 1.0 / denom


def linear_interp(grid: Grid1D, values: np.ndarray, x):
    """Piecewise-linear interpolation on the grid, linear extrapolation from
    the boundary segment outside [lo, hi].  `x` may be a scalar or an array."""
    nodes = grid.nodes
    values = np.asarray(values, dtype=float)
    if values.shape != nodes.shape:
        raise InvalidArgumentError("values must have one entry per grid node")
    x_arr = np.asarray(x, dtype=float)
    idx = np.clip(np.searchsorted(nodes, x_arr, side="right") - 1, 0, nodes.size - 2)
    x0 = nodes[idx]
    w = (x_arr - x0) / (nodes[idx + 1] - x0)
    out = values[idx] + w * (values[idx + 1] - values[idx])
    if np.isscalar(x) or x_arr.ndim == 0:
        return float(out)
    return out


def bilinear_interp(grid_s: Grid1D, grid_h: Grid1D, values: np.ndarray, s, h):
    """Tensor-product linear interpolation of values[i, j] = f(s_i, h_j),
    linear extrapolation outside either grid.  s, h broadcast together."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid_s.size, grid_h.size):
        raise InvalidArgumentError(
            f"values shape {values.shape} does not match grids "
            f"({grid_s.size}, {grid_h.size})"
        )
    s_arr = np.asarray(s, dtype=float)
    h_arr = np.asarray(h, dtype=float)
    si = np.clip(np.searchsorted(grid_s.nodes, s_arr, side="right") - 1, 0, grid_s.size - 2)
    hi = np.clip(np.searchsorted(grid_h.nodes, h_arr, side="right") - 1, 0, grid_h.size - 2)
    s0 = grid_s.nodes[si]
    h0 = grid_h.nodes[hi]
    u = (s_arr - s0) / (grid_s.nodes[si + 1] - s0)
    t = (h_arr - h0) / (grid_h.nodes[hi + 1] - h0)
    v00 = values[si, hi]
    v10 = values[si + 1, hi]
    v01 = values[si, hi + 1]
    v11 = values[si + 1, hi + 1]
    out = (1 - u) * (1 - t) * v00 + u * (1 - t) * v10 + (1 - u) * t * v01 + u * t * v11
    if np.isscalar(s) and np.isscalar(h):
        return float(out)
    return out
