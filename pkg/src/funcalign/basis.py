"""Clamped B-spline bases on [0, 1] and the first-order random-walk penalty.

Evaluation uses the Cox-de Boor triangular recursion restricted to the
``degree + 1`` functions that are non-zero on the knot span containing each
point. The local form (span index plus the non-zero values) is what the
sampler's kernels consume; :func:`eval_design` scatters it into a dense
design matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import ConfigurationError, DomainError

DEGREE = 3

# tolerance for accepting evaluation points that round just outside [0, 1]
_DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class SplineBasis:
    """Clamped B-spline basis with uniformly spaced interior knots."""

    degree: int
    knots: np.ndarray
    dim: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        if self.dim != knots.size - self.degree - 1:
            raise ConfigurationError("dim must equal len(knots) - degree - 1")

    def __call__(self, t):
        return eval_design(self, t)


def make_basis(dim, degree=DEGREE):
    """Clamped basis of ``dim`` functions on [0, 1] with uniform interior knots."""
    dim = int(dim)
    degree = int(degree)
    if degree < 0:
        raise ConfigurationError(f"degree must be nonnegative, got {degree}")
    if dim < degree + 1:
        raise ConfigurationError(
            f"a degree-{degree} basis needs at least {degree + 1} functions, got {dim}"
        )
    n_interior = dim - degree - 1
    interior = np.arange(1, n_interior + 1) / (n_interior + 1)
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    return SplineBasis(degree=degree, knots=knots, dim=dim)


@nb.njit(cache=True)
def _find_span(knots, degree, dim, x):
    # last span is closed on the right so that x == 1 maps to dim - 1
    if x >= knots[dim]:
        return dim - 1
    lo = degree
    hi = dim
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if x < knots[mid]:
            hi = mid
        else:
            lo = mid
    return lo


@nb.njit(cache=True)
def _span_values(knots, degree, span, x, out, left, right):
    out[0] = 1.0
    for j in range(1, degree + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            temp = out[r] / (right[r + 1] + left[j - r])
            out[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        out[j] = saved


@nb.njit(cache=True)
def _local_basis(knots, degree, dim, x):
    n = x.size
    spans = np.empty(n, dtype=np.int64)
    vals = np.empty((n, degree + 1))
    left = np.empty(degree + 1)
    right = np.empty(degree + 1)
    for i in range(n):
        s = _find_span(knots, degree, dim, x[i])
        spans[i] = s
        _span_values(knots, degree, s, x[i], vals[i], left, right)
    return spans, vals


def _check_domain(t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.size and (
        not np.all(np.isfinite(t))
        or t.min() < -_DOMAIN_TOL
        or t.max() > 1.0 + _DOMAIN_TOL
    ):
        raise DomainError("evaluation points must lie in [0, 1]")
    return np.clip(t, 0.0, 1.0)


def local_basis(basis, t):
    """Return ``(spans, values)``: the non-zero basis values at each point.

    ``values[i, r]`` is basis function ``spans[i] - degree + r`` at ``t[i]``.
    """
    t = _check_domain(t)
    return _local_basis(basis.knots, basis.degree, basis.dim, np.ascontiguousarray(t))


def eval_design(basis, times):
    """Dense design matrix, one row of all basis functions per time point."""
    times = _check_domain(times)
    spans, vals = _local_basis(basis.knots, basis.degree, basis.dim, times)
    design = np.zeros((times.size, basis.dim))
    cols = spans[:, None] - basis.degree + np.arange(basis.degree + 1)
    np.put_along_axis(design, cols, vals, axis=1)
    return design


def greville_abscissae(basis):
    """Knot averages; used as coefficients they reproduce h(t) = t."""
    d = basis.degree
    if d == 0:
        return 0.5 * (basis.knots[:-1] + basis.knots[1:])
    windows = np.lib.stride_tricks.sliding_window_view(basis.knots[1:-1], d)
    return windows.mean(axis=1)


def penalty_matrix(p):
    """Precision (up to 1/lambda) of a first-order random walk started at zero.

    Tridiagonal with 2 on the diagonal except the last entry, which is 1,
    and -1 on both off-diagonals, so that ``b @ omega @ b`` equals
    ``sum_j (b_j - b_{j-1})**2`` with ``b_0 = 0``.
    """
    p = int(p)
    if p < 2:
        raise ConfigurationError(f"penalty matrix needs p >= 2, got {p}")
    omega = 2.0 * np.eye(p) - np.eye(p, k=1) - np.eye(p, k=-1)
    omega[-1, -1] = 1.0
    return omega
