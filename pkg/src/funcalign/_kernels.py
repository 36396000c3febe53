"""Compiled loops over ragged, concatenated curves.

Curves are stored back to back in flat arrays; curve ``c`` occupies
``offsets[c]:offsets[c + 1]``. Coefficient arguments carry one row per curve.
"""

import numba as nb
import numpy as np

from .basis import _find_span, _span_values


@nb.njit(cache=True)
def _dot_local(knots, degree, dim, x, row, vals, left, right):
    s = _find_span(knots, degree, dim, x)
    _span_values(knots, degree, s, x, vals, left, right)
    acc = 0.0
    for r in range(degree + 1):
        acc += vals[r] * row[s - degree + r]
    return acc


@nb.njit(cache=True, inline="always")
def _cubic_dot(knots, dim, x, row):
    # de Boor triangle for degree 3, unrolled
    s = _find_span(knots, 3, dim, x)
    l1 = x - knots[s]
    l2 = x - knots[s - 1]
    l3 = x - knots[s - 2]
    r1 = knots[s + 1] - x
    r2 = knots[s + 2] - x
    r3 = knots[s + 3] - x
    t = 1.0 / (r1 + l1)
    n0 = r1 * t
    n1 = l1 * t
    t = n0 / (r1 + l2)
    m0 = r1 * t
    sv = l2 * t
    t = n1 / (r2 + l1)
    m1 = sv + r2 * t
    m2 = l1 * t
    t = m0 / (r1 + l3)
    v0 = r1 * t
    sv = l3 * t
    t = m1 / (r2 + l2)
    v1 = sv + r2 * t
    sv = l2 * t
    t = m2 / (r3 + l1)
    v2 = sv + r3 * t
    v3 = l1 * t
    return v0 * row[s - 3] + v1 * row[s - 2] + v2 * row[s - 1] + v3 * row[s]


@nb.njit(cache=True)
def warp_times(t, offsets, phi, knots, degree, dim):
    out = np.empty(t.size)
    vals = np.empty(degree + 1)
    left = np.empty(degree + 1)
    right = np.empty(degree + 1)
    for c in range(offsets.size - 1):
        row = phi[c]
        for n in range(offsets[c], offsets[c + 1]):
            acc = _dot_local(knots, degree, dim, t[n], row, vals, left, right)
            out[n] = min(max(acc, 0.0), 1.0)
    return out


@nb.njit(cache=True)
def spline_rows(x, offsets, coef, knots, degree, dim):
    out = np.empty(x.size)
    vals = np.empty(degree + 1)
    left = np.empty(degree + 1)
    right = np.empty(degree + 1)
    for c in range(offsets.size - 1):
        row = coef[c]
        for n in range(offsets[c], offsets[c + 1]):
            out[n] = _dot_local(knots, degree, dim, x[n], row, vals, left, right)
    return out


@nb.njit(cache=True)
def sse_by_curve(y, fit, offsets):
    out = np.zeros(offsets.size - 1)
    for c in range(offsets.size - 1):
        acc = 0.0
        for n in range(offsets[c], offsets[c + 1]):
            d = y[n] - fit[n]
            acc += d * d
        out[c] = acc
    return out


@nb.njit(cache=True)
def warped_sse(t, y, offsets, phi, knots_h, dim_h, coef1, knots1, dim1, coef2, knots2, dim2,
               scale, shift):
    """Per-curve SSE of ``y`` against ``scale*(f1 + f2) + shift`` on warped times.

    Cubic bases only. ``f1``/``f2`` are splines with per-curve coefficient
    rows; pass a zero-width ``coef2`` to drop the second term.
    """
    out = np.zeros(offsets.size - 1)
    use2 = coef2.shape[1] > 0
    for c in range(offsets.size - 1):
        ph = phi[c]
        row1 = coef1[c]
        row2 = coef2[c]
        sc = scale[c]
        sh = shift[c]
        acc = 0.0
        for n in range(offsets[c], offsets[c + 1]):
            x = _cubic_dot(knots_h, dim_h, t[n], ph)
            x = min(max(x, 0.0), 1.0)
            f = _cubic_dot(knots1, dim1, x, row1)
            if use2:
                f += _cubic_dot(knots2, dim2, x, row2)
            d = y[n] - (sc * f + sh)
            acc += d * d
        out[c] = acc
    return out


@nb.njit(cache=True)
def warped_sse_generic(t, y, offsets, phi, knots_h, deg_h, dim_h, coef1, knots1, deg1, dim1,
                       coef2, knots2, deg2, dim2, scale, shift):
    """Same as ``warped_sse`` for bases of any degree."""
    top = max(deg_h, max(deg1, deg2)) + 1
    vals = np.empty(top)
    left = np.empty(top)
    right = np.empty(top)
    out = np.zeros(offsets.size - 1)
    use2 = coef2.shape[1] > 0
    for c in range(offsets.size - 1):
        acc = 0.0
        for n in range(offsets[c], offsets[c + 1]):
            x = _dot_local(knots_h, deg_h, dim_h, t[n], phi[c], vals, left, right)
            x = min(max(x, 0.0), 1.0)
            f = _dot_local(knots1, deg1, dim1, x, coef1[c], vals, left, right)
            if use2:
                f += _dot_local(knots2, deg2, dim2, x, coef2[c], vals, left, right)
            d = y[n] - (scale[c] * f + shift[c])
            acc += d * d
        out[c] = acc
    return out


def curve_sse(t, y, offsets, phi, basis_h, coef1, basis1, coef2, basis2, scale, shift):
    """Dispatch to the unrolled cubic kernel when every basis is cubic.

    ``basis2=None`` drops the second spline term.
    """
    if basis2 is None:
        coef2, basis2 = np.empty((coef1.shape[0], 0)), basis1
    if basis_h.degree == basis1.degree == basis2.degree == 3:
        return warped_sse(t, y, offsets, phi, basis_h.knots, basis_h.dim, coef1, basis1.knots,
                          basis1.dim, coef2, basis2.knots, basis2.dim, scale, shift)
    return warped_sse_generic(t, y, offsets, phi, basis_h.knots, basis_h.degree, basis_h.dim,
                              coef1, basis1.knots, basis1.degree, basis1.dim, coef2, basis2.knots,
                              basis2.degree, basis2.dim, scale, shift)
