"""Normalized-gamma warping prior and monotone spline time transformations.

A warp for one curve is ``h(t) = B_h(t) @ phi`` where ``phi`` is built from
nonnegative latents ``xi`` (``xi[0] = 0``) by cumulative normalization.
Positive latents give strictly increasing coefficients with ``phi[0] = 0``
and ``phi[-1] = 1``, which makes ``h`` a strictly increasing map of [0, 1]
onto itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import eval_design, greville_abscissae
from .errors import (
    ConfigurationError,
    DegenerateInputError,
    DomainError,
    InvariantViolationError,
)

DEFAULT_RATE = 2.5

INVERT_MAX_ITER = 200


@dataclass(frozen=True)
class WarpHyper:
    """Gamma shapes ``a`` for latents 2..q and the common rate ``b``."""

    a: np.ndarray
    b: float = DEFAULT_RATE

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        if a.size < 1:
            raise ConfigurationError("need at least one warping shape (q >= 2)")
        if not np.all(a > 0) or not np.all(np.isfinite(a)):
            raise ConfigurationError("warping shapes must be positive and finite")
        if not (np.isfinite(self.b) and self.b > 0):
            raise ConfigurationError("warping rate must be positive")

    @property
    def q(self):
        return self.a.size + 1

    def beta_params(self):
        """Shape pairs of the Beta marginals of phi_2 .. phi_{q-1}."""
        csum = np.cumsum(self.a)
        alpha1 = csum[:-1]
        alpha2 = csum[-1] - alpha1
        return alpha1, alpha2


def check_phi(phi):
    """Raise unless every row of ``phi`` is strictly increasing from 0 to 1."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] < 2:
        raise InvariantViolationError("warping coefficients need length >= 2")
    if np.any(phi[..., 0] != 0.0) or np.any(phi[..., -1] != 1.0):
        raise InvariantViolationError("warping coefficients must start at 0 and end at 1")
    if np.any(np.diff(phi, axis=-1) <= 0.0):
        raise InvariantViolationError("warping coefficients must be strictly increasing")
    return phi


def xi_to_phi(xi):
    """Cumulative normalization of latents; works row-wise on stacked input."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] < 2:
        raise ConfigurationError("latent vector needs length >= 2")
    if np.any(xi[..., 0] != 0.0):
        raise InvariantViolationError("first latent must be exactly zero")
    if np.any(xi[..., 1:] <= 0.0):
        raise InvariantViolationError("latents 2..q must be strictly positive")
    csum = np.cumsum(xi, axis=-1)
    total = csum[..., -1:]
    if np.any(~np.isfinite(total)) or np.any(total <= 0.0):
        raise DegenerateInputError("latent total must be positive and finite")
    phi = csum / total
    phi[..., -1] = 1.0
    return check_phi(phi)


def sample_gamma(shape, rate, rng, size=None):
    """Gamma(shape, rate) draws; shapes below one use the boost-by-one identity.

    For ``a < 1``, ``G(a) = G(a + 1) * U**(1/a)``; computing the product in
    log space keeps very small draws representable as positive floats.
    """
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    out_shape = np.broadcast_shapes(shape.shape, rate.shape) if size is None else size
    shape = np.broadcast_to(shape, out_shape)
    rate = np.broadcast_to(rate, out_shape)
    small = shape < 1.0
    boosted = np.where(small, shape + 1.0, shape)
    draws = rng.standard_gamma(boosted)
    if np.any(small):
        u = rng.random(out_shape)
        log_draw = np.log(draws) + np.log(u) / shape
        draws = np.where(small, np.exp(log_draw), draws)
        # an underflow to 0 would break strict monotonicity
        draws = np.where(draws > 0.0, draws, np.finfo(float).tiny)
    return draws / rate


def sample_prior_warp(hyper, rng, size=None):
    """Draw ``(xi, phi)`` from the normalized-gamma prior.

    With ``size=None`` a single length-q pair is returned; otherwise arrays
    with leading shape ``size``.
    """
    lead = () if size is None else tuple(np.atleast_1d(size))
    body = sample_gamma(hyper.a, hyper.b, rng, size=lead + (hyper.q - 1,))
    xi = np.concatenate([np.zeros(lead + (1,)), body], axis=-1)
    return xi, xi_to_phi(xi)


def prior_moments_phi(hyper):
    """Closed-form mean vector and covariance matrix of ``phi``."""
    a = hyper.a
    total = a.sum()
    q = hyper.q
    head = np.concatenate([[0.0], np.cumsum(a)])  # sum_{k<=j} a_k, j = 1..q
    mean = head / total
    mean[0], mean[-1] = 0.0, 1.0
    tail = total - head
    lo = np.minimum.outer(np.arange(q), np.arange(q))
    hi = np.maximum.outer(np.arange(q), np.arange(q))
    cov = head[lo] * tail[hi] / ((total + 1.0) * total**2)
    cov[0, :] = cov[:, 0] = 0.0
    cov[-1, :] = cov[:, -1] = 0.0
    return mean, cov


def elicit_identity(basis_h, concentration, b=DEFAULT_RATE):
    """Shapes whose prior mean warp is the identity, scaled to sum to ``concentration``."""
    if not concentration > 0:
        raise ConfigurationError("concentration must be positive")
    gaps = np.diff(greville_abscissae(basis_h))
    return WarpHyper(a=concentration * gaps, b=b)


def warp_eval(phi, basis_h, t):
    """Evaluate ``h(t) = B_h(t) @ phi``; endpoints are pinned to 0 and 1."""
    phi = check_phi(phi)
    t = np.asarray(t, dtype=float)
    h = eval_design(basis_h, t) @ phi
    h = np.clip(h, 0.0, 1.0)
    flat = np.atleast_1d(t)
    h = np.atleast_1d(h)
    h[flat <= 0.0] = 0.0
    h[flat >= 1.0] = 1.0
    return h.reshape(t.shape) if t.ndim else h[0]


def warp_invert(phi, basis_h, s):
    """Solve ``h(t) = s`` for each ``s`` by bisection on the monotone warp."""
    try:
        phi = check_phi(phi)
    except InvariantViolationError as exc:
        raise InvariantViolationError(f"cannot invert: {exc}") from None
    s = np.asarray(s, dtype=float)
    flat = np.atleast_1d(s).ravel()
    if flat.size and (flat.min() < 0.0 or flat.max() > 1.0):
        raise DomainError("inversion targets must lie in [0, 1]")
    lo = np.zeros_like(flat)
    hi = np.ones_like(flat)
    for _ in range(INVERT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        val = eval_design(basis_h, mid) @ phi
        below = val < flat
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo < 1e-15):
            break
    out = 0.5 * (lo + hi)
    out[flat <= 0.0] = 0.0
    out[flat >= 1.0] = 1.0
    return out.reshape(s.shape) if s.ndim else out[0]


def denormalize_phi(phi, t0, tf):
    """Map coefficients from [0, 1] to [t0, tf]."""
    if not t0 < tf:
        raise ConfigurationError("need t0 < tf")
    return t0 + np.asarray(phi, dtype=float) * (tf - t0)


def normalize_phi(phi_prime, t0, tf):
    """Inverse of :func:`denormalize_phi`."""
    if not t0 < tf:
        raise ConfigurationError("need t0 < tf")
    return (np.asarray(phi_prime, dtype=float) - t0) / (tf - t0)
