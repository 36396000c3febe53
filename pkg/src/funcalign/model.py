"""Data containers, the smoothing model and the curve likelihood.

Each observed curve is modelled as

    y_gi(t) = m_gi(h_gi(t)) + noise,   m_gi(t) = B_beta(t) @ beta_g + B_gamma(t) @ gamma_gi

with a group-level spline, an individual spline and a curve-specific warp.
Per-curve parameters live in flat arrays ordered group by group, the same
order as :meth:`FunctionalDataset.curves`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import _kernels
from .basis import DEGREE, SplineBasis, eval_design, make_basis
from .errors import (
    ConfigurationError,
    DegenerateInputError,
    InvariantViolationError,
)
from .warping import WarpHyper, elicit_identity, warp_eval, warp_invert, xi_to_phi


@dataclass(frozen=True)
class Curve:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        y = np.array(self.values, dtype=float)
        t.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", y)
        if t.ndim != 1 or t.shape != y.shape:
            raise ConfigurationError("curve times and values must be 1-d and equally long")

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class FlatData:
    t: np.ndarray
    y: np.ndarray
    offsets: np.ndarray
    group_of: np.ndarray


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """Curves organized as ``groups[g][i]`` on the time domain ``[t0, tf]``.

    ``source_domain`` remembers the original domain after
    :func:`normalize_time`, so outputs can be mapped back.
    """

    groups: tuple
    t0: float = 0.0
    tf: float = 1.0
    source_domain: tuple | None = None
    names: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        groups = tuple(tuple(c if isinstance(c, Curve) else Curve(*c) for c in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if len(groups) < 1:
            raise ConfigurationError("dataset needs at least one group")
        if not self.t0 < self.tf:
            raise DegenerateInputError(f"empty time domain [{self.t0}, {self.tf}]")
        for g, grp in enumerate(groups):
            for i, c in enumerate(grp):
                where = f"curve {self.curve_name(g, i)}"
                if len(c) < 2:
                    raise DegenerateInputError(f"{where} has fewer than 2 observations")
                if np.any(np.diff(c.times) <= 0):
                    raise ConfigurationError(f"{where}: times must be strictly increasing")
                if c.times[0] < self.t0 or c.times[-1] > self.tf:
                    raise ConfigurationError(f"{where}: times outside [{self.t0}, {self.tf}]")

    def curve_name(self, g, i):
        if self.names is not None:
            return self.names[g][i]
        return f"({g}, {i})"

    @property
    def G(self):
        return len(self.groups)

    @property
    def group_sizes(self):
        return tuple(len(g) for g in self.groups)

    @property
    def n_curves(self):
        return sum(self.group_sizes)

    @property
    def n_obs(self):
        return sum(len(c) for _, _, c in self.curves())

    def curves(self):
        for g, grp in enumerate(self.groups):
            for i, c in enumerate(grp):
                yield g, i, c

    def index(self, g, i):
        return sum(self.group_sizes[:g]) + i

    @cached_property
    def flat(self):
        curves = [c for _, _, c in self.curves()]
        lengths = [len(c) for c in curves]
        offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        group_of = np.repeat(np.arange(self.G), self.group_sizes).astype(np.int64)
        t = np.concatenate([c.times for c in curves]) if curves else np.empty(0)
        y = np.concatenate([c.values for c in curves]) if curves else np.empty(0)
        return FlatData(t=t, y=y, offsets=offsets, group_of=group_of)

    def subset(self, group_ids):
        """Dataset restricted to the listed groups (domain kept)."""
        names = None if self.names is None else tuple(self.names[g] for g in group_ids)
        return replace(self, groups=tuple(self.groups[g] for g in group_ids), names=names)


def normalize_time(dataset):
    """Map every time point affinely from ``[t0, tf]`` onto [0, 1]."""
    t0, tf = dataset.t0, dataset.tf
    if not tf > t0:
        raise DegenerateInputError("t0 must differ from tf")
    if (t0, tf) == (0.0, 1.0):
        return dataset
    scale = tf - t0
    groups = tuple(
        tuple(Curve((c.times - t0) / scale, c.values) for c in grp) for grp in dataset.groups
    )
    source = dataset.source_domain or (t0, tf)
    return FunctionalDataset(groups, 0.0, 1.0, source_domain=source, names=dataset.names)


def denormalize_time(t, domain):
    t0, tf = domain
    return t0 + np.asarray(t, dtype=float) * (tf - t0)


@dataclass(frozen=True)
class Bases:
    beta: SplineBasis
    gamma: SplineBasis
    h: SplineBasis

    @property
    def p(self):
        return self.beta.dim

    @property
    def k(self):
        return self.gamma.dim

    @property
    def q(self):
        return self.h.dim


def make_bases(p, k, q, degree=DEGREE):
    return Bases(make_basis(p, degree), make_basis(k, degree), make_basis(q, degree))


@dataclass(frozen=True)
class Hyperparams:
    """Inverse-gamma hyperparameters of the variance components plus the warp prior."""

    a_lambda: float
    b_lambda: float
    a_gamma: float
    b_gamma: float
    a_eps: float
    b_eps: float
    warp: WarpHyper

    def __post_init__(self):
        for name in ("a_lambda", "b_lambda", "a_gamma", "b_gamma", "a_eps", "b_eps"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be positive, got {v}")

    @classmethod
    def knee_defaults(cls, basis_h, concentration=None):
        """Values used for the knee-flexion analysis; identity-mean warp prior."""
        conc = 10.0 * (basis_h.dim - 1) if concentration is None else concentration
        return cls(1200.0, 3500.0, 1000.0, 2000.0, 3000.0, 5000.0,
                   elicit_identity(basis_h, conc, b=2.5))


@dataclass
class ModelState:
    """One MCMC state. Per-curve arrays are indexed by flat curve position."""

    beta: np.ndarray  # (G, p)
    gamma: np.ndarray  # (N, k)
    xi: np.ndarray  # (N, q)
    phi: np.ndarray  # (N, q)
    lam: float
    sigma2_gamma: float
    sigma2_eps: float
    group_sizes: tuple

    def __post_init__(self):
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        self.xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        self.phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        self.group_sizes = tuple(int(n) for n in self.group_sizes)

    def index(self, g, i):
        return sum(self.group_sizes[:g]) + i

    @property
    def group_of(self):
        return np.repeat(np.arange(len(self.group_sizes)), self.group_sizes)

    def copy(self):
        return ModelState(self.beta.copy(), self.gamma.copy(), self.xi.copy(), self.phi.copy(),
                          self.lam, self.sigma2_gamma, self.sigma2_eps, self.group_sizes)

    def validate(self):
        for name in ("lam", "sigma2_gamma", "sigma2_eps"):
            if not getattr(self, name) > 0:
                raise InvariantViolationError(f"{name} must be positive")
        if not np.array_equal(xi_to_phi(self.xi), self.phi):
            raise InvariantViolationError("phi is out of sync with xi")


def initial_state(dataset, bases, hyper, rng=None):
    """Identity warps at the prior mean latents, least-squares group curves.

    Latents are set to the prior mean ``a_j / b`` so that ``phi`` starts at the
    prior mean (the identity under an identity-elicited prior).
    """
    G, N = dataset.G, dataset.n_curves
    xi = np.concatenate([[0.0], hyper.warp.a / hyper.warp.b])
    xi = np.tile(xi, (N, 1))
    phi = xi_to_phi(xi)
    flat = dataset.flat
    beta = np.zeros((G, bases.p))
    omega_ridge = 1e-6 * np.eye(bases.p)
    for g in range(G):
        sel = np.concatenate([np.arange(flat.offsets[c], flat.offsets[c + 1])
                              for c in np.flatnonzero(flat.group_of == g)] or [np.empty(0, int)])
        if sel.size == 0:
            continue
        X = eval_design(bases.beta, flat.t[sel])
        beta[g] = np.linalg.solve(X.T @ X + omega_ridge, X.T @ flat.y[sel])
    resid = flat.y - _kernels.spline_rows(flat.t, flat.offsets, beta[flat.group_of],
                                          bases.beta.knots, bases.beta.degree, bases.p)
    s2 = max(float(np.var(resid)), 1e-8) if resid.size else 1.0
    lam = hyper.b_lambda / max(hyper.a_lambda - 1.0, 1.0)
    sg = hyper.b_gamma / max(hyper.a_gamma - 1.0, 1.0)
    return ModelState(beta, np.zeros((N, bases.k)), xi, phi, lam, sg, s2, dataset.group_sizes)


def smooth_eval(beta_g, gamma_gi, bases, t):
    """Group spline plus individual spline evaluated at ``t``."""
    beta_g = np.asarray(beta_g, dtype=float)
    gamma_gi = np.asarray(gamma_gi, dtype=float)
    if beta_g.shape != (bases.p,) or gamma_gi.shape != (bases.k,):
        raise ConfigurationError(
            f"coefficient shapes {beta_g.shape}, {gamma_gi.shape} do not match "
            f"basis dims ({bases.p},), ({bases.k},)"
        )
    return eval_design(bases.beta, t) @ beta_g + eval_design(bases.gamma, t) @ gamma_gi


def warped_mean(state, bases, g, i, t):
    """The smooth of curve (g, i) evaluated on its warped clock ``h_gi(t)``."""
    c = state.index(g, i)
    x = warp_eval(state.phi[c], bases.h, t)
    return smooth_eval(state.beta[g], state.gamma[c], bases, x)


def warped_times(state, dataset, bases):
    """``h_gi(t)`` at every observation, concatenated in flat order."""
    flat = dataset.flat
    return _kernels.warp_times(flat.t, flat.offsets, state.phi, bases.h.knots,
                               bases.h.degree, bases.q)


def fitted_values(state, dataset, bases, x=None):
    """Model mean at every observation; ``x`` reuses precomputed warped times."""
    flat = dataset.flat
    if x is None:
        x = warped_times(state, dataset, bases)
    group_part = _kernels.spline_rows(x, flat.offsets, state.beta[flat.group_of],
                                      bases.beta.knots, bases.beta.degree, bases.p)
    indiv_part = _kernels.spline_rows(x, flat.offsets, state.gamma, bases.gamma.knots,
                                      bases.gamma.degree, bases.k)
    return group_part + indiv_part


def residual_ss(state, dataset, bases):
    """Per-curve residual sum of squares against the warped mean."""
    flat = dataset.flat
    return _kernels.sse_by_curve(flat.y, fitted_values(state, dataset, bases), flat.offsets)


def log_likelihood(state, dataset, bases, per_curve=False):
    """Gaussian log-likelihood of all curves given the state."""
    s2 = state.sigma2_eps
    if not s2 > 0:
        raise InvariantViolationError("sigma2_eps must be positive")
    n = np.diff(dataset.flat.offsets)
    ll = -0.5 * n * np.log(2.0 * np.pi * s2) - residual_ss(state, dataset, bases) / (2.0 * s2)
    return ll if per_curve else float(ll.sum())


def register_curve(curve, phi, basis_h, output_grid):
    """Registered curve ``y(h^{-1}(s))`` on ``output_grid`` by linear interpolation."""
    if len(curve) == 0:
        raise DegenerateInputError("cannot register an empty curve")
    u = warp_invert(phi, basis_h, np.asarray(output_grid, dtype=float))
    return np.interp(u, curve.times, curve.values)
