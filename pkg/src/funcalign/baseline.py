"""Common-shape registration model used as the comparator.

Every curve is a scaled and shifted copy of one spline shape on its own
warped clock:

    y_i(t) = a_i * B_beta(h_i(t)) @ beta + c_i + noise

with ``a_i ~ N(a0, sigma2_a)``, ``c_i ~ N(c0, sigma2_c)``, normal priors on
``a0`` and ``c0``, a random walk on ``beta`` pinned at ``beta[0] = 0`` and the same
normalized-gamma warps as the main model. All blocks except the warp
latents are conjugate; the latents reuse the main sampler's MH step.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .basis import eval_design, penalty_matrix
from .errors import ConfigurationError
from .model import Curve, FunctionalDataset
from .sampler import (
    AdaptState,
    _hyper_dict,
    drive_chain,
    gaussian_from_precision,
    mh_xi_step,
    sample_inv_gamma,
)
from .simulate import Truth, WarpGrid, generate_warps, rw1_path, _identity_warps
from .warping import WarpHyper, warp_eval, xi_to_phi


@dataclass(frozen=True)
class BaselineHyper:
    a_lambda: float
    b_lambda: float
    a_eps: float
    b_eps: float
    a_a: float
    b_a: float
    a_c: float
    b_c: float
    m_a0: float
    s2_a0: float
    m_c0: float
    s2_c0: float
    warp: WarpHyper

    def __post_init__(self):
        for name in ("a_lambda", "b_lambda", "a_eps", "b_eps", "a_a", "b_a", "a_c", "b_c",
                     "s2_a0", "s2_c0"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")


@dataclass
class BaselineState:
    beta: np.ndarray
    a: np.ndarray
    c: np.ndarray
    a0: float
    c0: float
    sigma2_a: float
    sigma2_c: float
    lam: float
    sigma2_eps: float
    xi: np.ndarray
    phi: np.ndarray

    def copy(self):
        return BaselineState(self.beta.copy(), self.a.copy(), self.c.copy(), self.a0, self.c0,
                             self.sigma2_a, self.sigma2_c, self.lam, self.sigma2_eps,
                             self.xi.copy(), self.phi.copy())


def baseline_generate(params, n_curves, n_obs, rng, q=10, grid=WarpGrid(), warp=True,
                      noise=True):
    """Simulate warped, noisy curves from the common-shape model.

    ``params`` holds ``c0, sigma_c, a0, sigma_a, lam, sigma_eps, p``; the
    ``sigma_*`` entries are standard deviations and ``lam`` the random-walk
    increment variance. The shape coefficients start at exactly zero.
    """
    from .basis import make_basis

    p = int(params["p"])
    basis_b, basis_h = make_basis(p), make_basis(q)
    t = np.linspace(0.0, 1.0, n_obs)
    beta = rw1_path(p, params["lam"], rng, start_at_zero=True)
    a = rng.normal(params["a0"], params["sigma_a"], size=n_curves)
    c = rng.normal(params["c0"], params["sigma_c"], size=n_curves)
    xi, phi = generate_warps(n_curves, q, grid, rng) if warp else _identity_warps(n_curves, basis_h)
    shape = eval_design(basis_b, t) @ beta
    curves, truth_curves = [], []
    for i in range(n_curves):
        truth_curves.append(a[i] * shape + c[i])
        x = warp_eval(phi[i], basis_h, t)
        y = a[i] * (eval_design(basis_b, x) @ beta) + c[i]
        if noise:
            y = y + rng.normal(0.0, params["sigma_eps"], size=n_obs)
        curves.append(Curve(t, y))
    truth = Truth(times=[t] * n_curves, curves=truth_curves, xi=xi, phi=phi, q=q,
                  params=dict(setting=2, beta=beta, a=a, c=c, **params))
    return FunctionalDataset([curves]), truth


def initial_baseline_state(dataset, bases, hyper):
    flat = dataset.flat
    N = dataset.n_curves
    xi = np.tile(np.concatenate([[0.0], hyper.warp.a / hyper.warp.b]), (N, 1))
    phi = xi_to_phi(xi)
    lengths = np.diff(flat.offsets)
    c = np.array([flat.y[flat.offsets[i]:flat.offsets[i + 1]].mean() for i in range(N)])
    X = eval_design(bases.beta, flat.t)
    centred = flat.y - np.repeat(c, lengths)
    free = X[:, 1:]
    beta = np.concatenate([[0.0], np.linalg.solve(free.T @ free + 1e-6 * np.eye(bases.p - 1),
                                                  free.T @ centred)])
    resid = centred - X @ beta
    s2 = max(float(np.var(resid)), 1e-8)
    lam = hyper.b_lambda / max(hyper.a_lambda - 1.0, 1.0)
    return BaselineState(beta, np.ones(N), c, 1.0, float(c.mean()),
                         max(float(hyper.b_a / max(hyper.a_a - 1, 1)), 1e-4),
                         max(float(np.var(c)), 1e-4), lam, s2, xi, phi)


def _baseline_sse_fn(state, dataset, bases):
    flat = dataset.flat
    o = flat.offsets
    lengths = np.diff(o)
    all_curves = np.arange(o.size - 1)
    t_of = [flat.t[o[i]:o[i + 1]] for i in all_curves]
    y_of = [flat.y[o[i]:o[i + 1]] for i in all_curves]

    def sse(phi_rows, cs):
        if cs.size == all_curves.size and np.array_equal(cs, all_curves):
            t, y, offs = flat.t, flat.y, o
        else:
            t = np.concatenate([t_of[i] for i in cs])
            y = np.concatenate([y_of[i] for i in cs])
            offs = np.concatenate([[0], np.cumsum(lengths[cs])]).astype(np.int64)
        rows = np.ascontiguousarray(np.broadcast_to(state.beta, (cs.size, state.beta.size)))
        return _kernels.curve_sse(t, y, offs, np.ascontiguousarray(phi_rows), bases.h, rows,
                                  bases.beta, None, None, state.a[cs], state.c[cs])

    return sse


def baseline_sweep(state, dataset, bases, hyper, adapt, rng, omega=None, fixed=()):
    """One Gibbs scan of the common-shape model; ``fixed`` names blocks to hold.

    Order: beta, lambda, a_i, c_i, a0, c0, sigma2_a, sigma2_c, warp latents,
    sigma2_eps.
    """
    omega = penalty_matrix(bases.beta.dim) if omega is None else omega
    flat = dataset.flat
    o = flat.offsets
    N = o.size - 1
    lengths = np.diff(o)
    curve_of = np.repeat(np.arange(N), lengths)
    x = _kernels.warp_times(flat.t, o, state.phi, bases.h.knots, bases.h.degree, bases.h.dim)
    X = eval_design(bases.beta, x)
    s2 = state.sigma2_eps

    if "beta" not in fixed:
        # beta[0] is pinned at zero, so only the trailing block is free
        Xa = X[:, 1:] * state.a[curve_of][:, None]
        precision = omega[1:, 1:] / state.lam + Xa.T @ Xa / s2
        linear = Xa.T @ (flat.y - state.c[curve_of]) / s2
        state.beta = np.concatenate([[0.0], gaussian_from_precision(precision, linear).sample(rng)])
    if "lambda" not in fixed:
        quad = float(state.beta @ omega @ state.beta)
        state.lam = sample_inv_gamma(hyper.a_lambda + (state.beta.size - 1) / 2,
                                     hyper.b_lambda + 0.5 * quad, rng)

    f = X @ state.beta
    if "a" not in fixed:
        ff = np.bincount(curve_of, weights=f * f, minlength=N)
        fy = np.bincount(curve_of, weights=f * (flat.y - state.c[curve_of]), minlength=N)
        prec = 1.0 / state.sigma2_a + ff / s2
        mean = (state.a0 / state.sigma2_a + fy / s2) / prec
        state.a = mean + rng.standard_normal(N) / np.sqrt(prec)
    if "c" not in fixed:
        ry = np.bincount(curve_of, weights=flat.y - state.a[curve_of] * f, minlength=N)
        prec = 1.0 / state.sigma2_c + lengths / s2
        mean = (state.c0 / state.sigma2_c + ry / s2) / prec
        state.c = mean + rng.standard_normal(N) / np.sqrt(prec)
    if "a0" not in fixed:
        prec = 1.0 / hyper.s2_a0 + N / state.sigma2_a
        mean = (hyper.m_a0 / hyper.s2_a0 + state.a.sum() / state.sigma2_a) / prec
        state.a0 = mean + rng.standard_normal() / np.sqrt(prec)
    if "c0" not in fixed:
        prec = 1.0 / hyper.s2_c0 + N / state.sigma2_c
        mean = (hyper.m_c0 / hyper.s2_c0 + state.c.sum() / state.sigma2_c) / prec
        state.c0 = mean + rng.standard_normal() / np.sqrt(prec)
    if "sigma2_a" not in fixed:
        state.sigma2_a = sample_inv_gamma(hyper.a_a + N / 2,
                                          hyper.b_a + 0.5 * np.sum((state.a - state.a0) ** 2), rng)
    if "sigma2_c" not in fixed:
        state.sigma2_c = sample_inv_gamma(hyper.a_c + N / 2,
                                          hyper.b_c + 0.5 * np.sum((state.c - state.c0) ** 2), rng)

    sse_fn = _baseline_sse_fn(state, dataset, bases)
    cs = np.arange(N)
    sse = sse_fn(state.phi, cs)
    if "xi" not in fixed:
        for j in range(1, bases.h.dim):
            sse, _ = mh_xi_step(state, j, cs, sse, sse_fn, hyper.warp, adapt, rng)
    adapt.step_count += 1
    if "sigma2_eps" not in fixed:
        state.sigma2_eps = sample_inv_gamma(hyper.a_eps + flat.y.size / 2,
                                            hyper.b_eps + 0.5 * float(sse.sum()), rng)
    return state


def baseline_snapshot(state):
    return {
        "beta": state.beta.copy(),
        "a": state.a.copy(),
        "c": state.c.copy(),
        "a0": state.a0,
        "c0": state.c0,
        "sigma2_a": state.sigma2_a,
        "sigma2_c": state.sigma2_c,
        "lambda": state.lam,
        "sigma2_eps": state.sigma2_eps,
        "xi": state.xi.copy(),
        "phi": state.phi.copy(),
    }


def baseline_fit(dataset, hyper, bases, config, init=None, partial_path=None, progress=None):
    """Posterior sampling for the common-shape model on a single-group dataset."""
    if dataset.G != 1:
        raise ConfigurationError("the common-shape model has no group term; fit groups separately")
    if tuple(hyper.warp.a.shape) != (bases.h.dim - 1,):
        raise ConfigurationError("warp hyperparameter length must equal q - 1")
    rng = np.random.default_rng(config.seed)
    state = initial_baseline_state(dataset, bases, hyper) if init is None else init.copy()
    omega = penalty_matrix(bases.beta.dim)
    adapt = AdaptState.create(dataset.n_curves, bases.h.dim, config)

    def sweep(s):
        baseline_sweep(s, dataset, bases, hyper, adapt, rng, omega=omega)

    meta = {
        "seed": config.seed,
        "config": asdict(config),
        "dims": {"p": bases.beta.dim, "q": bases.h.dim},
        "group_sizes": list(dataset.group_sizes),
        "hyper": _hyper_dict(hyper),
    }
    return drive_chain(state, sweep, config, adapt, "baseline", meta, baseline_snapshot,
                       partial_path=partial_path, progress=progress)
