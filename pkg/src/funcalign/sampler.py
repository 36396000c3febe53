"""Gibbs sampler with adaptive Metropolis-Hastings updates of the warp latents.

One sweep updates, in order: every ``beta_g``, ``lambda``, every
``gamma_gi``, ``sigma2_gamma``, every warp latent ``xi_gij`` (j = 2..q) and
``sigma2_eps``. All blocks except the latents have Gaussian or inverse-gamma
full conditionals. Latents move by a log-scale Gaussian random walk whose
per-coordinate scale is tuned by Robbins-Monro during burn-in and frozen
afterwards.

Curves are conditionally independent given the shared parameters, so the
latent update for coordinate ``j`` is carried out for all curves at once;
each curve still has its own proposal, acceptance test and scale.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from . import _kernels
from .basis import eval_design, penalty_matrix
from .chain import Chain
from .errors import ConfigurationError, NumericalError, UsageError
from .model import (
    ModelState,
    fitted_values,
    initial_state,
    register_curve,
    warped_times,
)
from .warping import warp_eval

logger = logging.getLogger(__name__)

JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class SamplerConfig:
    """Run length and adaptation settings.

    The Robbins-Monro step at sweep ``t`` is ``adapt_step / (1 + t / adapt_window) ** 0.6``
    on the log proposal scale.
    """

    n_iter: int = 25000
    burn_in: int = 20000
    thin: int = 1
    seed: int = 0
    adapt_target: float = 0.44
    adapt_window: int = 50
    adapt_step: float = 1.0
    init_log_scale: float = -1.0

    def __post_init__(self):
        if self.n_iter < 1 or self.thin < 1 or self.burn_in < 0:
            raise ConfigurationError("n_iter and thin must be positive, burn_in nonnegative")
        if self.burn_in >= self.n_iter:
            raise ConfigurationError("burn_in must be smaller than n_iter")
        if not 0.0 < self.adapt_target < 1.0:
            raise ConfigurationError("adapt_target must lie in (0, 1)")
        if self.adapt_window < 1:
            raise ConfigurationError("adapt_window must be positive")

    @property
    def n_stored(self):
        return (self.n_iter - self.burn_in) // self.thin


@dataclass
class AdaptState:
    """Per-(curve, coordinate) proposal scales and acceptance bookkeeping.

    Column ``j - 1`` refers to latent ``j`` (latent 0 is fixed at zero).
    """

    log_scale: np.ndarray
    accepted: np.ndarray = None
    proposed: np.ndarray = None
    burn_accepted: np.ndarray = None
    burn_proposed: np.ndarray = None
    nonfinite: int = 0
    adapting: bool = True
    step_count: int = 0
    target: float = 0.44
    window: int = 50
    step: float = 1.0

    def __post_init__(self):
        shape = self.log_scale.shape
        for name in ("accepted", "proposed", "burn_accepted", "burn_proposed"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(shape, dtype=np.int64))

    @classmethod
    def create(cls, n_curves, q, config=None):
        config = config or SamplerConfig(n_iter=2, burn_in=1)
        return cls(np.full((n_curves, q - 1), config.init_log_scale, dtype=float),
                   target=config.adapt_target, window=config.adapt_window, step=config.adapt_step)

    def record(self, cs, j, accept, log_ratio):
        col = j - 1
        if self.adapting:
            self.burn_proposed[cs, col] += 1
            self.burn_accepted[cs, col] += accept
            prob = np.exp(np.minimum(log_ratio, 0.0))
            prob = np.where(np.isfinite(prob), prob, 0.0)
            gain = self.step / (1.0 + self.step_count / self.window) ** 0.6
            self.log_scale[cs, col] += gain * (prob - self.target)
        else:
            self.proposed[cs, col] += 1
            self.accepted[cs, col] += accept

    def rates(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.proposed > 0, self.accepted / np.maximum(self.proposed, 1), np.nan)


@dataclass(frozen=True)
class GaussianConditional:
    """Normal law in precision form; ``chol`` is the lower Cholesky factor of the precision."""

    mean: np.ndarray
    chol: np.ndarray

    @property
    def precision(self):
        return self.chol @ self.chol.T

    @property
    def cov(self):
        inv = linalg.solve_triangular(self.chol, np.eye(self.chol.shape[0]), lower=True)
        return inv.T @ inv

    def sample(self, rng):
        z = rng.standard_normal(self.mean.size)
        return self.mean + linalg.solve_triangular(self.chol.T, z, lower=False)


def gaussian_from_precision(precision, linear):
    """Mean ``P^{-1} linear`` with Cholesky factor of ``P``, escalating jitter on failure."""
    scale = float(np.mean(np.diag(precision))) or 1.0
    for jit in JITTER_LADDER:
        try:
            chol = linalg.cholesky(precision + jit * scale * np.eye(precision.shape[0]),
                                   lower=True, check_finite=True)
        except (linalg.LinAlgError, ValueError):
            continue
        if jit:
            logger.warning("precision needed jitter %.0e to factorize", jit)
        mean = linalg.cho_solve((chol, True), linear)
        return GaussianConditional(mean, chol)
    raise NumericalError("precision matrix is not positive definite even after jitter")


def sample_inv_gamma(shape, rate, rng):
    return rate / rng.standard_gamma(shape)


class _Workspace:
    """Warped designs of the current sweep, rebuilt whenever the warps move."""

    def __init__(self, state, dataset, bases):
        flat = dataset.flat
        self.flat = flat
        self.obs_group = np.repeat(flat.group_of, np.diff(flat.offsets))
        self.x = warped_times(state, dataset, bases)
        self.Xb = eval_design(bases.beta, self.x)
        self.Xg = eval_design(bases.gamma, self.x)
        self.group_rows = [np.flatnonzero(self.obs_group == g) for g in range(len(state.group_sizes))]

    def group_part(self, state):
        return np.einsum("np,np->n", self.Xb, state.beta[self.obs_group])

    def indiv_part(self, state):
        o = self.flat.offsets
        obs_curve = np.repeat(np.arange(o.size - 1), np.diff(o))
        return np.einsum("nk,nk->n", self.Xg, state.gamma[obs_curve])


def _workspace(state, dataset, bases, ws):
    return ws if ws is not None else _Workspace(state, dataset, bases)


def fc_beta(state, dataset, bases, g, hyper=None, omega=None, ws=None):
    """Gaussian full conditional of the group-``g`` coefficients."""
    omega = penalty_matrix(bases.p) if omega is None else omega
    ws = _workspace(state, dataset, bases, ws)
    rows = ws.group_rows[g]
    X = ws.Xb[rows]
    s2 = state.sigma2_eps
    resid = ws.flat.y[rows] - ws.indiv_part(state)[rows]
    precision = omega / state.lam + X.T @ X / s2
    return gaussian_from_precision(precision, X.T @ resid / s2)


def fc_lambda(state, hyper, omega=None):
    """Inverse-gamma ``(shape, rate)`` of the random-walk variance."""
    G, p = state.beta.shape
    omega = penalty_matrix(p) if omega is None else omega
    quad = np.einsum("gi,ij,gj->", state.beta, omega, state.beta)
    return hyper.a_lambda + G * p / 2, hyper.b_lambda + 0.5 * quad


def fc_gamma(state, dataset, bases, g, i, ws=None):
    """Gaussian full conditional of the individual coefficients of curve (g, i)."""
    ws = _workspace(state, dataset, bases, ws)
    c = state.index(g, i)
    lo, hi = ws.flat.offsets[c], ws.flat.offsets[c + 1]
    Z = ws.Xg[lo:hi]
    resid = ws.flat.y[lo:hi] - ws.Xb[lo:hi] @ state.beta[g]
    s2 = state.sigma2_eps
    precision = np.eye(bases.k) / state.sigma2_gamma + Z.T @ Z / s2
    return gaussian_from_precision(precision, Z.T @ resid / s2)


def fc_sigma_gamma(state, hyper):
    N, k = state.gamma.shape
    return hyper.a_gamma + N * k / 2, hyper.b_gamma + 0.5 * float(np.sum(state.gamma**2))


def fc_sigma_eps(state, dataset, bases, hyper, fit=None):
    flat = dataset.flat
    fit = fitted_values(state, dataset, bases) if fit is None else fit
    sse = float(np.sum((flat.y - fit) ** 2))
    return hyper.a_eps + flat.y.size / 2, hyper.b_eps + 0.5 * sse


def _phi_rows(xi):
    """Normalize latents without raising; rows that lose strict order are flagged."""
    csum = np.cumsum(xi, axis=-1)
    phi = csum / csum[..., -1:]
    phi[..., -1] = 1.0
    ok = np.all(np.diff(phi, axis=-1) > 0.0, axis=-1) & np.isfinite(csum[..., -1])
    return phi, ok


def xi_log_ratio(xi_old, xi_new, sse_old, sse_new, sigma2_eps, a_j, b):
    """Log acceptance ratio for a log-scale random-walk move of one latent.

    Terms: likelihood change, gamma(a_j, b) log-prior change, and the
    proposal Jacobian ``log(xi_new / xi_old)``. Computed entirely in logs.
    """
    log_new, log_old = np.log(xi_new), np.log(xi_old)
    return (
        -(sse_new - sse_old) / (2.0 * sigma2_eps)
        + (a_j - 1.0) * (log_new - log_old)
        - b * (xi_new - xi_old)
        + (log_new - log_old)
    )


def mh_xi_step(state, j, cs, sse_cur, sse_fn, warp_hyper, adapt, rng):
    """Propose and accept/reject latent ``j`` for curves ``cs`` simultaneously.

    ``sse_fn(phi_rows, cs)`` returns residual sums of squares for the listed
    curves under candidate coefficients. Returns the updated SSE vector and
    the boolean acceptance mask.
    """
    cs = np.asarray(cs)
    z = rng.standard_normal(cs.size) * np.exp(adapt.log_scale[cs, j - 1])
    log_u = np.log(rng.random(cs.size))
    xi_old = state.xi[cs]
    xi_new = xi_old.copy()
    xi_new[:, j] = xi_old[:, j] * np.exp(z)
    phi_new, ok = _phi_rows(xi_new)
    sse_new = np.full(cs.size, np.inf)
    if np.any(ok):
        sse_new[ok] = sse_fn(phi_new[ok], cs[ok])
    with np.errstate(over="ignore", invalid="ignore"):
        log_ratio = xi_log_ratio(xi_old[:, j], xi_new[:, j], sse_cur, sse_new,
                                 state.sigma2_eps, warp_hyper.a[j - 1], warp_hyper.b)
    finite = ok & np.isfinite(log_ratio)
    adapt.nonfinite += int(np.sum(~finite))
    log_ratio = np.where(finite, log_ratio, -np.inf)
    accept = log_u < log_ratio
    if np.any(accept):
        idx = cs[accept]
        state.xi[idx] = xi_new[accept]
        state.phi[idx] = phi_new[accept]
    adapt.record(cs, j, accept, log_ratio)
    return np.where(accept, sse_new, sse_cur), accept


def _curve_sse_fn(state, dataset, bases):
    flat = dataset.flat
    o = flat.offsets
    lengths = np.diff(o)
    t_of = [flat.t[o[c]:o[c + 1]] for c in range(o.size - 1)]
    y_of = [flat.y[o[c]:o[c + 1]] for c in range(o.size - 1)]
    group_of = flat.group_of
    all_curves = np.arange(o.size - 1)

    def sse(phi_rows, cs):
        if cs.size == all_curves.size and np.array_equal(cs, all_curves):
            t, y, offs = flat.t, flat.y, o
        else:
            t = np.concatenate([t_of[c] for c in cs])
            y = np.concatenate([y_of[c] for c in cs])
            offs = np.concatenate([[0], np.cumsum(lengths[cs])]).astype(np.int64)
        return _kernels.curve_sse(t, y, offs, np.ascontiguousarray(phi_rows), bases.h,
                                  state.beta[group_of[cs]], bases.beta, state.gamma[cs],
                                  bases.gamma, np.ones(cs.size), np.zeros(cs.size))

    return sse


def mh_update_xi(state, dataset, bases, hyper, g, i, j, adapt, rng):
    """Single-coordinate latent update for curve (g, i); returns the accept flag."""
    if not 1 <= j < bases.q:
        raise ConfigurationError(f"latent index must lie in 1..{bases.q - 1} (0-based)")
    c = np.array([state.index(g, i)])
    sse_fn = _curve_sse_fn(state, dataset, bases)
    sse_cur = sse_fn(state.phi[c], c)
    _, accept = mh_xi_step(state, j, c, sse_cur, sse_fn, hyper.warp, adapt, rng)
    return bool(accept[0])


def gibbs_sweep(state, dataset, bases, hyper, adapt, rng, omega=None, schedule=None):
    """One full scan; ``state`` is updated in place and returned.

    ``schedule`` optionally permutes the order in which latent coordinates
    are visited (a list of j values); the default is 1..q-1.
    """
    omega = penalty_matrix(bases.p) if omega is None else omega
    ws = _Workspace(state, dataset, bases)
    for g in range(dataset.G):
        state.beta[g] = fc_beta(state, dataset, bases, g, omega=omega, ws=ws).sample(rng)
    state.lam = sample_inv_gamma(*fc_lambda(state, hyper, omega), rng)
    for g, i, _ in dataset.curves():
        c = state.index(g, i)
        state.gamma[c] = fc_gamma(state, dataset, bases, g, i, ws=ws).sample(rng)
    state.sigma2_gamma = sample_inv_gamma(*fc_sigma_gamma(state, hyper), rng)

    sse_fn = _curve_sse_fn(state, dataset, bases)
    cs = np.arange(dataset.n_curves)
    sse = sse_fn(state.phi, cs)
    for j in (range(1, bases.q) if schedule is None else schedule):
        sse, _ = mh_xi_step(state, j, cs, sse, sse_fn, hyper.warp, adapt, rng)
    adapt.step_count += 1

    a_star, b_star = hyper.a_eps + dataset.flat.y.size / 2, hyper.b_eps + 0.5 * float(sse.sum())
    state.sigma2_eps = sample_inv_gamma(a_star, b_star, rng)
    return state


def log_posterior(state, dataset, bases, hyper):
    """Unnormalized log joint density of data and parameters."""
    from scipy import stats

    omega = penalty_matrix(bases.p)
    G, p = state.beta.shape
    lp = -0.5 * np.sum(_kernels.sse_by_curve(dataset.flat.y, fitted_values(state, dataset, bases),
                                             dataset.flat.offsets)) / state.sigma2_eps
    lp -= 0.5 * dataset.flat.y.size * np.log(2 * np.pi * state.sigma2_eps)
    lp += -0.5 * np.einsum("gi,ij,gj->", state.beta, omega, state.beta) / state.lam
    lp -= 0.5 * G * p * np.log(state.lam)
    lp += -0.5 * np.sum(state.gamma**2) / state.sigma2_gamma
    lp -= 0.5 * state.gamma.size * np.log(state.sigma2_gamma)
    lp += stats.invgamma.logpdf(state.lam, hyper.a_lambda, scale=hyper.b_lambda)
    lp += stats.invgamma.logpdf(state.sigma2_gamma, hyper.a_gamma, scale=hyper.b_gamma)
    lp += stats.invgamma.logpdf(state.sigma2_eps, hyper.a_eps, scale=hyper.b_eps)
    lp += np.sum(stats.gamma.logpdf(state.xi[:, 1:], hyper.warp.a, scale=1 / hyper.warp.b))
    return float(lp)


MAIN_BLOCKS = ("beta", "gamma", "xi", "phi", "lambda", "sigma2_gamma", "sigma2_eps")


def snapshot(state):
    return {
        "beta": state.beta.copy(),
        "gamma": state.gamma.copy(),
        "xi": state.xi.copy(),
        "phi": state.phi.copy(),
        "lambda": state.lam,
        "sigma2_gamma": state.sigma2_gamma,
        "sigma2_eps": state.sigma2_eps,
    }


def drive_chain(state, sweep, config, adapt, model, meta, snapshot_fn,
                partial_path=None, progress=None):
    """Burn-in, thinning and storage loop shared by both models."""
    stored = {}
    iters = []
    try:
        for it in range(config.n_iter):
            adapt.adapting = it < config.burn_in
            sweep(state)
            if it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0:
                if len(iters) >= config.n_stored:
                    continue
                for key, val in snapshot_fn(state).items():
                    stored.setdefault(key, []).append(val)
                iters.append(it)
            if progress is not None:
                progress(it, state)
    except BaseException:
        if partial_path is not None and iters:
            _assemble(stored, iters, adapt, model, meta).save(partial_path)
            logger.error("chain interrupted; %d draws saved to %s", len(iters), partial_path)
        raise
    return _assemble(stored, iters, adapt, model, meta)


def _assemble(stored, iters, adapt, model, meta):
    draws = {k: np.asarray(v) for k, v in stored.items()}
    acceptance = {
        "accepted": adapt.accepted.copy(),
        "proposed": adapt.proposed.copy(),
        "burn_accepted": adapt.burn_accepted.copy(),
        "burn_proposed": adapt.burn_proposed.copy(),
        "log_scale": adapt.log_scale.copy(),
        "nonfinite": np.array(adapt.nonfinite),
    }
    return Chain(model=model, draws=draws, iterations=np.asarray(iters, dtype=np.int64),
                 acceptance=acceptance, meta=dict(meta))


def run_chain(dataset, hyper, bases, config, init=None, partial_path=None, progress=None,
              schedule=None):
    """Run the sampler from ``init`` (default: :func:`initial_state`); deterministic in ``config.seed``."""
    if tuple(hyper.warp.a.shape) != (bases.q - 1,):
        raise ConfigurationError("warp hyperparameter length must equal q - 1")
    rng = np.random.default_rng(config.seed)
    state = initial_state(dataset, bases, hyper) if init is None else init.copy()
    omega = penalty_matrix(bases.p)
    adapt = AdaptState.create(dataset.n_curves, bases.q, config)

    def sweep(s):
        gibbs_sweep(s, dataset, bases, hyper, adapt, rng, omega=omega, schedule=schedule)

    meta = {
        "seed": config.seed,
        "config": asdict(config),
        "dims": {"p": bases.p, "k": bases.k, "q": bases.q},
        "group_sizes": list(dataset.group_sizes),
        "hyper": _hyper_dict(hyper),
    }
    return drive_chain(state, sweep, config, adapt, "main", meta, snapshot,
                       partial_path=partial_path, progress=progress)


def _hyper_dict(hyper):
    out = {k: v for k, v in vars(hyper).items() if k != "warp"}
    out["warp_a"] = hyper.warp.a.tolist()
    out["warp_b"] = hyper.warp.b
    return out


def state_from_chain(chain, draw=-1):
    d = chain.draws
    return ModelState(d["beta"][draw], d["gamma"][draw], d["xi"][draw], d["phi"][draw],
                      float(d["lambda"][draw]), float(d["sigma2_gamma"][draw]),
                      float(d["sigma2_eps"][draw]), tuple(chain.meta["group_sizes"]))


@dataclass
class PosteriorSummary:
    grid: np.ndarray
    level: float
    common_mean: np.ndarray  # (G, len(grid))
    common_lower: np.ndarray
    common_upper: np.ndarray
    phi_mean: np.ndarray  # (N, q)
    warps: np.ndarray  # (N, len(grid)) posterior-mean warp
    registered: list = field(default_factory=list)  # per-curve arrays on grid


def posterior_summary(chain, bases, dataset, grid, level=0.95):
    """Common-curve bands, posterior-mean warps and registered curves on ``grid``."""
    if chain.n_draws == 0:
        raise UsageError("cannot summarize an empty chain")
    grid = np.asarray(grid, dtype=float)
    B = eval_design(bases.beta, grid)
    curves = chain.common_curve_draws(B)  # (S, G, len(grid))
    lo_q, hi_q = (1 - level) / 2, 1 - (1 - level) / 2
    lower, upper = np.quantile(curves, [lo_q, hi_q], axis=0)
    phi_mean = chain.draws["phi"].mean(axis=0)
    phi_mean[:, 0], phi_mean[:, -1] = 0.0, 1.0
    warps = np.array([warp_eval(ph, bases.h, grid) for ph in phi_mean])
    registered = [register_curve(c, phi_mean[n], bases.h, grid)
                  for n, (_, _, c) in enumerate(dataset.curves())]
    return PosteriorSummary(grid, level, curves.mean(axis=0), lower, upper,
                            phi_mean, warps, registered)
