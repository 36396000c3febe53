"""Run configuration, alignment error scoring, model comparison and diagnostics."""

from __future__ import annotations

import configparser
import csv
import logging
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .baseline import BaselineHyper, baseline_fit
from .basis import make_basis
from .errors import ConfigurationError, UsageError
from .model import Bases, Hyperparams, make_bases, register_curve
from .sampler import SamplerConfig, run_chain
from .simulate import simulate_setting1, simulate_setting2
from .warping import elicit_identity, warp_eval

logger = logging.getLogger(__name__)

# p must clearly exceed k; below this ratio the individual spline can absorb
# phase variation and registration degrades
MIN_P_OVER_K = 1.5

PATHOLOGY_MESSAGE = (
    "p is not sufficiently greater than k: the individual spline is nearly as "
    "flexible as the group spline, leaving no room for proper alignment; expect "
    "warps that stay near the identity"
)


class PathologyWarning(UserWarning):
    """Basis dimensions known to defeat registration."""


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of a run, readable from a flat ``key = value`` file.

    Defaults are the knee-analysis settings; keys missing from a file fall
    back to ``base`` when one is given. ``warp_concentration`` sets the
    identity-centred warp prior ``a = concentration * diff(greville)``; the
    ``*_a0``/``*_c0`` and ``a_a``.. ``b_c`` keys configure the comparison model.
    """

    p: int = 23
    k: int = 8
    q: int = 10
    a_lambda: float = 1200.0
    b_lambda: float = 3500.0
    a_gamma: float = 1000.0
    b_gamma: float = 2000.0
    a_eps: float = 3000.0
    b_eps: float = 5000.0
    warp_b: float = 2.5
    warp_concentration: float = 90.0
    n_iter: int = 25000
    burn_in: int = 20000
    thin: int = 1
    seed: int = 0
    adapt_target: float = 0.44
    adapt_window: int = 50
    a_a: float = 2.0
    b_a: float = 0.1
    a_c: float = 2.0
    b_c: float = 1.0
    m_a0: float = 1.0
    s2_a0: float = 100.0
    m_c0: float = 0.0
    s2_c0: float = 100.0

    def __post_init__(self):
        if self.q < 4:
            raise ConfigurationError(f"q must be at least 4, got {self.q}")
        if self.p < MIN_P_OVER_K * self.k:
            warnings.warn(PATHOLOGY_MESSAGE + f" (p={self.p}, k={self.k})", PathologyWarning,
                          stacklevel=3)

    @classmethod
    def simulation(cls, **overrides):
        """Weakly informative settings suited to the simulated datasets."""
        return cls(**{**SIMULATION_DEFAULTS, **overrides})

    @classmethod
    def from_text(cls, text, base=None):
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        has_header = any(line.strip().startswith("[") for line in text.splitlines())
        parser.read_string(text if has_header else "[run]\n" + text)
        if not parser.has_section("run"):
            raise ConfigurationError("config file needs a [run] section")
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for key, raw in parser["run"].items():
            if key not in types:
                raise ConfigurationError(f"unknown config key {key!r}")
            cast = int if types[key] in ("int", int) else float
            try:
                values[key] = cast(raw)
            except ValueError:
                raise ConfigurationError(f"config key {key!r}: cannot read {raw!r}") from None
        base = {} if base is None else {f.name: getattr(base, f.name) for f in fields(cls)}
        return cls(**{**base, **values})

    @classmethod
    def from_file(cls, path, base=None):
        return cls.from_text(Path(path).read_text(), base=base)

    def to_text(self):
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))

    def bases(self):
        return make_bases(self.p, self.k, self.q)

    def hyper(self, basis_h=None):
        basis_h = make_basis(self.q) if basis_h is None else basis_h
        warp = elicit_identity(basis_h, self.warp_concentration, b=self.warp_b)
        return Hyperparams(self.a_lambda, self.b_lambda, self.a_gamma, self.b_gamma,
                           self.a_eps, self.b_eps, warp)

    def baseline_hyper(self, basis_h=None):
        basis_h = make_basis(self.q) if basis_h is None else basis_h
        warp = elicit_identity(basis_h, self.warp_concentration, b=self.warp_b)
        return BaselineHyper(self.a_lambda, self.b_lambda, self.a_eps, self.b_eps,
                             self.a_a, self.b_a, self.a_c, self.b_c,
                             self.m_a0, self.s2_a0, self.m_c0, self.s2_c0, warp)

    def sampler(self, seed=None):
        return SamplerConfig(n_iter=self.n_iter, burn_in=self.burn_in, thin=self.thin,
                             seed=self.seed if seed is None else seed,
                             adapt_target=self.adapt_target, adapt_window=self.adapt_window)


# weakly informative settings for simulated data; the knee-analysis priors
# pin the noise variance near 0.84 and swamp curves on a unit scale
SIMULATION_DEFAULTS = dict(
    p=13, k=7, q=10,
    a_lambda=2.0, b_lambda=1.0, a_gamma=2.0, b_gamma=1.0, a_eps=2.0, b_eps=1e-4,
    warp_concentration=40.0, n_iter=4500, burn_in=1500,
)


def l2_distance(f, g, grid):
    """sqrt of the trapezoid-rule integral of ``(f - g)**2`` over ``grid``.

    ``f`` and ``g`` are either arrays sampled on ``grid`` or ``(times, values)``
    pairs, which are linearly interpolated onto it.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise UsageError("l2_distance needs a nonempty grid")
    fv, gv = _on_grid(f, grid), _on_grid(g, grid)
    if grid.size == 1:
        return 0.0 if fv[0] == gv[0] else float("nan")
    return float(np.sqrt(np.trapezoid((fv - gv) ** 2, grid)))


def _on_grid(f, grid):
    if isinstance(f, tuple):
        return np.interp(grid, np.asarray(f[0], float), np.asarray(f[1], float))
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise UsageError("sampled curve and grid differ in length")
    return f


def alignment_error(dataset, truth, phi, basis_h, center=True):
    """Average L2 distance between registered curves and the unwarped truth.

    Each curve is registered with its own coefficients ``phi[n]`` and scored
    on its observation times. A warp shared by every curve is not identified
    by the likelihood, so by default the warps are centred first: curve ``n``
    is registered with ``hbar^{-1} o h_n``, where ``hbar`` has the average
    coefficients, making the centred warps average to the identity.
    """
    phi = np.asarray(phi, dtype=float)
    phi_bar = phi.mean(axis=0)
    errs = []
    for n, (_, _, c) in enumerate(dataset.curves()):
        s = warp_eval(phi_bar, basis_h, c.times) if center else c.times
        reg = register_curve(c, phi[n], basis_h, s)
        errs.append(l2_distance(reg, truth.curves[n], c.times))
    return float(np.mean(errs))


def posterior_mean_phi(chain):
    phi = np.asarray(chain.draws["phi"]).mean(axis=0)
    phi[:, 0], phi[:, -1] = 0.0, 1.0
    return phi


def _simulate(setting, seed):
    if setting == 1:
        return simulate_setting1(seed)
    if setting == 2:
        return simulate_setting2(seed)
    raise ConfigurationError(f"unknown simulation setting {setting}")


def _truth_subset(truth, rows):
    from .simulate import Truth

    return Truth(times=[truth.times[r] for r in rows], curves=[truth.curves[r] for r in rows],
                 xi=truth.xi[rows], phi=truth.phi[rows], params=truth.params, q=truth.q)


def fit_and_score(dataset, truth, config, seed):
    """Alignment errors of the main model and of the per-group baseline on one dataset."""
    bases = config.bases()
    chain = run_chain(dataset, config.hyper(bases.h), bases, config.sampler(seed))
    main_err = alignment_error(dataset, truth, posterior_mean_phi(chain), bases.h)

    base_bases = Bases(bases.beta, None, bases.h)
    errs = []
    offsets = np.concatenate([[0], np.cumsum(dataset.group_sizes)])
    for g in range(dataset.G):
        sub = dataset.subset([g])
        sub_truth = _truth_subset(truth, range(offsets[g], offsets[g + 1]))
        bchain = baseline_fit(sub, config.baseline_hyper(bases.h), base_bases,
                              config.sampler(seed))
        errs.append(alignment_error(sub, sub_truth, posterior_mean_phi(bchain), bases.h))
    return main_err, float(np.mean(errs))


def compare_models(replicas, settings, config, out=None, seed0=0, simulate=_simulate):
    """Fit both models to simulated replicas and tabulate alignment errors.

    Returns rows ``(replica, model, setting, error)``; replica ``r`` of
    setting ``s`` uses seed ``seed0 + 1000 * s + r`` for data and sampler.
    Writes a CSV with that header when ``out`` is given.
    """
    rows = []
    for s in settings:
        for r in range(replicas):
            seed = seed0 + 1000 * s + r
            dataset, truth = simulate(s, seed)
            main_err, base_err = fit_and_score(dataset, truth, config, seed)
            logger.info("setting %d replica %d: main %.4g baseline %.4g", s, r, main_err,
                        base_err)
            rows.append((r, "proposed", s, main_err))
            rows.append((r, "baseline", s, base_err))
    if out is not None:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replica", "model", "setting", "error"])
            w.writerows((r, m, s, repr(e)) for r, m, s, e in rows)
    return rows


def split_rhat(x):
    """Split-chain potential scale reduction of one series; NaN when undefined."""
    x = np.asarray(x, dtype=float)
    n = x.size // 2
    if n < 2:
        return float("nan")
    halves = np.stack([x[:n], x[-n:]])
    w = halves.var(axis=1, ddof=1).mean()
    if not w > 0:
        return float("nan")
    b = n * halves.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


@dataclass
class Diagnostics:
    acceptance: list  # rows (group, curve, j, accepted, proposed, rate), j 1-based
    traces: dict  # name -> series
    rhat: dict  # name -> float (NaN when degenerate)
    nonfinite: int


DEFAULT_TRACES = ("lambda", "sigma2_gamma", "sigma2_eps", "a0", "c0", "sigma2_a", "sigma2_c")


def diagnose(chain, names=None):
    """Acceptance table, selected traces and split R-hat of every scalar block."""
    if chain.n_draws == 0:
        raise UsageError("cannot diagnose an empty chain")
    sizes = chain.meta.get("group_sizes") or [chain.acceptance["accepted"].shape[0]]
    acc, prop = chain.acceptance["accepted"], chain.acceptance["proposed"]
    rates = chain.acceptance_rates()
    table = []
    c = 0
    for g, n in enumerate(sizes):
        for i in range(n):
            for j in range(acc.shape[1]):
                table.append((g, i, j + 2, int(acc[c, j]), int(prop[c, j]), float(rates[c, j])))
            c += 1
    if names is None:
        names = [n for n in DEFAULT_TRACES if n in chain.draws]
    traces = {n: np.asarray(chain.trace(n)) for n in names}
    rhat = {n: split_rhat(v) for n, v in traces.items()}
    return Diagnostics(table, traces, rhat, int(chain.acceptance.get("nonfinite", 0)))
