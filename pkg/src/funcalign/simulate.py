"""Synthetic datasets with known warps, for the simulation study.

Setting 1 draws grouped curves from the smoothing model itself; setting 2
draws one group of curves from the shift/scale common-shape model. Both
misalign curves with normalized-gamma warps whose shape and rate are picked
at random from a small grid, coordinate by coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import eval_design, greville_abscissae
from .errors import ConfigurationError
from .model import Curve, FunctionalDataset, make_bases
from .warping import sample_gamma, warp_eval, xi_to_phi


@dataclass(frozen=True)
class WarpGrid:
    a_grid: tuple = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    b_grid: tuple = (1.0, 2.0, 3.0)

    def __post_init__(self):
        if not self.a_grid or not self.b_grid:
            raise ConfigurationError("warp grids must be nonempty")
        if min(self.a_grid) <= 0 or min(self.b_grid) <= 0:
            raise ConfigurationError("warp grid values must be positive")


@dataclass
class Truth:
    """Ground truth for one simulated dataset, in flat curve order."""

    times: list  # observation times per curve
    curves: list  # unwarped mean curve m_gi(t) per curve, on its observation times
    xi: np.ndarray
    phi: np.ndarray
    params: dict = field(default_factory=dict)
    q: int = 10


def generate_warps(n_curves, q, grid, rng):
    """Latents and coefficients for ``n_curves`` random misalignments."""
    if q < 2:
        raise ConfigurationError("q must be at least 2")
    a = rng.choice(np.asarray(grid.a_grid, dtype=float), size=(n_curves, q - 1))
    b = rng.choice(np.asarray(grid.b_grid, dtype=float), size=(n_curves, q - 1))
    body = sample_gamma(a, b, rng)
    xi = np.concatenate([np.zeros((n_curves, 1)), body], axis=1)
    return xi, xi_to_phi(xi)


def rw1_path(p, lam, rng, start_at_zero=False):
    """First-order random walk of length ``p`` with increment variance ``lam``.

    By default the walk starts from an implicit zero, matching the penalty
    matrix prior; ``start_at_zero`` pins the first coefficient itself at 0.
    """
    steps = rng.normal(0.0, np.sqrt(lam), size=p)
    if start_at_zero:
        steps[0] = 0.0
    return np.cumsum(steps)


def _identity_warps(n, basis_h):
    phi = np.tile(greville_abscissae(basis_h), (n, 1))
    phi[:, 0], phi[:, -1] = 0.0, 1.0
    xi = np.concatenate([np.zeros((n, 1)), np.diff(phi, axis=1)], axis=1)
    return xi, phi


def simulate_setting1(seed, n_groups=2, n_per_group=10, n_obs=300, p=13, k=7, q=10,
                      lam=5.0, sigma2_gamma=5.0, sigma2_eps=0.01, grid=WarpGrid(),
                      warp=True, noise=True):
    """Grouped curves from the smoothing model, warped and noised."""
    rng = np.random.default_rng(seed)
    bases = make_bases(p, k, q)
    t = np.linspace(0.0, 1.0, n_obs)
    beta = np.array([rw1_path(p, lam, rng) for _ in range(n_groups)])
    N = n_groups * n_per_group
    gamma = rng.normal(0.0, np.sqrt(sigma2_gamma), size=(N, k))
    xi, phi = generate_warps(N, q, grid, rng) if warp else _identity_warps(N, bases.h)
    groups, truth_curves = [], []
    Bb, Bg = eval_design(bases.beta, t), eval_design(bases.gamma, t)
    for g in range(n_groups):
        curves = []
        for i in range(n_per_group):
            c = g * n_per_group + i
            truth_curves.append(Bb @ beta[g] + Bg @ gamma[c])
            x = warp_eval(phi[c], bases.h, t)
            y = eval_design(bases.beta, x) @ beta[g] + eval_design(bases.gamma, x) @ gamma[c]
            if noise:
                y = y + rng.normal(0.0, np.sqrt(sigma2_eps), size=n_obs)
            curves.append(Curve(t, y))
        groups.append(curves)
    truth = Truth(times=[t] * N, curves=truth_curves, xi=xi, phi=phi, q=q,
                  params=dict(setting=1, beta=beta, gamma=gamma, lam=lam,
                              sigma2_gamma=sigma2_gamma, sigma2_eps=sigma2_eps, p=p, k=k))
    return FunctionalDataset(groups), truth


SETTING2_PARAMS = dict(c0=3.0, sigma_c=1.0, a0=1.2, sigma_a=0.5, lam=1.3, sigma_eps=0.002,
                       p=14, sigma_phi=2.0)


def simulate_setting2(seed, n_curves=30, n_obs=300, q=10, grid=WarpGrid(), warp=True,
                      noise=True, **overrides):
    """One group of shifted/scaled copies of a common shape."""
    from .baseline import baseline_generate

    params = {**SETTING2_PARAMS, **overrides}
    rng = np.random.default_rng(seed)
    return baseline_generate(params, n_curves, n_obs, rng, q=q, grid=grid, warp=warp,
                             noise=noise)

