import numpy as np
import pytest
from scipy import stats

from funcalign.basis import eval_design, greville_abscissae, make_basis
from funcalign.errors import (
    ConfigurationError,
    DegenerateInputError,
    InvariantViolationError,
)
from funcalign.model import (
    Curve,
    FunctionalDataset,
    Hyperparams,
    ModelState,
    denormalize_time,
    fitted_values,
    initial_state,
    log_likelihood,
    make_bases,
    normalize_time,
    register_curve,
    smooth_eval,
    warped_mean,
)
from funcalign.warping import elicit_identity, sample_prior_warp, warp_eval, xi_to_phi


def random_state(bases, group_sizes, rng, s2=0.3):
    G, N = len(group_sizes), sum(group_sizes)
    hyper = elicit_identity(bases.h, 20.0)
    xi, phi = sample_prior_warp(hyper, rng, size=N)
    return ModelState(rng.normal(size=(G, bases.p)), rng.normal(size=(N, bases.k)), xi, phi,
                      1.0, 1.0, s2, group_sizes)


def random_dataset(rng, group_sizes, n_range=(5, 12)):
    groups = []
    for n_g in group_sizes:
        curves = []
        for _ in range(n_g):
            n = rng.integers(*n_range)
            curves.append(Curve(np.sort(rng.random(n)), rng.normal(size=n)))
        groups.append(curves)
    return FunctionalDataset(groups)


def test_dataset_validation():
    with pytest.raises(DegenerateInputError):
        FunctionalDataset([[Curve([0.5], [1.0])]])
    with pytest.raises(ConfigurationError, match=r"\(0, 1\)"):
        FunctionalDataset([[Curve([0, 1], [0, 0]), Curve([0.5, 0.2], [0, 0])]])
    with pytest.raises(ConfigurationError):
        FunctionalDataset([[Curve([0, 2], [0, 0])]])
    with pytest.raises(DegenerateInputError):
        FunctionalDataset([[Curve([0, 1], [0, 0])]], t0=1.0, tf=1.0)


def test_dataset_bookkeeping():
    ds = random_dataset(np.random.default_rng(0), [2, 3])
    assert ds.G == 2 and ds.n_curves == 5 and ds.group_sizes == (2, 3)
    assert ds.index(1, 2) == 4
    flat = ds.flat
    assert flat.offsets[-1] == ds.n_obs == flat.t.size
    np.testing.assert_array_equal(flat.group_of, [0, 0, 1, 1, 1])
    assert ds.subset([1]).n_curves == 3


def test_normalize_time():
    ds = FunctionalDataset([[Curve([2, 3, 4], [1, 2, 3])]], t0=2, tf=4)
    norm = normalize_time(ds)
    np.testing.assert_allclose(norm.groups[0][0].times, [0, 0.5, 1])
    assert norm.source_domain == (2, 4)
    np.testing.assert_allclose(denormalize_time(norm.groups[0][0].times, (2, 4)), [2, 3, 4],
                               atol=1e-14)
    unit = random_dataset(np.random.default_rng(1), [2])
    assert normalize_time(unit) is unit


def test_smooth_eval_special_cases():
    bases = make_bases(8, 5, 6)
    t = np.linspace(0, 1, 50)
    beta = np.random.default_rng(0).normal(size=8)
    np.testing.assert_allclose(smooth_eval(beta, np.zeros(5), bases, t),
                               eval_design(bases.beta, t) @ beta)
    np.testing.assert_allclose(smooth_eval(np.zeros(8), np.full(5, 2.5), bases, t), 2.5,
                               atol=1e-12)
    with pytest.raises(ConfigurationError):
        smooth_eval(np.zeros(7), np.zeros(5), bases, t)


def test_smooth_eval_double_loop_oracle():
    bases = make_bases(9, 6, 5)
    rng = np.random.default_rng(4)
    beta, gamma = rng.normal(size=9), rng.normal(size=6)
    t = rng.random(40)
    Bb, Bg = eval_design(bases.beta, t), eval_design(bases.gamma, t)
    ref = np.zeros(t.size)
    for n in range(t.size):
        for j in range(9):
            ref[n] += Bb[n, j] * beta[j]
        for j in range(6):
            ref[n] += Bg[n, j] * gamma[j]
    np.testing.assert_allclose(smooth_eval(beta, gamma, bases, t), ref, atol=1e-12)


def test_warped_mean_composition():
    bases = make_bases(10, 5, 8)
    rng = np.random.default_rng(1)
    state = random_state(bases, (2, 1), rng)
    t = np.linspace(0, 1, 300)
    x = warp_eval(state.phi[2], bases.h, t)
    np.testing.assert_allclose(warped_mean(state, bases, 1, 0, t),
                               smooth_eval(state.beta[1], state.gamma[2], bases, x), atol=1e-12)
    state.phi[2] = greville_abscissae(bases.h)
    np.testing.assert_allclose(warped_mean(state, bases, 1, 0, t),
                               smooth_eval(state.beta[1], state.gamma[2], bases, t), atol=1e-12)


def test_warped_mean_preserves_extrema():
    bases = make_bases(10, 5, 8)
    state = random_state(bases, (1,), np.random.default_rng(9))
    t = np.linspace(0, 1, 20001)
    a = warped_mean(state, bases, 0, 0, t).max()
    b = smooth_eval(state.beta[0], state.gamma[0], bases, t).max()
    assert a == pytest.approx(b, abs=1e-4)


def test_log_likelihood_hand_cases():
    bases = make_bases(4, 4, 4)
    g = greville_abscissae(bases.h)
    xi = np.concatenate([[0.0], np.diff(g)])
    t = np.linspace(0, 1, 10)
    state = ModelState(np.zeros((1, 4)), np.zeros((1, 4)), xi, xi_to_phi(xi), 1.0, 1.0, 1.0, (1,))
    ds = FunctionalDataset([[Curve(t, np.zeros(10))]])
    assert log_likelihood(state, ds, bases) == pytest.approx(-5 * np.log(2 * np.pi), abs=1e-12)

    ds1 = FunctionalDataset([[Curve([0.0, 1.0], [2.0, 0.0])]])
    state.sigma2_eps = 4.0
    single = -0.5 * np.log(8 * np.pi) - 0.5
    assert log_likelihood(state, ds1, bases) == pytest.approx(single + -0.5 * np.log(8 * np.pi))

    state.sigma2_eps = 0.0
    with pytest.raises(InvariantViolationError):
        log_likelihood(state, ds, bases)


def test_log_likelihood_brute_force():
    rng = np.random.default_rng(21)
    bases = make_bases(7, 4, 6)
    ds = random_dataset(rng, [3, 2])
    state = random_state(bases, ds.group_sizes, rng, s2=0.7)
    ref = 0.0
    for g, i, c in ds.curves():
        m = warped_mean(state, bases, g, i, c.times)
        for y, mu in zip(c.values, m):
            ref += stats.norm.logpdf(y, mu, np.sqrt(0.7))
    assert abs(log_likelihood(state, ds, bases) - ref) < 1e-10
    assert abs(log_likelihood(state, ds, bases, per_curve=True).sum() - ref) < 1e-10


def test_fitted_values_do_not_mutate():
    rng = np.random.default_rng(2)
    bases = make_bases(7, 4, 6)
    ds = random_dataset(rng, [2])
    state = random_state(bases, ds.group_sizes, rng)
    before = state.copy()
    fitted_values(state, ds, bases)
    log_likelihood(state, ds, bases)
    for name in ("beta", "gamma", "xi", "phi"):
        np.testing.assert_array_equal(getattr(state, name), getattr(before, name))


def test_register_identity_is_interpolation():
    basis = make_basis(6)
    t = np.linspace(0, 1, 40) ** 1.3
    y = np.sin(5 * t)
    grid = np.linspace(0, 1, 101)
    out = register_curve(Curve(t, y), greville_abscissae(basis), basis, grid)
    np.testing.assert_allclose(out, np.interp(grid, t, y), atol=1e-9)
    assert out[0] == y[0] and out[-1] == y[-1]


def test_register_recovers_unwarped_curve():
    basis = make_basis(10)
    _, phi = sample_prior_warp(elicit_identity(basis, 30.0), np.random.default_rng(6))
    t = np.linspace(0, 1, 300)
    m = lambda s: np.sin(2 * np.pi * s) + s**2
    y = m(warp_eval(phi, basis, t))
    grid = np.linspace(0, 1, 157)
    assert np.max(np.abs(register_curve(Curve(t, y), phi, basis, grid) - m(grid))) < 1e-3


def test_register_empty_curve():
    basis = make_basis(4)
    with pytest.raises(DegenerateInputError):
        register_curve(Curve([], []), greville_abscissae(basis), basis, [0.5])


def test_initial_state_is_valid():
    rng = np.random.default_rng(0)
    bases = make_bases(8, 4, 6)
    ds = random_dataset(rng, [2, 2], n_range=(20, 30))
    hyper = Hyperparams(2, 1, 2, 1, 2, 1, elicit_identity(bases.h, 10.0))
    state = initial_state(ds, bases, hyper)
    state.validate()
    np.testing.assert_allclose(state.phi[0], greville_abscissae(bases.h), atol=1e-14)


def test_hyperparams_validation():
    with pytest.raises(ConfigurationError):
        Hyperparams(0, 1, 1, 1, 1, 1, elicit_identity(make_basis(4), 3.0))
    h = Hyperparams.knee_defaults(make_basis(10))
    assert (h.a_eps, h.b_eps, h.warp.b) == (3000, 5000, 2.5)
