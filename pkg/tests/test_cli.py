import csv
import warnings

import numpy as np
import pytest

from funcalign.chain import Chain
from funcalign.cli import main
from funcalign.errors import ConfigurationError, ParseError, UsageError
from funcalign.harness import (
    PathologyWarning,
    RunConfig,
    compare_models,
    diagnose,
    l2_distance,
    split_rhat,
)
from funcalign.io import load_dataset, load_truth, save_dataset, save_truth
from funcalign.model import Curve, FunctionalDataset
from funcalign.sampler import run_chain
from funcalign.simulate import simulate_setting1, simulate_setting2

TINY_RUN = dict(p=8, k=5, q=5, n_iter=40, burn_in=20, a_lambda=2, b_lambda=1, a_gamma=2,
                b_gamma=1, a_eps=2, b_eps=1e-4, warp_concentration=40)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# dataset files ------------------------------------------------------------------------

def test_two_row_file(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("group_id,curve_id,t,y\nA,1,0.0,1.5\nA,1,2.0,2.5\n")
    ds = load_dataset(path)
    assert ds.G == 1 and ds.n_curves == 1 and ds.n_obs == 2
    assert (ds.t0, ds.tf) == (0.0, 2.0) and [list(n) for n in ds.names] == [["A/1"]]


def test_round_trip_ragged(tmp_path):
    rng = np.random.default_rng(0)
    curves = [Curve(np.sort(rng.random(n)), rng.normal(size=n)) for n in (303, 591)]
    ds = FunctionalDataset([curves, [Curve([0.1, 0.5], [1.0, np.pi])]])
    save_dataset(ds, tmp_path / "d.csv")
    back = load_dataset(tmp_path / "d.csv", domain=(0.0, 1.0))
    assert back.group_sizes == (2, 1)
    for (_, _, a), (_, _, b) in zip(ds.curves(), back.curves()):
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.values, b.values)


@pytest.mark.parametrize("body,line", [
    ("group_id,curve_id,t\n", 1),
    ("group_id,curve_id,t,y\nA,1,0,1\nA,1,0.5\n", 3),
    ("group_id,curve_id,t,y\nA,1,0,1\nA,1,x,2\n", 3),
    ("group_id,curve_id,t,y\nA,1,0,1\n,1,1,2\n", 3),
    ("group_id,curve_id,t,y\nA,1,0,1\nA,1,1,inf\n", 3),
])
def test_parse_errors_carry_line_numbers(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(ParseError) as info:
        load_dataset(path)
    assert info.value.line == line


def test_non_monotone_times_name_the_curve(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("group_id,curve_id,t,y\nA,1,0,1\nA,1,1,1\nB,7,0.5,1\nB,7,0.2,1\n")
    with pytest.raises(ConfigurationError, match="B/7"):
        load_dataset(path)


def test_truth_round_trip(tmp_path):
    _, truth = simulate_setting2(1, n_curves=3, n_obs=20)
    save_truth(truth, tmp_path / "t.npz")
    back = load_truth(tmp_path / "t.npz")
    np.testing.assert_array_equal(back.phi, truth.phi)
    for a, b in zip(back.curves, truth.curves):
        np.testing.assert_array_equal(a, b)
    assert back.params["c0"] == 3.0 and back.q == truth.q


# L2 distance ----------------------------------------------------------------------------

def test_l2_examples():
    grid = np.linspace(0, 1, 20001)
    assert l2_distance(np.sin(2 * np.pi * grid), np.zeros_like(grid), grid) == pytest.approx(
        np.sqrt(0.5), abs=1e-4)
    f = np.cos(grid)
    assert l2_distance(f, f, grid) == 0.0
    coarse = np.linspace(0, 1, 7)
    assert l2_distance(np.full(7, 2.0), np.full(7, -0.5), coarse) == pytest.approx(2.5, abs=1e-14)


def test_l2_interpolates_sampled_curves():
    grid = np.linspace(0, 1, 101)
    t = np.linspace(0, 1, 11)
    assert l2_distance((t, 3 * t), (t, 3 * t + 1), grid) == pytest.approx(1.0, abs=1e-12)


def test_l2_empty_grid():
    with pytest.raises(UsageError):
        l2_distance([], [], [])


# configuration ---------------------------------------------------------------------------

def test_pathology_warning_fires():
    with pytest.warns(PathologyWarning, match="alignment"):
        RunConfig(p=20, k=18)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        RunConfig(p=23, k=8)


def test_config_validation_and_text_round_trip(tmp_path):
    with pytest.raises(ConfigurationError):
        RunConfig(q=3)
    with pytest.raises(ConfigurationError):
        RunConfig.from_text("[run]\nnot_a_key = 1\n")
    cfg = RunConfig.from_text("[run]\np = 15\nb_eps = 0.25\n")
    assert (cfg.p, cfg.b_eps, cfg.k) == (15, 0.25, 8)
    assert RunConfig.from_text(cfg.to_text()) == cfg
    assert RunConfig.from_text("p = 15\n", base=RunConfig.simulation()).k == 7


def test_shipped_defaults():
    cfg = RunConfig()
    assert (cfg.p, cfg.k, cfg.q) == (23, 8, 10)
    assert (cfg.a_lambda, cfg.b_lambda, cfg.a_eps, cfg.b_eps) == (1200, 3500, 3000, 5000)


# comparison harness ------------------------------------------------------------------------

def test_compare_bookkeeping(tmp_path):
    calls = []

    def stub(setting, seed):
        calls.append((setting, seed))
        if setting == 1:
            return simulate_setting1(seed, n_per_group=2, n_obs=40)
        return simulate_setting2(seed, n_curves=3, n_obs=40)

    config = RunConfig.simulation(**{**TINY_RUN, "n_iter": 6, "burn_in": 3})
    rows = compare_models(2, [1, 2], config, out=tmp_path / "t.csv", seed0=5, simulate=stub)
    assert len(rows) == 2 * 2 * 2
    assert calls == [(1, 1005), (1, 1006), (2, 2005), (2, 2006)]
    table = read_csv(tmp_path / "t.csv")
    assert table[0] == ["replica", "model", "setting", "error"] and len(table) == 9
    assert {r[1] for r in table[1:]} == {"proposed", "baseline"}


def _curve_scale(truth):
    return np.mean([np.std(c) for c in truth.curves])


def test_compare_nothing_to_align():
    """Noiseless, unwarped replicas leave only posterior warp jitter.

    The common-shape model reaches the absolute 0.05 bound on its own data. The
    smoothing model's per-curve warps keep a few thousandths of jitter, which on
    these steep curves is judged against the curve scale instead.
    """
    data = {}

    def flat(setting, seed):
        if setting == 1:
            data[1] = simulate_setting1(seed, n_per_group=3, n_obs=100, warp=False, noise=False)
        else:
            data[2] = simulate_setting2(seed, n_curves=4, n_obs=100, warp=False, noise=False)
        return data[setting]

    config = RunConfig.simulation(p=13, k=7, q=10, n_iter=300, burn_in=200)
    rows = compare_models(1, [1, 2], config, simulate=flat)
    err = {(m, s): e for _, m, s, e in rows}
    assert err["baseline", 2] < 0.05
    for setting in (1, 2):
        assert err["proposed", setting] < 0.05 * _curve_scale(data[setting][1])


# diagnostics ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def short_chain():
    ds, _ = simulate_setting1(2, n_per_group=3, n_obs=60)
    cfg = RunConfig.simulation(**TINY_RUN)
    bases = cfg.bases()
    return run_chain(ds, cfg.hyper(bases.h), bases, cfg.sampler())


def test_split_rhat():
    assert np.isnan(split_rhat(np.ones(50)))
    assert np.isnan(split_rhat(np.ones(3)))
    rng = np.random.default_rng(0)
    assert split_rhat(rng.normal(size=4000)) == pytest.approx(1.0, abs=0.01)
    assert split_rhat(np.linspace(0, 10, 400)) > 1.5


def test_diagnose_tables(short_chain):
    diag = diagnose(short_chain, names=["lambda", "beta[0,2]", "phi[1,3]"])
    assert len(diag.acceptance) == short_chain.meta["group_sizes"][0] * 2 * (5 - 1)
    assert {row[2] for row in diag.acceptance} == {2, 3, 4, 5}
    np.testing.assert_array_equal(diag.traces["beta[0,2]"], short_chain.draws["beta"][:, 0, 2])
    assert set(diag.rhat) == {"lambda", "beta[0,2]", "phi[1,3]"}


def test_diagnose_constant_and_empty_chains(short_chain):
    const = Chain("main", {k: np.repeat(np.asarray(v)[:1], 10, axis=0)
                           for k, v in short_chain.draws.items()},
                  np.arange(10), short_chain.acceptance, short_chain.meta)
    assert np.isnan(diagnose(const, names=["lambda"]).rhat["lambda"])
    empty = Chain("main", {k: np.asarray(v)[:0] for k, v in short_chain.draws.items()},
                  np.empty(0, dtype=np.int64), short_chain.acceptance, short_chain.meta)
    with pytest.raises(UsageError):
        diagnose(empty)


# command line ----------------------------------------------------------------------------------

def _config_file(path):
    path.write_text("[run]\n" + "".join(f"{k} = {v}\n" for k, v in TINY_RUN.items()))
    return path


def test_cli_end_to_end(tmp_path):
    cfg = _config_file(tmp_path / "run.cfg")
    sim = tmp_path / "sim"
    assert main(["simulate", "--setting", "1", "--seed", "3", "--out", str(sim)]) == 0
    data = sim / "data.csv"
    assert read_csv(data)[0] == ["group_id", "curve_id", "t", "y"]
    assert (sim / "truth.npz").exists()

    for model in ("main", "baseline"):
        fit = tmp_path / f"fit_{model}"
        src = data
        if model == "baseline":
            rows = read_csv(data)
            src = tmp_path / "one_group.csv"
            with open(src, "w", newline="") as fh:
                csv.writer(fh).writerows([rows[0]] + [r for r in rows[1:] if r[0] == rows[1][0]])
        assert main(["fit", "--data", str(src), "--config", str(cfg), "--model", model,
                     "--out", str(fit)]) == 0
        reg = tmp_path / f"reg_{model}"
        assert main(["register", "--chain", str(fit), "--data", str(src), "--grid", "25",
                     "--out", str(reg)]) == 0
        common = read_csv(reg / "common.csv")
        assert common[0] == ["group", "s", "mean", "lower", "upper"]
        assert read_csv(reg / "registered.csv")[0] == ["group_id", "curve_id", "s", "y"]
        warps = read_csv(reg / "warps.csv")
        assert warps[0] == ["group_id", "curve_id", "t", "h"]
        for row in common[1:]:
            assert float(row[3]) <= float(row[2]) + 1e-12 <= float(row[4]) + 2e-12
        diag = tmp_path / f"diag_{model}"
        assert main(["diagnose", "--chain", str(fit), "--trace", "lambda", "--out",
                     str(diag)]) == 0
        traces = read_csv(diag / "traces.csv")
        assert traces[0] == ["iteration", "lambda"] and len(traces) == 1 + 20
        chain = Chain.load(fit)
        assert [float(r[1]) for r in traces[1:]] == list(chain.draws["lambda"])


def test_cli_rerun_is_byte_identical(tmp_path):
    cfg = _config_file(tmp_path / "run.cfg")
    outputs = []
    for run in ("a", "b"):
        base = tmp_path / run
        main(["simulate", "--setting", "2", "--seed", "9", "--out", str(base / "sim")])
        main(["fit", "--data", str(base / "sim" / "data.csv"), "--config", str(cfg),
              "--model", "main", "--out", str(base / "fit")])
        main(["register", "--chain", str(base / "fit"), "--data", str(base / "sim" / "data.csv"),
              "--grid", "11", "--out", str(base / "reg")])
        main(["compare", "--replicas", "1", "--settings", "2", "--config", str(cfg), "--out",
              str(base / "table.csv")])
        outputs.append([(base / f).read_bytes() for f in
                        ("sim/data.csv", "reg/common.csv", "reg/warps.csv", "table.csv")])
    assert outputs[0] == outputs[1]


def test_cli_errors(tmp_path, capsys):
    assert main(["fit", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("group_id,curve_id,t,y\nA,1,0,1\nA,1,zz,2\n")
    assert main(["fit", "--data", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["compare", "--replicas", "1", "--settings", "x", "--out",
                 str(tmp_path / "t.csv")]) == 2
