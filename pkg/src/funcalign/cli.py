"""Command-line entry point.

Subcommands::

    simulate --setting {1|2} --seed S --out DIR
    fit      --data FILE [--config FILE] [--model {main|baseline}] --out DIR
    register --chain DIR --data FILE --grid N --out DIR
    compare  --replicas R --settings 1,2 [--config FILE] --out table.csv
    diagnose --chain DIR [--trace NAME ...] --out DIR

Output CSV headers:

``common.csv``      group, s, mean, lower, upper
``registered.csv``  group_id, curve_id, s, y
``warps.csv``       group_id, curve_id, t, h
``acceptance.csv``  group, curve, j, accepted, proposed, rate
``traces.csv``      iteration, <one column per traced coordinate>
``rhat.csv``        name, rhat   (``NA`` when undefined)
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .baseline import baseline_fit
from .basis import make_basis
from .chain import Chain
from .errors import ConfigurationError, ParseError, UsageError
from .harness import RunConfig, compare_models, diagnose
from .io import curve_ids, load_dataset, save_dataset, save_truth
from .model import Bases, denormalize_time, make_bases, normalize_time
from .sampler import posterior_summary, run_chain
from .simulate import simulate_setting1, simulate_setting2

logger = logging.getLogger("funcalign")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _num(x):
    return repr(float(x))


def _fmt(x):
    return "NA" if not np.isfinite(x) else _num(x)


def cmd_simulate(args):
    sim = {1: simulate_setting1, 2: simulate_setting2}[args.setting]
    dataset, truth = sim(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, out / "data.csv")
    save_truth(truth, out / "truth.npz")
    logger.info("wrote %d curves to %s", dataset.n_curves, out)


def _load_config(path, model):
    base = RunConfig.simulation() if path is None and model == "sim" else None
    if path is None:
        return base or RunConfig()
    return RunConfig.from_file(path, base=base)


def cmd_fit(args):
    config = _load_config(args.config, args.model)
    raw = load_dataset(args.data)
    dataset = normalize_time(raw)
    out = Path(args.out)
    if args.model == "baseline":
        bases = Bases(make_basis(config.p), None, make_basis(config.q))
        chain = baseline_fit(dataset, config.baseline_hyper(bases.h), bases, config.sampler(),
                             partial_path=out)
    else:
        bases = config.bases()
        chain = run_chain(dataset, config.hyper(bases.h), bases, config.sampler(),
                          partial_path=out)
    chain.meta["domain"] = [raw.t0, raw.tf]
    chain.save(out)
    (out / "config.txt").write_text(config.to_text())
    logger.info("stored %d draws in %s", chain.n_draws, out)


def _bases_from_chain(chain):
    dims = chain.meta["dims"]
    if chain.model == "baseline":
        return Bases(make_basis(dims["p"]), None, make_basis(dims["q"]))
    return make_bases(dims["p"], dims["k"], dims["q"])


def cmd_register(args):
    chain = Chain.load(args.chain)
    domain = chain.meta.get("domain")
    dataset = load_dataset(args.data, domain=domain)
    domain = (dataset.t0, dataset.tf)
    dataset = normalize_time(dataset)
    if list(dataset.group_sizes) != list(chain.meta["group_sizes"]):
        raise UsageError("dataset does not match the chain's group sizes")
    if args.grid < 2:
        raise UsageError("--grid needs at least 2 points")
    bases = _bases_from_chain(chain)
    grid = np.linspace(0.0, 1.0, args.grid)
    summary = posterior_summary(chain, bases, dataset, grid, level=args.level)
    s = denormalize_time(grid, domain)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "common.csv", ["group", "s", "mean", "lower", "upper"],
               [(g, _num(s[n]), _num(summary.common_mean[g, n]), _num(summary.common_lower[g, n]),
                 _num(summary.common_upper[g, n]))
                for g in range(summary.common_mean.shape[0]) for n in range(grid.size)])
    reg_rows, warp_rows = [], []
    for c, (g, i, _) in enumerate(dataset.curves()):
        gid, cid = curve_ids(dataset, g, i)
        h = denormalize_time(summary.warps[c], domain)
        for n in range(grid.size):
            reg_rows.append((gid, cid, _num(s[n]), _num(summary.registered[c][n])))
            warp_rows.append((gid, cid, _num(s[n]), _num(h[n])))
    _write_csv(out / "registered.csv", ["group_id", "curve_id", "s", "y"], reg_rows)
    _write_csv(out / "warps.csv", ["group_id", "curve_id", "t", "h"], warp_rows)


def cmd_compare(args):
    config = _load_config(args.config, "sim")
    try:
        settings = [int(s) for s in args.settings.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--settings must be a comma list of 1 and 2, got {args.settings!r}") from None
    compare_models(args.replicas, settings, config, out=args.out, seed0=args.seed)


def cmd_diagnose(args):
    chain = Chain.load(args.chain)
    diag = diagnose(chain, names=args.trace or None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "acceptance.csv", ["group", "curve", "j", "accepted", "proposed", "rate"],
               [(g, i, j, a, p, _fmt(r)) for g, i, j, a, p, r in diag.acceptance])
    names = list(diag.traces)
    _write_csv(out / "traces.csv", ["iteration"] + names,
               [[int(it)] + [_num(diag.traces[n][s]) for n in names]
                for s, it in enumerate(chain.iterations)])
    _write_csv(out / "rhat.csv", ["name", "rhat"], [(n, _fmt(v)) for n, v in diag.rhat.items()])
    if diag.nonfinite:
        logger.warning("%d proposals had non-finite acceptance ratios", diag.nonfinite)


def build_parser():
    parser = argparse.ArgumentParser(prog="funcalign",
                                     description="Bayesian smoothing and registration of curves")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a simulated dataset and its truth")
    p.add_argument("--setting", type=int, choices=(1, 2), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run the sampler on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--model", choices=("main", "baseline"), default="main")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("register", help="export common curves, warps and registered curves")
    p.add_argument("--chain", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("compare", help="alignment error of both models on simulated replicas")
    p.add_argument("--replicas", type=int, required=True)
    p.add_argument("--settings", default="1,2")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0, help="offset added to every replica seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("diagnose", help="acceptance rates, traces and split R-hat")
    p.add_argument("--chain", required=True)
    p.add_argument("--trace", action="append", help="coordinate to trace, e.g. 'beta[0,3]'")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except (ConfigurationError, ParseError, UsageError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
