"""Command-line interface.

``rescaled-gp <command> --config FILE [--seed N] [--out DIR] [--threads N]``

Commands: ``sample-prior``, ``fit``, ``verify``, ``rates``.  The config is
a JSON object whose ``command`` key (if present) must name the subcommand.
The process exits with status 0 iff every asserted check passes; the
checks are listed in ``checks.json`` in the output directory.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import io, verify
from .bandwidth import EnvelopePrior, GammaRootPrior
from .experiments import (
    AdaptationReport,
    ExperimentConfig,
    RateReport,
    make_config_truth,
    rate_experiment,
    simulate_data,
)
from .posterior import (
    ChainConfig,
    Classification,
    Density,
    Regression,
    _transform,
    posterior_functional,
    run_chain,
)
from .spectral import GridSpec, default_n_features, rescale, sample_features

log = logging.getLogger("rescaled_gp")

COMMANDS = ("sample-prior", "fit", "verify", "rates")

SAMPLE_PRIOR_KEYS = {"command", "d", "prior", "n_draws", "n_paths", "n_features", "grid_k", "seed"}
FIT_KEYS = {"command", "setting", "d", "data", "simulate", "prior", "chain", "sigma_interval",
            "link", "grid_k", "seed"}
SIMULATE_KEYS = {"truth", "n", "sigma0"}
VERIFY_KEYS = {"command", "groups", "n_paths", "seed"}
RATES_KEYS = {"command", "seed", "defaults", "experiments", "adaptation"}
ADAPT_KEYS = {"rough", "smooth", "min_gap"}


def _prior_from(d: int, spec: dict):
    io.check_keys(spec, {"shape", "rate", "p", "q", "D"}, "prior")
    if {"p", "q", "D"} & set(spec):
        return EnvelopePrior(d=d, p=spec.get("p", 0.0), q=spec.get("q", 0.0), D=spec.get("D", 1.0))
    return GammaRootPrior(d=d, shape=spec.get("shape", 1.0), rate=spec.get("rate", 1.0))


def _seed(cfg: dict, override: Optional[int]) -> int:
    return int(override) if override is not None else int(cfg.get("seed", 0))


# ---------------------------------------------------------------------------
# commands


def cmd_sample_prior(cfg: dict, seed: int, out: Path, threads: int) -> dict:
    """Bandwidth draws (``prior_bandwidth.csv``) and rescaled paths on a
    dyadic grid (``prior_paths.csv``, long format ``draw, A, t1..td, value``)."""
    io.check_keys(cfg, SAMPLE_PRIOR_KEYS, "sample-prior")
    d = int(cfg.get("d", 1))
    prior = _prior_from(d, cfg.get("prior", {}))
    n_draws, n_paths = int(cfg.get("n_draws", 10_000)), int(cfg.get("n_paths", 20))
    ss = np.random.SeedSequence(seed)
    s_bw, s_path = ss.spawn(2)
    A = prior.sample(np.random.default_rng(s_bw), size=n_draws)
    io.write_csv(out / "prior_bandwidth.csv", ("draw", "A"), list(zip(range(n_draws), A)))
    grid = GridSpec.dyadic(int(cfg.get("grid_k", 6 if d == 1 else 4)), d)
    pts = grid.points()
    rows, finite = [], True
    for i, cs in enumerate(s_path.spawn(n_paths)):
        r_a, r_f = cs.spawn(2)
        a = float(prior.sample(np.random.default_rng(r_a)))
        fe = sample_features(cfg.get("n_features") or default_n_features(d),
                             np.random.default_rng(r_f), d)
        vals = rescale(fe, a)(pts)
        finite &= bool(np.all(np.isfinite(vals)))
        rows.extend((i, a, *p, v) for p, v in zip(pts, vals))
    header = ("draw", "A") + tuple(f"t{j + 1}" for j in range(d)) + ("value",)
    io.write_csv(out / "prior_paths.csv", header, rows)
    ks = stats.kstest(A, prior.cdf)
    return {"bandwidth_ks_pvalue_above_0.001": bool(ks.pvalue > 1e-3),
            "bandwidth_draws_positive": bool(np.all(A > 0)),
            "paths_finite": finite}


def cmd_fit(cfg: dict, seed: int, out: Path, threads: int, config_dir: Path) -> dict:
    """Run one chain; write draws, pointwise summary and diagnostics."""
    io.check_keys(cfg, FIT_KEYS, "fit")
    d = int(cfg.get("d", 1))
    sig = tuple(cfg.get("sigma_interval", (0.1, 10.0)))
    setting = {"density": Density(), "regression": Regression(*sig),
               "classification": Classification(cfg.get("link", "logistic"))}[
        cfg.get("setting", "regression")]
    prior = _prior_from(d, cfg.get("prior", {}))
    s_data, s_chain = np.random.SeedSequence(seed).spawn(2)
    if cfg.get("data") is not None:
        data = io.read_dataset(config_dir / cfg["data"], setting, d)
    else:
        sim = cfg.get("simulate")
        if sim is None:
            raise io.SchemaError("fit: give either 'data' or 'simulate'")
        io.check_keys(sim, SIMULATE_KEYS, "fit.simulate", required={"truth", "n"})
        truth = make_config_truth(ExperimentConfig(
            setting=cfg.get("setting", "regression"), d=d, truth=sim["truth"]))
        data = simulate_data(truth, setting, int(sim["n"]), s_data, float(sim.get("sigma0", 0.5)))
        io.write_dataset(data, out / "data.csv")
    chain_kw = dict(cfg.get("chain", {}))
    io.check_keys(chain_kw, ChainConfig.__dataclass_fields__, "fit.chain")
    chain_kw["seed"] = int(s_chain.generate_state(1, dtype=np.uint32)[0])
    chain = run_chain(ChainConfig(**chain_kw), data, setting, prior)
    grid = GridSpec.dyadic(int(cfg.get("grid_k", 6 if d == 1 else 4)), d)
    pts = grid.points()
    vals = chain.values(pts)
    sigma = chain.sigma if chain.sigma is not None else np.full(len(chain), math.nan)
    header = ("sample", "A", "sigma") + tuple(f"w{j}" for j in range(pts.shape[0]))
    io.write_csv(out / "posterior_draws.csv", header,
                 [(i, a, s, *v) for i, (a, s, v) in enumerate(zip(chain.scale, sigma, vals))])
    io.write_csv(out / "grid.csv", tuple(f"t{j + 1}" for j in range(d)), [list(p) for p in pts])
    mean, lo, hi = posterior_functional(chain, grid, setting)
    io.write_csv(out / "posterior_summary.csv",
                 tuple(f"t{j + 1}" for j in range(d)) + ("mean", "lower", "upper"),
                 [(*p, m, l, h) for p, m, l, h in zip(pts, mean, lo, hi)])
    io.write_json(out / "diagnostics.json", {**chain.diagnostics, "n": data.n,
                                              "config": cfg, "seed": seed})
    checks = {"values_finite": bool(np.all(np.isfinite(vals)))}
    if isinstance(setting, Density):
        mass = _transform(vals, setting, grid) @ grid.trapezoid_weights()
        checks["density_draws_normalised"] = bool(np.all(np.abs(mass - 1) < 1e-6))
    acc = chain.diagnostics["acceptance_bandwidth"]
    if not math.isnan(acc):
        checks["bandwidth_acceptance_above_0.02"] = bool(acc > 0.02)
    return checks


def cmd_verify(cfg: dict, seed: int, out: Path, threads: int) -> dict:
    io.check_keys(cfg, VERIFY_KEYS, "verify")
    checks = verify.run_suite(cfg.get("groups"), seed, int(cfg.get("n_paths", 100_000)))
    io.write_csv(out / "lemma_suite.csv", verify.COLUMNS, verify.check_rows(checks))
    return {c.check_id: bool(c.passed) for c in checks}


def rates_experiments(cfg: dict, seed: Optional[int] = None) -> tuple:
    """Parse a ``rates`` config into experiment configs and adaptation pairs."""
    io.check_keys(cfg, RATES_KEYS, "rates", required={"experiments"})
    defaults = dict(cfg.get("defaults", {}))
    master = seed if seed is not None else cfg.get("seed")
    exps = []
    for i, spec in enumerate(cfg["experiments"]):
        merged = {**defaults, **spec}
        merged["chain"] = {**defaults.get("chain", {}), **spec.get("chain", {})}
        if master is not None:
            merged["seed"] = int(master)
        exps.append(io.load_config(merged))
    names = [e.name for e in exps]
    if len(set(names)) != len(names):
        raise io.SchemaError("rates: experiment names must be unique")
    pairs = []
    for j, p in enumerate(cfg.get("adaptation", [])):
        io.check_keys(p, ADAPT_KEYS, f"rates.adaptation[{j}]", required={"rough", "smooth"})
        for k in ("rough", "smooth"):
            if p[k] not in names:
                raise io.SchemaError(f"rates.adaptation[{j}]: no experiment named {p[k]!r}")
        r, s = exps[names.index(p["rough"])], exps[names.index(p["smooth"])]
        if (r.prior, r.chain, r.setting, r.d) != (s.prior, s.chain, s.setting, s.d):
            raise io.SchemaError(f"rates.adaptation[{j}]: prior, chain and setting must match")
        pairs.append((p["rough"], p["smooth"], float(p.get("min_gap", 0.05))))
    return exps, pairs


def write_rate_reports(out: Path, reports: Sequence[RateReport],
                       adaptations: Sequence[AdaptationReport] = ()) -> None:
    io.write_csv(out / "rate_cells.csv", RateReport.CELL_COLUMNS,
                 [row for r in reports for row in r.cell_rows()])
    io.write_csv(out / "rate_summary.csv", RateReport.SUMMARY_COLUMNS,
                 [r.summary_row() for r in reports])
    if adaptations:
        io.write_csv(out / "adaptation.csv", AdaptationReport.SUMMARY_COLUMNS,
                     [a.summary_row() for a in adaptations])


def cmd_rates(cfg: dict, seed: Optional[int], out: Path, threads: int) -> dict:
    exps, pairs = rates_experiments(cfg, seed)
    reports = {}
    for e in exps:
        log.info("running %s (%s, %s)", e.name, e.setting, e.truth["id"])
        reports[e.name] = rate_experiment(e, threads)
    adapt = [AdaptationReport(reports[r], reports[s], reports[r].slope - reports[s].slope, g)
             for r, s, g in pairs]
    write_rate_reports(out, list(reports.values()), adapt)
    checks = {}
    for name, rep in reports.items():
        checks[f"{name}:risk_finite"] = True
        for k, v in rep.checks.items():
            checks[f"{name}:{k}"] = bool(v)
    for a in adapt:
        checks[f"adaptation:{a.rough.config.name}<{a.smooth.config.name}:slope_gap"] = \
            bool(a.slope_ordered)
    return checks


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rescaled-gp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, type=Path, help="JSON config file")
        s.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        s.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        s.add_argument("--threads", type=int, default=1, help="worker processes")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = io.read_json(args.config)
        if cfg.get("command", args.command) != args.command:
            raise io.SchemaError(f"config is for {cfg['command']!r}, not {args.command!r}")
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "sample-prior":
            checks = cmd_sample_prior(cfg, _seed(cfg, args.seed), out, args.threads)
        elif args.command == "fit":
            checks = cmd_fit(cfg, _seed(cfg, args.seed), out, args.threads,
                             args.config.resolve().parent)
        elif args.command == "verify":
            checks = cmd_verify(cfg, _seed(cfg, args.seed), out, args.threads)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("default")
                checks = cmd_rates(cfg, args.seed, out, args.threads)
    except (io.SchemaError, ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    io.write_json(out / "checks.json", checks)
    failed = [k for k, v in checks.items() if not v]
    for k in failed:
        print(f"FAIL {k}", file=sys.stderr)
    print(f"{args.command}: {len(checks) - len(failed)}/{len(checks)} checks passed")
    return 0 if not failed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
