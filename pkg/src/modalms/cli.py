"""Command-line entry point: ``modalms {fit,impute,bandwidth,simulate}``.

Exit status is 0 on success, 1 for data or numerical failures and 2 for
usage errors. Every run writes ``<command>_manifest.json`` next to its data
files with the resolved settings, input digest and output digests.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bandwidth import BandwidthGrid, default_grid, select_bandwidths
from .dataset import Dataset, DatasetError, load_dataset
from .imputation import impute_random_draw, impute_single, multiple_imputation_curve
from .kernel_density import Bandwidths
from .meanshift import MeanShiftConfig, modal_curve
from .missing import KINDS, fit_propensity, weights_for
from .simulate import (ESTIMATORS, ExperimentConfig, ScenarioSpec, run_experiment,
                       write_config_json, write_long_csv, write_summary_csv)

log = logging.getLogger("modalms")
KINDS_CLI = list(KINDS)


class UsageError(Exception):
    pass


def _g(v: float) -> str:
    return f"{v:.6g}"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    try:
        return max(1, int(os.environ.get("MODALMS_THREADS", "1")))
    except ValueError:
        return 1


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _write_manifest(out: Path, command: str, argv: list[str], config: dict, seed,
                    inputs: list[Path], outputs: list[Path], started: datetime) -> Path:
    manifest = {
        "command": command,
        "argv": argv,
        "config": config,
        "tool_version": __version__,
        "master_seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {p.name: _sha256(p) for p in outputs},
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    path = out / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str), encoding="utf-8")
    return path


def _load(args) -> Dataset:
    covs = [c.strip() for c in args.covariates.split(",") if c.strip()]
    return load_dataset(args.data, covs, args.response)


def _meanshift_cfg(args) -> MeanShiftConfig:
    return MeanShiftConfig(n_starts=args.n_starts, max_iter=args.max_iter, tol=args.tol,
                           prune_fraction=args.prune)


def _mesh(ds: Dataset, size: int) -> np.ndarray:
    if ds.d != 1:
        raise UsageError("--mesh builds an equispaced grid and needs a single covariate")
    return np.linspace(ds.X.min(), ds.X.max(), size)


def _bandwidths(args, ds, model, cfg, threads) -> Bandwidths:
    if (args.h1 is None) != (args.h2 is None):
        raise UsageError("give both --h1 and --h2, or neither to select them by cross-validation")
    if args.h1 is not None:
        return Bandwidths(args.h1, args.h2)
    bw, _ = select_bandwidths(ds, model, default_grid(ds), None, cfg, threads)
    log.info("cross-validated bandwidths: h1=%g h2=%g", bw.h1, bw.h2)
    return bw


def cmd_fit(args, argv) -> int:
    started = datetime.now(timezone.utc)
    est = args.estimator.upper()
    if est == "W" and args.propensity is None:
        raise UsageError("--estimator w requires --propensity")
    ds = _load(args)
    threads = _threads(args)
    cfg = _meanshift_cfg(args)
    model = fit_propensity(ds, args.propensity) if args.propensity else None
    bw = _bandwidths(args, ds, model, cfg, threads)
    mesh = _mesh(ds, args.mesh)
    if est in ("C", "S", "W"):
        curve = modal_curve(ds, weights_for(est, ds, model), bw, mesh, cfg, threads)
    elif est == "SI":
        filled = impute_single(ds, bw, cfg, threads).completed
        curve = modal_curve(filled, np.ones(ds.n), bw, mesh, cfg, threads)
    else:
        curve = multiple_imputation_curve(ds, bw, cfg, args.imputations, mesh, args.seed,
                                          threads=threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "fit_curve.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.covariate_names, "mode", "density", "estimator"])
        for row in curve.to_rows():
            w.writerow([*map(_g, row), est])
    config = {"estimator": est, "h1": bw.h1, "h2": bw.h2, "mesh": args.mesh,
              "propensity": args.propensity, "imputations": args.imputations,
              "meanshift": vars(cfg.resolve(ds, bw)), "flagged_points": curve.n_flagged}
    _write_manifest(out, "fit", argv, config, args.seed, [Path(args.data)], [path], started)
    return 0


def cmd_impute(args, argv) -> int:
    started = datetime.now(timezone.utc)
    ds = _load(args)
    threads = _threads(args)
    cfg = _meanshift_cfg(args)
    bw = _bandwidths(args, ds, None, cfg, threads)
    if args.method == "si":
        imp = impute_single(ds, bw, cfg, threads)
    else:
        imp = impute_random_draw(ds, bw, cfg, args.seed, threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "impute_data.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.covariate_names, ds.response_name, "provenance"])
        for xi, yi, prov in zip(ds.X, imp.filled_y, imp.provenance):
            w.writerow([*map(_g, xi), _g(yi), prov])
    config = {"method": args.method, "h1": bw.h1, "h2": bw.h2,
              "meanshift": vars(cfg.resolve(ds, bw)), "imputed_rows": int(ds.n_missing)}
    _write_manifest(out, "impute", argv, config, args.seed, [Path(args.data)], [path], started)
    return 0


def cmd_bandwidth(args, argv) -> int:
    started = datetime.now(timezone.utc)
    ds = _load(args)
    threads = _threads(args)
    cfg = _meanshift_cfg(args)
    grid = default_grid(ds)
    grid = BandwidthGrid(args.h1_grid or grid.h1_values, args.h2_grid or grid.h2_values)
    model = fit_propensity(ds, args.propensity) if args.propensity else None
    bw, table = select_bandwidths(ds, model, grid, None, cfg, threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "bandwidth_scores.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["h1", "h2", "cv", "skipped_terms"])
        for r in table:
            w.writerow([_g(r.h1), _g(r.h2), _g(r.cv), r.skipped_terms])
    best = next(r for r in table if r.h1 == bw.h1 and r.h2 == bw.h2)
    config = {"grid": {"h1": list(grid.h1_values), "h2": list(grid.h2_values)},
              "propensity": args.propensity, "meanshift": vars(cfg)}
    _write_manifest(out, "bandwidth", argv, config, None, [Path(args.data)], [path], started)
    print(json.dumps({"h1": bw.h1, "h2": bw.h2, "cv": best.cv}))
    return 0


def cmd_simulate(args, argv) -> int:
    started = datetime.now(timezone.utc)
    threads = _threads(args)
    if (args.h1 is None) != (args.h2 is None):
        raise UsageError("give both --h1 and --h2 for fixed bandwidths")
    policy = "fixed" if args.h1 is not None else f"cv-{args.cv}"
    try:
        spec = ScenarioSpec(args.scenario, args.k, args.a, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    models = [None if m.lower() == "none" else m.upper() for m in args.missing.split(",")]
    estimators = tuple(e.strip().upper() for e in args.estimators.split(","))
    results = []
    for m in models:
        try:
            cfg = ExperimentConfig(spec, m, estimators, args.replicates, args.mesh, policy,
                                   args.h1, args.h2, args.propensity_mode, args.seed,
                                   args.imputations)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        log.info("running scenario %d, model %s", spec.id, m)
        results.append(run_experiment(cfg, threads, progress=args.verbose))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "simulate_summary.csv", out / "simulate_long.csv", out / "simulate_config.json"]
    write_summary_csv(results, paths[0])
    write_long_csv(results, paths[1])
    write_config_json(results, paths[2])
    _write_manifest(out, "simulate", argv, {"runs": [r.config.to_dict() for r in results]},
                    args.seed, [], paths, started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modalms", description="Modal regression with missing responses")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        if data:
            sp.add_argument("--data", required=True, help="input CSV with a header row")
            sp.add_argument("--covariates", required=True, help="comma-separated covariate columns")
            sp.add_argument("--response", required=True, help="response column (empty or NA = missing)")
            sp.add_argument("--n-starts", type=int, default=30)
            sp.add_argument("--max-iter", type=_positive_int, default=500)
            sp.add_argument("--tol", type=float, default=None)
            sp.add_argument("--prune", type=float, default=0.0,
                            help="drop modes below this fraction of the densest mode at each point")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $MODALMS_THREADS or 1)")
        sp.add_argument("-v", "--verbose", action="store_true")

    fit = sub.add_parser("fit", help="estimate a modal curve")
    common(fit)
    fit.add_argument("--estimator", choices=["c", "s", "w", "si", "mi"], default="s")
    fit.add_argument("--h1", type=float)
    fit.add_argument("--h2", type=float)
    fit.add_argument("--mesh", type=_positive_int, default=200)
    fit.add_argument("--propensity", choices=KINDS_CLI)
    fit.add_argument("--imputations", type=_positive_int, default=20)
    fit.add_argument("--seed", type=int, default=0)

    imp = sub.add_parser("impute", help="fill missing responses")
    common(imp)
    imp.add_argument("--method", choices=["si", "mi-draw"], default="si")
    imp.add_argument("--h1", type=float)
    imp.add_argument("--h2", type=float)
    imp.add_argument("--seed", type=int, default=0)

    bw = sub.add_parser("bandwidth", help="cross-validated bandwidth selection")
    common(bw)
    bw.add_argument("--h1-grid", type=_floats)
    bw.add_argument("--h2-grid", type=_floats)
    bw.add_argument("--propensity", choices=KINDS_CLI)

    sim = sub.add_parser("simulate", help="Monte Carlo benchmark")
    common(sim, data=False)
    sim.add_argument("--scenario", type=int, choices=[1, 2, 3], default=1)
    sim.add_argument("--k", type=float)
    sim.add_argument("--a", type=float, default=0.0)
    sim.add_argument("--n", type=_positive_int, default=200)
    sim.add_argument("--missing", default="m1", help="comma-separated subset of m1..m4 or none")
    sim.add_argument("--estimators", default=",".join(ESTIMATORS).lower())
    sim.add_argument("--replicates", type=_positive_int, default=100)
    sim.add_argument("--mesh", type=_positive_int, default=200)
    sim.add_argument("--cv", choices=["per-replicate", "pilot"], default="pilot")
    sim.add_argument("--h1", type=float)
    sim.add_argument("--h2", type=float)
    sim.add_argument("--propensity-mode", choices=["known", "logistic", "kernel"], default="known")
    sim.add_argument("--imputations", type=_positive_int, default=20)
    sim.add_argument("--seed", type=int, default=0)
    return p


COMMANDS = {"fit": cmd_fit, "impute": cmd_impute, "bandwidth": cmd_bandwidth, "simulate": cmd_simulate}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"modalms: error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, ValueError, RuntimeError, OSError) as exc:
        row = getattr(exc, "row", None)
        where = f" (row {row})" if row is not None else ""
        print(f"modalms: {type(exc).__name__}{where}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
