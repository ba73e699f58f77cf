"""Command-line entry point: ``sparseddd {simulate,fit,evaluate,report,selftest,benchmark}``.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .basis import BasisError, BasisSet, build_basis, project_snapshots
from .domain import Dataset, DatasetError, grid_path_for, read_samples_csv, validate_dataset, write_grid, write_samples_csv
from .expmat import SeriesNotConverged
from .model import GeneratorModel, ModelError, count_parameters, evaluate_errors
from .optimize import FitError, FitOptions
from .pipeline import (
    METHODS,
    BenchmarkConfig,
    derive_seed,
    fit_dataset,
    format_table,
    run_benchmark,
)
from .quadrature import cached_mass_matrix
from .simulate import DATASET_ROLES, SdeConfig, build_datasets, simulate_paths

logger = logging.getLogger("sparseddd")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _resolve_dataset(name: str, data_dir) -> Path:
    p = Path(name)
    if p.suffix == ".csv":
        return p
    return Path(data_dir) / f"{name}.csv"


def _load_dataset(name, data_dir):
    path = _resolve_dataset(name, data_dir)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    ds = read_samples_csv(path, name=path.stem)
    findings = validate_dataset(ds)
    if findings:
        raise DatasetError(f"{path}: " + "; ".join(findings))
    return ds


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.config:
        sde = SdeConfig.from_dict(json.loads(Path(args.config).read_text()))
    else:
        sde = SdeConfig()
    sde = SdeConfig.from_dict({**sde.to_dict(), "n_paths": args.n_paths, "seed": derive_seed(args.seed, "simulate")})
    parent = simulate_paths(sde)
    files = {}
    grid = parent.grid
    targets = {"parent": Dataset("parent", trajectories=parent)}
    n_traj = min(args.n_trajectories, parent.K)
    if n_traj < args.n_trajectories:
        logger.warning("only %d paths; the trajectory dataset keeps all of them", parent.K)
    targets.update(build_datasets(parent, derive_seed(args.seed, "datasets"), n_trajectories=n_traj,
                                  n_integrated=min(10, n_traj)))
    for name, ds in targets.items():
        csv_path = out / f"{name}.csv"
        write_samples_csv(csv_path, ds, grid)
        write_grid(grid_path_for(csv_path), grid)
        files[csv_path.name] = sha256_file(csv_path)
        files[grid_path_for(csv_path).name] = sha256_file(grid_path_for(csv_path))
    manifest = {"seed": args.seed, "sde": sde.to_dict(),
                "dataset_seed": derive_seed(args.seed, "datasets"), "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


def _basis_for(args, out: Path, dataset) -> BasisSet:
    if args.basis:
        return BasisSet.load(args.basis)
    basis_path = out / "basis.json"
    if basis_path.exists():
        basis = BasisSet.load(basis_path)
        if basis.N != args.n_basis:
            logger.warning("reusing %s with %d functions (--n-basis %d ignored)", basis_path, basis.N, args.n_basis)
        return basis
    source = dataset
    if args.basis_data:
        source = _load_dataset(args.basis_data, args.data_dir)
    basis = build_basis(source.all_points(), args.n_basis, derive_seed(args.seed, "basis"))
    basis.save(basis_path)
    return basis


def cmd_fit(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _load_dataset(args.dataset, args.data_dir)
    basis = _basis_for(args, out, dataset)
    M = cached_mass_matrix(basis, args.qmc_nodes, out / "cache")
    options = FitOptions(max_iters=args.max_iters, lam=args.lam, seed=derive_seed(args.seed, "fit"))
    stem = f"{args.method}_{dataset.name}"
    t0 = time.perf_counter()
    try:
        model, report = fit_dataset(dataset, args.method, basis, M, options)
    except FitError as exc:
        if exc.model is not None:
            exc.model.save(out / f"{stem}.failed.model.json")
        raise
    wall = time.perf_counter() - t0
    model.save(out / f"{stem}.model.json")
    payload = {"method": args.method, "dataset": dataset.name, "qmc_nodes": args.qmc_nodes,
               "lambda": args.lam, **report.to_dict()}
    (out / f"{stem}.report.json").write_text(json.dumps(payload, indent=2) + "\n")
    (out / f"{stem}.timing.json").write_text(json.dumps({"wall_time": wall}) + "\n")
    print(f"{args.method} on {dataset.name}: {report.parameter_count} parameters, "
          f"{report.dof_count} dof, mean relative error {report.mean_error:.4f} "
          f"({report.iterations} iterations, {wall:.1f}s)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model_path = Path(args.model)
    model = GeneratorModel.load(model_path)
    basis_path = Path(args.basis) if args.basis else model_path.parent / "basis.json"
    basis = BasisSet.load(basis_path)
    if basis.content_hash() != model.basis_hash:
        raise BasisError(f"basis {basis_path} does not match the model's basis")
    M = cached_mass_matrix(basis, args.qmc_nodes, model_path.parent / "cache")
    if model.mass_hash and M.content_hash() != model.mass_hash:
        raise BasisError("mass matrix does not match the model (different --qmc-nodes?)")
    test = _load_dataset(args.dataset, args.data_dir)
    if test.snapshots is None:
        raise DatasetError("evaluation needs a snapshot dataset")
    series = project_snapshots(test.snapshots, basis)
    errors = evaluate_errors(model, series, M)
    name = model_path.name.removesuffix(".model.json")
    out_csv = Path(args.out) if args.out else model_path.with_name(f"{name}.errors.csv")
    with open(out_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "relative_error", "two_plus_log10_error"])
        for t, e in zip(test.snapshots.grid.times, errors):
            w.writerow([repr(float(t)), repr(float(e)), repr(float(2 + np.log10(e))) if e > 0 else "-inf"])
    method, _, train = name.partition("_")
    n, dof = count_parameters(model)
    summary = {"method": method, "dataset": train, "test_dataset": test.name,
               "mean_error": float(np.mean(errors)), "per_time_errors": [float(e) for e in errors],
               "parameter_count": n, "dof_count": dof}
    out_csv.with_suffix(".json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"{name}: mean relative error on {test.name} = {summary['mean_error']:.4f} -> {out_csv}")
    return EXIT_OK


def cmd_report(args) -> int:
    cells, params = {}, {}
    for path in args.reports:
        payload = json.loads(Path(path).read_text())
        key = (payload["dataset"], payload["method"])
        cells[key] = payload["mean_error"]
        params[payload["method"]] = (payload["parameter_count"], payload["dof_count"])
    roles = [r for r in DATASET_ROLES if any(k[0] == r for k in cells)] or list(DATASET_ROLES)
    roles += sorted({k[0] for k in cells} - set(roles))
    if args.full:
        roles = list(DATASET_ROLES) + [r for r in roles if r not in DATASET_ROLES]
    text = format_table(cells, params, roles=roles)
    print(text)
    if args.out:
        out = Path(args.out)
        out.with_suffix(".txt").write_text(text + "\n")
        with open(out.with_suffix(".csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dataset"] + list(METHODS))
            for role in roles:
                w.writerow([role] + [("" if cells.get((role, m)) is None else repr(cells[role, m])) for m in METHODS])
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run

    return EXIT_OK if run() else EXIT_NUMERICAL


def cmd_benchmark(args) -> int:
    cfg = BenchmarkConfig(seed=args.seed, n_paths=args.n_paths, n_basis=args.n_basis,
                          qmc_nodes=args.qmc_nodes, lam=args.lam, max_iters=args.max_iters)
    res = run_benchmark(cfg)
    text = format_table(res.table(), res.parameter_counts())
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "table.txt").write_text(text + "\n")
        with open(out / "per_time_errors.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dataset", "method", "t", "relative_error", "two_plus_log10_error"])
            for (role, method), errs in res.test_errors.items():
                for t, e in zip(res.test_times, errs):
                    w.writerow([role, method, repr(float(t)), repr(float(e)),
                                repr(float(2 + np.log10(e))) if e > 0 else "-inf"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparseddd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fit_flags=False):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        if fit_flags:
            p.add_argument("--n-basis", type=int, default=30)
            p.add_argument("--qmc-nodes", type=int, default=100_000)
            p.add_argument("--lambda", dest="lam", type=float, default=0.01)
            p.add_argument("--max-iters", type=int, default=5000)

    p = sub.add_parser("simulate", help="simulate the bistable SDE and write the four datasets")
    common(p)
    p.add_argument("--n-paths", type=int, default=1000)
    p.add_argument("--n-trajectories", type=int, default=100)
    p.add_argument("--config", default=None, help="SDE config JSON")
    p.set_defaults(func=cmd_simulate, out_default="data")

    p = sub.add_parser("fit", help="fit DDD or Sparse DDD to one dataset")
    common(p, fit_flags=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--dataset", required=True, help="dataset role or CSV path")
    p.add_argument("--data-dir", default="data")
    p.add_argument("--basis", default=None, help="basis JSON (default: build by k-means)")
    p.add_argument("--basis-data", default=None, help="dataset to cluster for the basis")
    p.set_defaults(func=cmd_fit, out_default="fits")

    p = sub.add_parser("evaluate", help="per-time relative errors of a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", default="full-snapshot")
    p.add_argument("--data-dir", default="data")
    p.add_argument("--basis", default=None)
    p.add_argument("--qmc-nodes", type=int, default=100_000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="Table-1 style comparison of evaluation summaries")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", default=None)
    p.add_argument("--full", action="store_true", help="always list all four datasets")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run the numerical oracle checks")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("benchmark", help="run the whole benchmark in-process")
    common(p, fit_flags=True)
    p.add_argument("--n-paths", type=int, default=1000)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "out", None) is None and hasattr(args, "out_default"):
        args.out = args.out_default
    try:
        return args.func(args)
    except (DatasetError, BasisError, ModelError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FitError, SeriesNotConverged, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
