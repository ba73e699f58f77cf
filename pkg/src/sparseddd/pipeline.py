"""End-to-end benchmark: simulate, build the basis, fit every dataset with
both methods and score each model on the full snapshot series.

Every random component draws its seed from one top-level seed through
:func:`derive_seed`, i.e. the first word of
``SeedSequence([seed, crc32(component)])``.
"""

from __future__ import annotations

import logging
import time
import zlib
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .basis import BasisSet, build_basis, project_snapshots, project_trajectories
from .domain import Dataset
from .model import evaluate_errors
from .optimize import FitOptions, fit
from .quadrature import MassMatrix, mass_matrix
from .simulate import DATASET_ROLES, SdeConfig, build_datasets, simulate_paths

logger = logging.getLogger(__name__)

METHODS = ("sparse-ddd", "ddd")
METHOD_LABELS = {"sparse-ddd": "Sparse DDD", "ddd": "DDD"}
ROLE_LABELS = {
    "trajectory": "Trajectory",
    "full-snapshot": "Full Snapshot",
    "two-snapshot": "Two Snapshot",
    "integrated": "Integrated",
}


def derive_seed(seed: int, component: str) -> int:
    ss = np.random.SeedSequence([int(seed), zlib.crc32(component.encode())])
    return int(ss.generate_state(1)[0])


def dataset_coefficients(dataset: Dataset, basis: BasisSet):
    """``(snapshot CoefficientSeries or None, TrajectoryCoefficients or None)``."""
    snaps = project_snapshots(dataset.snapshots, basis) if dataset.snapshots is not None else None
    trajs = project_trajectories(dataset.trajectories, basis) if dataset.trajectories is not None else None
    return snaps, trajs


def fit_dataset(dataset: Dataset, method: str, basis: BasisSet, M: MassMatrix,
                options: FitOptions, callback: Optional[Callable] = None):
    snaps, trajs = dataset_coefficients(dataset, basis)
    return fit(method, M, snaps, trajs, options, pattern=M.pattern, time_span=dataset.span,
               basis_hash=basis.content_hash(), mass_hash=M.content_hash(), callback=callback)


@dataclass(frozen=True)
class BenchmarkConfig:
    seed: int = 0
    n_paths: int = 1000
    n_basis: int = 30
    qmc_nodes: int = 100_000
    lam: float = 0.01
    max_iters: int = 5000
    methods: tuple = METHODS
    roles: tuple = DATASET_ROLES
    sde: SdeConfig = field(default_factory=SdeConfig)

    def sde_config(self) -> SdeConfig:
        return replace(self.sde, n_paths=self.n_paths, seed=derive_seed(self.seed, "simulate"))

    def fit_options(self) -> FitOptions:
        return FitOptions(max_iters=self.max_iters, lam=self.lam, seed=derive_seed(self.seed, "fit"))


@dataclass
class BenchmarkResult:
    config: BenchmarkConfig
    datasets: dict
    basis: BasisSet
    mass: MassMatrix
    test_times: np.ndarray
    models: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    test_errors: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def mean_test_error(self, role: str, method: str) -> float:
        return float(np.mean(self.test_errors[role, method]))

    def table(self) -> dict:
        return {key: float(np.mean(v)) for key, v in self.test_errors.items()}

    def parameter_counts(self) -> dict:
        out = {}
        for (role, method), rep in self.reports.items():
            out[method] = (rep.parameter_count, rep.dof_count)
        return out


def run_benchmark(cfg: BenchmarkConfig = BenchmarkConfig()) -> BenchmarkResult:
    t0 = time.perf_counter()
    parent = simulate_paths(cfg.sde_config())
    datasets = build_datasets(parent, derive_seed(cfg.seed, "datasets"))
    t_sim = time.perf_counter() - t0

    full = datasets["full-snapshot"]
    basis = build_basis(full.all_points(), cfg.n_basis, derive_seed(cfg.seed, "basis"))
    M = mass_matrix(basis, cfg.qmc_nodes)
    test = project_snapshots(full.snapshots, basis)
    result = BenchmarkResult(cfg, datasets, basis, M, full.snapshots.grid.times)
    result.timings["simulate"] = t_sim
    result.timings["basis+mass"] = time.perf_counter() - t0 - t_sim

    options = cfg.fit_options()
    for role in cfg.roles:
        for method in cfg.methods:
            ts = time.perf_counter()
            model, report = fit_dataset(datasets[role], method, basis, M, options)
            result.models[role, method] = model
            result.reports[role, method] = report
            result.test_errors[role, method] = evaluate_errors(model, test, M)
            result.timings[role, method] = time.perf_counter() - ts
            logger.info("%s / %s: test mean relative error %.3f (%.1fs)", role, method,
                        result.mean_test_error(role, method), result.timings[role, method])
    result.timings["total"] = time.perf_counter() - t0
    return result


def format_table(cells: dict, params: Optional[dict] = None, roles=DATASET_ROLES, methods=METHODS) -> str:
    """Text table of mean relative errors; missing cells print as an em dash."""
    head = f"{'Dataset':<15}" + "".join(f"{METHOD_LABELS.get(m, m):>14}" for m in methods)
    lines = ["Mean relative error (tested on the Full Snapshot dataset)", head, "-" * len(head)]
    for role in roles:
        row = f"{ROLE_LABELS.get(role, role):<15}"
        for m in methods:
            v = cells.get((role, m))
            row += f"{'—':>14}" if v is None else f"{v:>14.3f}"
        lines.append(row)
    if params:
        lines.append("")
        for m in methods:
            if m in params:
                p, d = params[m]
                lines.append(f"{METHOD_LABELS.get(m, m)}: {p} parameters, {d} degrees of freedom")
    return "\n".join(lines)
