"""Synthetic data generation and the screening benchmark harness.

Reproduces the uniform-random experiment protocol at desk scale: draw a
unit-norm dictionary and targets, sweep regularization ratios, and for
each test record the rejection fraction and the speedup versus solving
the full problem, with every safe test cross-checked against the full
solve. Results land in a stable CSV schema.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (ACTIVE_TOL, Dictionary, make_instance, pool_max,
                   primal_objective)
from .fileio import read_matrix
from .screening import TestSpec, run_test
from .solver import SolverConfig, solve_lasso, solve_with_partition

METRICS_HEADER = ["test", "lambda_ratio", "rejection_mean",
                  "rejection_stderr", "speedup_mean", "speedup_stderr",
                  "safety_violations"]

# relative objective mismatch that counts as a lost optimum
OBJECTIVE_RTOL = 1e-6


def generate_rand(p, n, seed):
    """Unit-norm uniform dictionary plus an endless unit-norm target stream.

    Entries are i.i.d. uniform[0,1) from one seeded generator, columns
    scaled to unit norm; the target generator continues the same stream,
    so a fixed seed reproduces everything bit for bit.
    """
    if p < 1 or n < 1:
        raise ValueError("p and n must be positive")
    rng = np.random.default_rng(seed)
    cols = rng.random((n, p))
    cols /= np.linalg.norm(cols, axis=0)
    dictionary = Dictionary(cols)

    def targets():
        while True:
            y = rng.random(n)
            yield y / np.linalg.norm(y)

    return dictionary, targets()


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark run: dataset, tests, ratios, trials, solver, output."""

    dataset: str = "rand"              # "rand" or "files"
    p: int = 2000
    n: int = 28
    seed: int = 0
    dict_path: str | None = None
    targets_path: str | None = None
    tests: tuple = (TestSpec("st"), TestSpec("dt"), TestSpec("tht"))
    lambda_ratios: tuple = (0.5,)
    trials: int = 64
    kind: str = "lasso"
    solver: SolverConfig = field(default_factory=SolverConfig)
    repeats: int = 3                   # timing repeats; median is reported
    oracle: bool = True                # also run oracle-sphere variants
    output_path: str = "metrics.csv"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not all(0.0 < r <= 1.0 for r in self.lambda_ratios):
            raise ValueError("lambda ratios must lie in (0, 1]")
        if self.dataset not in ("rand", "files"):
            raise ValueError("dataset must be 'rand' or 'files'")
        if self.dataset == "files" and not (self.dict_path and
                                            self.targets_path):
            raise ValueError("files dataset needs dict and targets paths")


def spec_from_name(name, s_iters=5, gamma=0.5):
    name = name.strip().lower()
    if name == "irdt":
        return TestSpec("irdt", s_iters=s_iters)
    if name == "sis":
        return TestSpec("sis", gamma=gamma)
    return TestSpec(name)


def parse_config(path):
    """Read a key=value benchmark config file (blank lines and # comments ok)."""
    raw = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, val = line.split("=", 1)
            raw[key.strip()] = val.strip()
    kw = {}
    if "dataset" in raw:
        kw["dataset"] = raw["dataset"]
    for key in ("p", "n", "seed", "trials", "repeats"):
        if key in raw:
            kw[key] = int(raw[key])
    for key in ("dict_path", "targets_path", "output_path", "kind"):
        if key in raw:
            kw[key] = raw[key]
    if "tests" in raw:
        kw["tests"] = tuple(spec_from_name(t, s_iters=int(raw.get("irdt_iters", 5)),
                                           gamma=float(raw.get("sis_gamma", 0.5)))
                            for t in raw["tests"].split(","))
    if "lambda_ratios" in raw:
        kw["lambda_ratios"] = tuple(float(x)
                                    for x in raw["lambda_ratios"].split(","))
    if "oracle" in raw:
        kw["oracle"] = raw["oracle"].lower() in ("1", "true", "yes")
    solver_kw = {}
    if "gap_tol" in raw:
        solver_kw["gap_tol"] = float(raw["gap_tol"])
    if "max_iters" in raw:
        solver_kw["max_iters"] = int(raw["max_iters"])
    if solver_kw:
        kw["solver"] = SolverConfig(**solver_kw)
    return ExperimentConfig(**kw)


@dataclass
class MetricsRow:
    test: str
    lambda_ratio: float
    rejection_mean: float
    rejection_stderr: float
    speedup_mean: float
    speedup_stderr: float
    safety_violations: int


def _stderr(xs):
    if len(xs) < 2:
        return 0.0
    return statistics.stdev(xs) / np.sqrt(len(xs))


def _median_time(fn, repeats):
    """Run fn repeats times; return (first result, median wall time)."""
    result = None
    times = []
    for k in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
        if k == 0:
            result = out
    return result, statistics.median(times)


def _lost_optimum(dictionary, inst, report, full_sol, full_obj, screened_w):
    """Did screening cost us the optimum on this instance?"""
    obj = primal_objective(dictionary, inst, screened_w)
    if abs(obj - full_obj) > OBJECTIVE_RTOL * max(abs(full_obj), 1e-300):
        return True
    corr = dictionary.dot_columns(full_sol.theta)
    vals = np.abs(corr) if inst.kind == "lasso" else corr
    rejected_active = vals[report.partition.rejected] >= 1.0 - ACTIVE_TOL
    return bool(np.any(rejected_active))


def _test_label(spec, oracle=False):
    label = spec.kind
    if spec.kind == "irdt":
        label += f"{spec.s_iters}"
    return label + ("_oracle" if oracle else "")


def run_experiment(cfg):
    """Execute the benchmark and write the metrics CSV; returns its path.

    Per (trial, ratio): one full solve is the timing baseline and the
    safety reference. Each test contributes rejection fraction and
    speedup = t_full / (t_screen + t_reduced); safe sphere-family tests
    are additionally rerun with the oracle bounding sphere (radius from
    the known dual optimum) when oracle output is enabled.
    """
    if cfg.dataset == "rand":
        dictionary, targets = generate_rand(cfg.p, cfg.n, cfg.seed)
        target_list = [next(targets) for _ in range(cfg.trials)]
    else:
        dictionary = Dictionary(read_matrix(cfg.dict_path))
        targets = read_matrix(cfg.targets_path)
        if targets.shape[0] != dictionary.n:
            raise ValueError("targets dimension does not match dictionary")
        if targets.shape[1] < cfg.trials:
            raise ValueError(f"targets file has {targets.shape[1]} columns, "
                             f"need {cfg.trials}")
        target_list = [targets[:, t] for t in range(cfg.trials)]

    cells = {}  # (label, ratio) -> dict of lists

    def cell(label, ratio):
        return cells.setdefault((label, ratio),
                                {"rej": [], "spd": [], "viol": 0})

    for y in target_list:
        for ratio in cfg.lambda_ratios:
            inst = make_instance(dictionary, y, ratio=ratio, kind=cfg.kind)
            full_sol, t_full = _median_time(
                lambda: solve_lasso(dictionary, inst, cfg.solver),
                cfg.repeats)
            full_obj = primal_objective(dictionary, inst, full_sol.w)

            specs = [(spec, False) for spec in cfg.tests]
            if cfg.oracle:
                specs += [(replace(spec, feasible_point=full_sol.theta), True)
                          for spec in cfg.tests
                          if spec.kind in ("st", "dt", "tht")]
            for spec, is_oracle in specs:
                if spec.kind == "ssr" and spec.dual_solution is None:
                    # default prior for the comparator: the lambda_max point
                    spec = replace(spec, dual_solution=(
                        inst.lambda_max, y / inst.lambda_max))
                report, t_screen = _median_time(
                    lambda: run_test(dictionary, inst, spec), cfg.repeats)
                (sol, _), t_red = _median_time(
                    lambda: solve_with_partition(
                        dictionary, inst, report.partition.selected,
                        cfg.solver),
                    cfg.repeats)
                box = cell(_test_label(spec, is_oracle), ratio)
                box["rej"].append(report.partition.rejection_fraction())
                box["spd"].append(t_full / max(t_screen + t_red, 1e-12))
                if _lost_optimum(dictionary, inst, report, full_sol,
                                 full_obj, sol.w):
                    box["viol"] += 1

    rows = []
    for (label, ratio) in sorted(cells):
        box = cells[(label, ratio)]
        rows.append(MetricsRow(
            test=label, lambda_ratio=ratio,
            rejection_mean=float(np.mean(box["rej"])),
            rejection_stderr=float(_stderr(box["rej"])),
            speedup_mean=float(np.mean(box["spd"])),
            speedup_stderr=float(_stderr(box["spd"])),
            safety_violations=box["viol"]))
    write_metrics(cfg.output_path, rows)
    return cfg.output_path


def write_metrics(path, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(METRICS_HEADER)
        for row in rows:
            wr.writerow([row.test, f"{row.lambda_ratio:.6g}",
                         f"{row.rejection_mean:.8g}",
                         f"{row.rejection_stderr:.8g}",
                         f"{row.speedup_mean:.8g}",
                         f"{row.speedup_stderr:.8g}",
                         row.safety_violations])


def read_metrics(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != METRICS_HEADER:
            raise ValueError(f"unexpected metrics header: {header}")
        rows = []
        for rec in rd:
            rows.append(MetricsRow(rec[0], float(rec[1]), float(rec[2]),
                                   float(rec[3]), float(rec[4]),
                                   float(rec[5]), int(rec[6])))
    return rows
