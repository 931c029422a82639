"""Sequential screening: open-loop schedules and the data-adaptive scheme.

Solving a chain of instances at descending lambda lets each step's dual
solution tighten the next step's bounding dome. The adaptive variant
picks the next lambda so the dome diameter never exceeds a user radius R,
which also decides the number of steps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import (Solution, active_set, dual_objective,
                   feasible_dual_point, make_instance)
from .geometry import Sphere, dome_diameter, make_dome
from .screening import TestSpec, halfspace_from_dual_solution, tht_test
from .solver import DEFAULT_CONFIG, solve_screened

TRACE_HEADER = ["k", "lambda_k", "surviving", "screen_seconds",
                "solve_seconds", "dome_diameter"]


@dataclass
class SequentialTrace:
    """Per-step record of a sequential run (lambdas strictly decreasing)."""

    lambdas: list[float] = field(default_factory=list)
    surviving: list[int] = field(default_factory=list)
    screen_seconds: list[float] = field(default_factory=list)
    solve_seconds: list[float] = field(default_factory=list)
    dome_diameters: list[float] = field(default_factory=list)
    thetas: list[np.ndarray] = field(default_factory=list)

    @property
    def n_steps(self):
        return len(self.lambdas)

    def add(self, lam, surviving, screen_s, solve_s, diameter, theta):
        self.lambdas.append(float(lam))
        self.surviving.append(int(surviving))
        self.screen_seconds.append(float(screen_s))
        self.solve_seconds.append(float(solve_s))
        self.dome_diameters.append(float(diameter))
        self.thetas.append(theta)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(TRACE_HEADER)
            for k in range(self.n_steps):
                wr.writerow([k + 1, f"{self.lambdas[k]:.17g}",
                             self.surviving[k],
                             f"{self.screen_seconds[k]:.6g}",
                             f"{self.solve_seconds[k]:.6g}",
                             f"{self.dome_diameters[k]:.17g}"])


def geometric_schedule(lambda1, lambda_t, n_steps):
    """Descending lambdas with a constant ratio and exact endpoints."""
    if not 0.0 < lambda_t < lambda1:
        raise ValueError("need 0 < lambda_t < lambda1")
    if n_steps < 2:
        raise ValueError("need at least two steps")
    return np.geomspace(lambda1, lambda_t, n_steps)


def next_lambda_feedback(lambda_prev, n_prev, y, radius, lambda_floor=0.0):
    """Feedback rule: pick lambda_k so the next dome has diameter <= radius.

    1/lambda_k = 1/lambda_prev + (radius/2) / sqrt(y^T (I - n n^T) y).
    When n_prev is parallel to y the dome collapses in the y direction
    and the rule returns lambda_floor directly.
    """
    if not radius > 0.0:
        raise ValueError("radius must be positive")
    n_prev = np.asarray(n_prev, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if abs(np.linalg.norm(n_prev) - 1.0) > 1e-12:
        raise ValueError("n_prev must have unit norm")
    ortho_sq = float(y @ y) - float(n_prev @ y) ** 2
    denom = np.sqrt(max(ortho_sq, 0.0))
    if denom <= 1e-15 * max(1.0, float(np.linalg.norm(y))):
        return lambda_floor
    return 1.0 / (1.0 / lambda_prev + 0.5 * radius / denom)


def _step_dome(inst, lam_prev, theta_prev):
    """The bounding dome a solved previous step induces at the current one."""
    hs = halfspace_from_dual_solution(inst.y, lam_prev, theta_prev)
    q = inst.y / inst.lam
    r = float(np.linalg.norm(q - theta_prev))
    return make_dome(Sphere(center=q, radius=r), hs)


def dass_solve(dictionary, y, lambda_t, radius, cfg=None, kind="lasso",
               lambda1_fraction=0.95, max_steps=10_000):
    """Data-adaptive sequential screening down to lambda_t.

    Starts at lambda1 = 0.95 lambda_max (clamped to lambda_t if that is
    already higher), screens each instance with THT (seeded by the
    previous step's dual solution from step two on), solves the reduced
    problem warm-started, and chooses the next lambda by the diameter
    feedback rule with overshoot clamped to lambda_t. Returns the
    lambda_t solution and the full trace.
    """
    cfg = cfg or DEFAULT_CONFIG
    if not radius > 0.0:
        raise ValueError("radius must be positive")
    if not lambda_t > 0.0:
        raise ValueError("lambda_t must be positive")
    y = np.asarray(y, dtype=np.float64).ravel()
    trace = SequentialTrace()

    probe = make_instance(dictionary, y, lam=lambda_t, kind=kind)
    if lambda_t >= probe.lambda_max:
        # above lambda_max the solution is identically zero
        theta = feasible_dual_point(dictionary, probe, y / lambda_t)
        gap = 0.5 * float(y @ y) - dual_objective(probe, theta)
        sol = Solution(w=np.zeros(dictionary.p), theta=theta, gap=gap,
                       active=active_set(dictionary, theta, kind))
        trace.add(lambda_t, dictionary.p, 0.0, 0.0, np.nan, theta)
        return sol, trace

    lam = max(lambda1_fraction * probe.lambda_max, lambda_t)
    inst = make_instance(dictionary, y, lam=lam, kind=kind)
    report = tht_test(dictionary, inst, TestSpec("tht"))
    sol, metrics = solve_screened(dictionary, inst, report, cfg)
    trace.add(lam, dictionary.p - report.n_rejected, report.screen_seconds,
              metrics.solve_seconds, np.nan, sol.theta)

    while lam > lambda_t:
        if trace.n_steps >= max_steps:
            raise RuntimeError(f"sequential run exceeded {max_steps} steps")
        lam_prev, theta_prev = lam, sol.theta
        d = y / lam_prev - theta_prev
        nd = float(np.linalg.norm(d))
        if nd <= 1e-14 * max(1.0, float(np.linalg.norm(y))):
            # previous solve says y/lam_prev is already feasible: jump home
            lam = lambda_t
            inst = make_instance(dictionary, y, lam=lam, kind=kind)
            report = tht_test(dictionary, inst,
                              TestSpec("tht", feasible_point=theta_prev))
            diam = np.nan
        else:
            lam = next_lambda_feedback(lam_prev, d / nd, y, radius,
                                       lambda_floor=lambda_t)
            if lam < lambda_t:
                lam = lambda_t
            inst = make_instance(dictionary, y, lam=lam, kind=kind)
            # margin absorbs support-formula roundoff: with tight sequential
            # regions, features active at the previous optimum sit exactly on
            # the test boundary, where the strict '<' is a coin flip
            r_k = float(np.linalg.norm(y / lam - theta_prev))
            margin = 1e-6 * (1.0 + r_k * float(np.max(dictionary.norms)))
            report = tht_test(dictionary, inst,
                              TestSpec("tht",
                                       dual_solution=(lam_prev, theta_prev),
                                       dual_gap=max(sol.gap, 0.0),
                                       margin=margin))
            diam = dome_diameter(_step_dome(inst, lam_prev, theta_prev))
        sol, metrics = solve_screened(dictionary, inst, report, cfg,
                                      w0=sol.w)
        trace.add(lam, dictionary.p - report.n_rejected,
                  report.screen_seconds, metrics.solve_seconds, diam,
                  sol.theta)
    return sol, trace
