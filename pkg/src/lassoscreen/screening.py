"""The screening tests: sphere, dome, two-hyperplane, iteratively refined.

Every test maps the dictionary to a boolean rejection vector v. Safe
tests guarantee that rejected features carry zero weight at the optimum
(their bounding region contains the dual solution); the Strong Rule,
Strong Sequential Rule and SIS comparators carry no such guarantee and
are flagged unsafe so nothing downstream trusts them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import LASSO, NONNEG, Partition
from .geometry import (Dome, EmptyRegionError, GeometryError, HalfSpace,
                       ImproperRegionError, Region2H, Sphere,
                       dome_support_increment, make_dome, make_region2h,
                       region2h_support_increment)

SAFE_KINDS = ("st", "dt", "tht", "irdt")
HEURISTIC_KINDS = ("strong", "ssr", "sis")
TEST_KINDS = SAFE_KINDS + HEURISTIC_KINDS


class NotApplicableError(Exception):
    """The requested bound cannot be built from the given inputs."""


@dataclass(frozen=True)
class TestSpec:
    """Which test to run and where its bounding region comes from.

    The bound source is "default" (only the instance itself), a known
    dual-feasible point, or a solved instance (lambda0, theta0). s_iters
    caps IRDT refinement; gamma is the SIS keep fraction; margin > 0
    tightens every strict rejection inequality by that amount.
    """

    __test__ = False  # not a pytest collectable despite the name

    kind: str
    s_iters: int = 5
    gamma: float = 0.5
    feasible_point: np.ndarray | None = None
    dual_solution: tuple[float, np.ndarray] | None = field(default=None)
    dual_gap: float | None = None
    margin: float = 0.0

    def __post_init__(self):
        if self.kind not in TEST_KINDS:
            raise ValueError(f"unknown test kind {self.kind!r}")
        if self.kind == "irdt" and self.s_iters < 1:
            raise ValueError("irdt needs s_iters >= 1")
        if self.kind == "sis" and not 0.0 < self.gamma < 1.0:
            raise ValueError("sis needs gamma in (0, 1)")
        if self.margin < 0.0:
            raise ValueError("margin must be nonnegative")

    @property
    def safe(self):
        return self.kind in SAFE_KINDS

    @property
    def bound_source(self):
        if self.dual_solution is not None:
            return "dual"
        if self.feasible_point is not None:
            return "feasible"
        return "default"


@dataclass(frozen=True)
class ScreenReport:
    """Per-feature rejection flags plus the induced partition and timing."""

    rejected: np.ndarray
    partition: Partition
    screen_seconds: float
    regions_used: str
    safe: bool
    instance_key: tuple

    @property
    def n_rejected(self):
        return int(self.rejected.sum())


def _finish(flags, t0, desc, safe, inst):
    flags = np.asarray(flags, dtype=bool)
    flags.flags.writeable = False
    return ScreenReport(rejected=flags,
                        partition=Partition.from_flags(flags),
                        screen_seconds=time.perf_counter() - t0,
                        regions_used=desc, safe=safe,
                        instance_key=inst.key())


def _pool_value(x, kind):
    """f from the algorithm listings: |.| for the lasso pool, identity else."""
    return np.abs(x) if kind == LASSO else np.asarray(x, dtype=np.float64)


def _pool_sign(x, kind):
    if kind == LASSO:
        return 1.0 if x >= 0.0 else -1.0
    return 1.0


# ---------------------------------------------------------------------------
# parameter selection
# ---------------------------------------------------------------------------

def select_default_sphere(dictionary, inst):
    """Sphere center y/lambda, radius |1/lambda - 1/lambda_max| ||y||."""
    q = inst.y / inst.lam
    r = abs(1.0 / inst.lam - 1.0 / inst.lambda_max) * float(
        np.linalg.norm(inst.y))
    return Sphere(center=q, radius=r)


def basic_sphere(inst, feasible_point):
    """Sphere center y/lambda, radius = distance to a known feasible point."""
    q = inst.y / inst.lam
    r = float(np.linalg.norm(np.asarray(feasible_point, float).ravel() - q))
    return Sphere(center=q, radius=r)


def _greedy_scores(corr, norms, kind):
    return (_pool_value(corr, kind) - 1.0) / norms


def _argmax_excluding(scores, exclude):
    s = scores
    if exclude:
        s = scores.copy()
        s[list(exclude)] = -np.inf
    i = int(np.argmax(s))
    if not np.isfinite(s[i]):
        raise ValueError("no candidate feature available")
    return i


def select_halfspace_greedy(dictionary, q, exclude=(), kind=LASSO, corr=None):
    """Feature half space minimizing the cut dome's radius.

    Maximizes (b^T q - 1)/||b|| over the signed pool minus the excluded
    indices; ties break to the lowest index. Returns the half space and
    the chosen feature index.
    """
    q = np.asarray(q, dtype=np.float64).ravel()
    if corr is None:
        corr = dictionary.dot_columns(q)
    i = _argmax_excluding(_greedy_scores(corr, dictionary.norms, kind),
                          exclude)
    sign = _pool_sign(corr[i], kind)
    beta = dictionary.norms[i]
    return HalfSpace(normal=sign * dictionary.column(i) / beta,
                     offset=1.0 / beta), i


def halfspace_from_dual_solution(y0, lambda0, theta0):
    """Half space bounding the feasible set, from a solved instance.

    The projection inequality at the dual optimum theta0 of (y0, lambda0)
    gives normal (y0/lambda0 - theta0)/||.|| and offset normal^T theta0.
    """
    y0 = np.asarray(y0, dtype=np.float64).ravel()
    theta0 = np.asarray(theta0, dtype=np.float64).ravel()
    d = y0 / lambda0 - theta0
    nd = float(np.linalg.norm(d))
    if nd <= 1e-14 * max(1.0, float(np.linalg.norm(theta0))):
        raise NotApplicableError("y0/lambda0 coincides with theta0 (lambda0 "
                                 "above lambda_max); no half space to build")
    n = d / nd
    c = float(n @ theta0)
    if c < -1e-9 * max(1.0, float(np.linalg.norm(theta0))):
        raise ValueError("offset is negative: theta0 does not look like a "
                         "dual optimum")
    return HalfSpace(normal=n, offset=c)


def _inflated_dual_halfspace(y, lam0, theta0, dual_gap, sphere_radius):
    """Dual-solution half space, widened to absorb solver inexactness.

    The projection inequality is exact only at the true dual optimum.
    With a certified duality gap g0, strong concavity of the dual bounds
    the dual-point error by e = sqrt(2 g0)/lambda0, and within the
    bounding sphere the half space stays valid after moving its offset
    out by e (||d|| + 2r + 3e)/||d||, d = y/lambda0 - theta0. With no gap
    given the textbook exact-dual half space is returned.
    """
    hs = halfspace_from_dual_solution(y, lam0, theta0)
    if dual_gap is None or dual_gap <= 0.0:
        return hs
    e = np.sqrt(2.0 * dual_gap) / lam0
    dnorm = float(np.linalg.norm(np.asarray(y, float) / lam0
                                 - np.asarray(theta0, float)))
    pad = e * (dnorm + 2.0 * sphere_radius + 3.0 * e) / dnorm
    return HalfSpace(normal=hs.normal, offset=hs.offset + pad)


def _theta_feasible_default(dictionary, inst, spec):
    if spec is not None and spec.dual_solution is not None:
        return np.asarray(spec.dual_solution[1], dtype=np.float64).ravel()
    if spec is not None and spec.feasible_point is not None:
        return np.asarray(spec.feasible_point, dtype=np.float64).ravel()
    if inst.lambda_max > 0.0:
        return inst.y / inst.lambda_max
    # y is orthogonal to every feature; the origin is always feasible
    return np.zeros(dictionary.n)


# ---------------------------------------------------------------------------
# flag evaluation cores
# ---------------------------------------------------------------------------

def _sphere_flags(qb, norms, r, kind, margin):
    thr = 1.0 - r * norms - margin
    if kind == LASSO:
        return np.abs(qb) < thr
    return qb < thr


def _dome_flags(qb, t1, t2, r, psi, kind, margin):
    upper = 1.0 - dome_support_increment(t1, t2, r, psi)
    flags = qb < upper - margin
    if kind == LASSO:
        lower = -(1.0 - dome_support_increment(-t1, t2, r, psi))
        flags &= qb > lower + margin
    return flags


def _region2h_flags(qb, t1, t2, t3, r, psi1, psi2, tau, kind, margin):
    upper = 1.0 - region2h_support_increment(t1, t2, t3, r, psi1, psi2, tau)
    flags = qb < upper - margin
    if kind == LASSO:
        lower = -(1.0 - region2h_support_increment(-t1, -t2, t3, r,
                                                   psi1, psi2, tau))
        flags &= qb > lower + margin
    return flags


# ---------------------------------------------------------------------------
# the tests
# ---------------------------------------------------------------------------

def sphere_test(dictionary, inst, sphere, margin=0.0):
    """Reject features the ball cannot push to the constraint boundary.

    Caller guarantees the dual optimum lies in the sphere; that is the
    whole safety contract.
    """
    t0 = time.perf_counter()
    qb = dictionary.dot_columns(sphere.center)
    flags = _sphere_flags(qb, dictionary.norms, sphere.radius, inst.kind,
                          margin)
    return _finish(flags, t0, f"sphere(r={sphere.radius:.6g})", True, inst)


def dome_test(dictionary, inst, dome, margin=0.0, keep=()):
    """Dome rejection per the two-branch support formula.

    keep lists indices pinned to "kept": the feature whose constraint cut
    the dome sits exactly at the test boundary, where roundoff in the
    support formula could flip the strict inequality either way.
    """
    t0 = time.perf_counter()
    qb = dictionary.dot_columns(dome.sphere.center)
    t1 = dictionary.dot_columns(dome.halfspace.normal)
    flags = _dome_flags(qb, t1, dictionary.norms, dome.sphere.radius,
                        dome.cut_fraction, inst.kind, margin)
    for i in keep:
        flags[i] = False
    desc = (f"dome(r={dome.sphere.radius:.6g}, "
            f"cut={dome.cut_fraction:.6g})")
    return _finish(flags, t0, desc, True, inst)


def default_dome(dictionary, inst, spec=None, return_feature=False):
    """The standard dome: bound-source sphere cut by the best pool feature,
    or by the solved-instance half space when a dual solution is given."""
    theta_f = _theta_feasible_default(dictionary, inst, spec)
    sphere = basic_sphere(inst, theta_f)
    feature = None
    if spec is not None and spec.dual_solution is not None:
        lam0, th0 = spec.dual_solution
        hs = _inflated_dual_halfspace(inst.y, lam0, th0, spec.dual_gap,
                                      sphere.radius)
    else:
        hs, feature = select_halfspace_greedy(dictionary, sphere.center,
                                              kind=inst.kind)
    dome = make_dome(sphere, hs)
    if return_feature:
        return dome, feature
    return dome


def tht_test(dictionary, inst, spec=None):
    """Two Hyperplane Test: default sphere plus two chosen half spaces.

    The first half space comes from a provided dual solution when there
    is one, else from the greedy pool feature; the second is picked
    greedily against the once-refined center. Degenerate configurations
    fall back to the dome and then the sphere, which only loosens the
    test, never breaks safety.
    """
    spec = spec or TestSpec("tht")
    t0 = time.perf_counter()
    kind = inst.kind
    beta = dictionary.norms
    q = inst.y / inst.lam
    rho = dictionary.dot_columns(q)

    theta_f = _theta_feasible_default(dictionary, inst, spec)
    r = float(np.linalg.norm(theta_f - q))
    if r == 0.0:
        # point region: the zero-radius sphere test is already exact
        flags = _sphere_flags(rho, beta, r, kind, spec.margin)
        return _finish(flags, t0, f"sphere(r={r:.6g})", True, inst)
    sphere = Sphere(center=q, radius=r)

    halfspaces = []  # (halfspace, description, source feature index or None)
    exclude = set()
    dual_mode = False
    if spec.dual_solution is not None:
        lam0, th0 = spec.dual_solution
        try:
            halfspaces.append((_inflated_dual_halfspace(inst.y, lam0, th0,
                                                        spec.dual_gap, r),
                               "h1=dual", None))
            dual_mode = True
        except NotApplicableError:
            pass  # theta0 still serves as the feasible point below
    if not dual_mode:
        hs1, i_star = select_halfspace_greedy(dictionary, q, kind=kind,
                                              corr=rho)
        halfspaces.append((hs1, f"h1=feature[{i_star}]", i_star))
        exclude.add(i_star)

    # second half space: greedy against the dome-refined center
    first_hs = halfspaces[0][0]
    sigma = dictionary.dot_columns(first_hs.normal)
    a = float(first_hs.normal @ q) - first_hs.offset
    t_corr = rho - a * sigma
    if dictionary.p > len(exclude):
        scores = _greedy_scores(t_corr, beta, kind)
        j_star = _argmax_excluding(scores, exclude)
        sign_j = _pool_sign(t_corr[j_star], kind)
        halfspaces.append((HalfSpace(
            normal=sign_j * dictionary.column(j_star) / beta[j_star],
            offset=1.0 / beta[j_star]), f"h2=feature[{j_star}]", j_star))

    # drop half spaces that do not cut the sphere, deepest cut first
    cutting = []
    for hs, bit, feat in halfspaces:
        psi = (float(hs.normal @ q) - hs.offset) / r
        if psi >= -1.0 - 1e-12:
            cutting.append((psi, hs, bit, feat))
    cutting.sort(key=lambda x: -x[0])

    def guard(flags, used):
        # a feature whose own half space touches the region sits exactly at
        # the test boundary (support value 1): keep it, as exact arithmetic
        # would
        for _, _, _, feat in used:
            if feat is not None:
                flags[feat] = False
        return flags

    if len(cutting) == 2:
        (_, h1, bit1, _), (_, h2, bit2, _) = cutting
        try:
            region = make_region2h(sphere, h1, h2)
            t1 = sigma if h1 is first_hs else dictionary.dot_columns(
                h1.normal)
            t2 = sigma if h2 is first_hs else dictionary.dot_columns(
                h2.normal)
            flags = _region2h_flags(rho, t1, t2, beta, r, region.cut1,
                                    region.cut2, region.normals_dot, kind,
                                    spec.margin)
            desc = f"sphere(r={r:.6g})+{bit1}+{bit2}"
            return _finish(guard(flags, cutting), t0, desc, True, inst)
        except GeometryError:
            # redundant / parallel / tangent second cut: the deeper dome
            # is the region itself (or contains it), so fall back to it
            cutting = cutting[:1]
    if len(cutting) == 1:
        _, h1, bit1, _ = cutting[0]
        dome = make_dome(sphere, h1)
        t1 = dictionary.dot_columns(h1.normal)
        flags = _dome_flags(rho, t1, beta, r, dome.cut_fraction, kind,
                            spec.margin)
        return _finish(guard(flags, cutting), t0, f"sphere(r={r:.6g})+{bit1}",
                       True, inst)
    flags = _sphere_flags(rho, beta, r, kind, spec.margin)
    return _finish(flags, t0, f"sphere(r={r:.6g})", True, inst)


def irdt_test(dictionary, inst, s_iters=5, spec=None):
    """Iteratively refined dome tests (disjunction over all domes built).

    Repeatedly shrinks the bounding sphere through feature-cut
    circumspheres, greedily choosing the feature that shrinks most; every
    dome met along the way (each new feature against each earlier sphere)
    contributes its rejection flags. Stops early when no remaining
    feature cuts the current sphere.
    """
    if spec is None:
        spec = TestSpec("irdt", s_iters=s_iters)
    if spec.s_iters < 1:
        raise ValueError("irdt needs s_iters >= 1")
    t0 = time.perf_counter()
    kind = inst.kind
    beta = dictionary.norms
    p = dictionary.p
    q = inst.y / inst.lam
    rho = dictionary.dot_columns(q)
    theta_f = _theta_feasible_default(dictionary, inst, spec)
    r = float(np.linalg.norm(theta_f - q))

    flags = _sphere_flags(rho, beta, r, kind, spec.margin)
    used = np.zeros(p, dtype=bool)
    centers = [q]
    radii = [r]
    rhos = [rho]
    n_domes = 0

    for j1 in range(spec.s_iters):
        if radii[j1] <= 0.0:
            break
        cand = ~flags & ~used
        if not cand.any():
            break
        scores = _greedy_scores(rhos[j1], beta, kind)
        scores[~cand] = -np.inf
        h = int(np.argmax(scores))
        psi = scores[h] / radii[j1]
        if psi <= 0.0:
            break
        psi = min(psi, 1.0)
        sign = _pool_sign(rhos[j1][h], kind)
        normal = sign * dictionary.column(h) / beta[h]
        offset = 1.0 / beta[h]
        t_corr = dictionary.dot_columns(normal)
        if j1 + 1 < spec.s_iters:
            centers.append(centers[j1] - psi * radii[j1] * normal)
            rhos.append(rhos[j1] - psi * radii[j1] * t_corr)
            radii.append(radii[j1] * np.sqrt(max(0.0, 1.0 - psi * psi)))
        # the new half space against this sphere and every earlier one
        for j2 in range(j1, -1, -1):
            if j2 == j1:
                ps_raw = psi
            else:
                ps_raw = (float(normal @ centers[j2]) - offset) / radii[j2]
            ps = min(max(ps_raw, -1.0), 1.0)
            alive = np.flatnonzero(~flags)
            if alive.size == 0:
                break
            sub = _dome_flags(rhos[j2][alive], t_corr[alive], beta[alive],
                              radii[j2], ps, kind, spec.margin)
            flags[alive[sub]] = True
            if ps_raw > -1.0:
                # h's own plane touches this dome: its support value is
                # exactly 1, so exact arithmetic keeps it
                flags[h] = False
            n_domes += 1
        used[h] = True

    desc = f"irdt({n_domes} domes, r0={r:.6g})"
    return _finish(flags, t0, desc, True, inst)


def heuristic_test(dictionary, inst, spec):
    """Strong Rule / Strong Sequential Rule / SIS comparators (unsafe).

    The textbook formulas assume unit-norm features and target, so
    correlations are normalized first; the instance's lambda is used
    as given.
    """
    if spec.kind not in HEURISTIC_KINDS:
        raise ValueError(f"{spec.kind!r} is not a heuristic test")
    t0 = time.perf_counter()
    kind = inst.kind
    ynorm = float(np.linalg.norm(inst.y))
    if ynorm == 0.0:
        raise ValueError("zero target vector")
    if spec.kind == "strong":
        rho_hat = dictionary.dot_columns(inst.y) / (dictionary.norms * ynorm)
        vals = _pool_value(rho_hat, kind)
        lmax_hat = float(np.max(vals))
        flags = vals < 2.0 * inst.lam - lmax_hat - spec.margin
        desc = f"strong(thr={2.0 * inst.lam - lmax_hat:.6g})"
    elif spec.kind == "ssr":
        if spec.dual_solution is None:
            raise ValueError("strong sequential rule needs a prior dual "
                             "solution (lambda0, theta0)")
        lam0, th0 = spec.dual_solution
        r_ssr = 2.0 * inst.lam * (1.0 / inst.lam - 1.0 / lam0)
        corr0 = dictionary.dot_columns(np.asarray(th0, float).ravel())
        vals = _pool_value(corr0 / dictionary.norms, kind)
        flags = vals < 1.0 - r_ssr - spec.margin
        desc = f"ssr(r={r_ssr:.6g})"
    else:  # sis
        rho_hat = dictionary.dot_columns(inst.y) / (dictionary.norms * ynorm)
        vals = _pool_value(rho_hat, kind)
        keep = int(round(spec.gamma * dictionary.n))
        keep = min(max(keep, 1), dictionary.p)
        order = np.argsort(-vals, kind="stable")
        t_gamma = vals[order[keep - 1]]
        flags = vals < t_gamma - spec.margin
        desc = f"sis(keep={keep}, t={t_gamma:.6g})"
    return _finish(flags, t0, desc, False, inst)


def combine_disjunction(*reports):
    """Composite test: reject what any constituent rejects.

    Only safe tests for the same instance may be combined; the result is
    still safe (each rejection is vouched for by one region).
    """
    if not reports:
        raise ValueError("need at least one report")
    if not all(rep.safe for rep in reports):
        raise ValueError("refusing to combine unsafe tests into a "
                         "disjunction")
    key = reports[0].instance_key
    if any(rep.instance_key != key for rep in reports):
        raise ValueError("reports come from different instances")
    flags = reports[0].rejected.copy()
    for rep in reports[1:]:
        flags |= rep.rejected
    desc = " | ".join(rep.regions_used for rep in reports)
    return ScreenReport(rejected=flags, partition=Partition.from_flags(flags),
                        screen_seconds=sum(r.screen_seconds for r in reports),
                        regions_used=desc, safe=True, instance_key=key)


def run_test(dictionary, inst, spec):
    """Dispatch a TestSpec to its implementation."""
    if spec.kind == "st":
        if spec.bound_source == "default":
            sphere = select_default_sphere(dictionary, inst)
        else:
            sphere = basic_sphere(inst,
                                  _theta_feasible_default(dictionary, inst,
                                                          spec))
        return sphere_test(dictionary, inst, sphere, spec.margin)
    if spec.kind == "dt":
        try:
            dome, feature = default_dome(dictionary, inst, spec,
                                         return_feature=True)
        except ImproperRegionError:
            sphere = basic_sphere(inst,
                                  _theta_feasible_default(dictionary, inst,
                                                          spec))
            return sphere_test(dictionary, inst, sphere, spec.margin)
        keep = () if feature is None else (feature,)
        return dome_test(dictionary, inst, dome, spec.margin, keep=keep)
    if spec.kind == "tht":
        return tht_test(dictionary, inst, spec)
    if spec.kind == "irdt":
        return irdt_test(dictionary, inst, spec.s_iters, spec)
    return heuristic_test(dictionary, inst, spec)
