"""Bounding regions for the dual solution and their support values.

Three region shapes are supported: a ball, a ball cut by one half space
(a "dome"), and a ball cut by two half spaces. For each there is a closed
form for the support value mu_R(b) = max_{theta in R} theta^T b, which is
the quantity every screening test thresholds against 1.

All support routines exist in two flavors: a scalar one taking a feature
vector, and an array core working directly on precomputed inner products
(what the per-feature screening loops use).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# membership tolerance for cut fractions / radicands at branch boundaries
PSI_TOL = 1e-12
RADICAND_TOL = 1e-12


class GeometryError(Exception):
    """Internal geometric invariant violated (signals a misuse or a bug)."""


class EmptyRegionError(GeometryError):
    """The half space excludes the whole sphere."""


class ImproperRegionError(GeometryError):
    """The half space contains the whole sphere; the cut is vacuous."""


class NotRefinableError(GeometryError):
    """Circumsphere refinement would not shrink the bound (cut fraction <= 0)."""


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).ravel()
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        if not self.radius >= 0.0:
            raise ValueError("sphere radius must be nonnegative")


@dataclass(frozen=True)
class HalfSpace:
    """Closed half space {z : normal^T z <= offset} with unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).ravel()
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("half-space normal must have unit norm")

    @classmethod
    def from_feature(cls, b):
        """The dual constraint b^T theta <= 1 as a half space."""
        b = np.asarray(b, dtype=np.float64).ravel()
        nb = np.linalg.norm(b)
        if nb == 0.0:
            raise ValueError("zero feature has no half space")
        return cls(normal=b / nb, offset=1.0 / nb)


@dataclass(frozen=True)
class Dome:
    """Nondegenerate intersection of a sphere with one half space.

    cut_fraction is the signed distance from the sphere center to the
    cutting plane in units of the radius; dome_center / dome_radius
    describe the flat face.
    """

    sphere: Sphere
    halfspace: HalfSpace
    cut_fraction: float
    dome_center: np.ndarray
    dome_radius: float


@dataclass(frozen=True)
class Region2H:
    """Sphere cut by two half spaces (the THT bounding region)."""

    sphere: Sphere
    h1: HalfSpace
    h2: HalfSpace
    cut1: float
    cut2: float
    normals_dot: float


def _clamp_cut(psi, what="cut fraction"):
    if psi > 1.0:
        if psi <= 1.0 + PSI_TOL:
            return 1.0
        raise EmptyRegionError(f"{what} {psi} > 1: region is empty")
    if psi < -1.0:
        if psi >= -1.0 - PSI_TOL:
            return -1.0
        raise ImproperRegionError(
            f"{what} {psi} < -1: half space does not cut the sphere")
    return float(psi)


def make_dome(sphere, halfspace):
    """Intersect sphere and half space, validating nondegeneracy.

    Raises EmptyRegionError when the half space excludes the sphere and
    ImproperRegionError when it contains it entirely (callers typically
    fall back to the bare sphere in the latter case).
    """
    q, r = sphere.center, sphere.radius
    n, c = halfspace.normal, halfspace.offset
    margin = float(n @ q) - c
    if r == 0.0:
        if margin > PSI_TOL * max(1.0, float(np.linalg.norm(q))):
            raise EmptyRegionError("point sphere violates the half space")
        return Dome(sphere, halfspace, 0.0, q.copy(), 0.0)
    psi = _clamp_cut(margin / r)
    qd = q - psi * r * n
    rd = r * np.sqrt(max(0.0, 1.0 - psi * psi))
    return Dome(sphere, halfspace, psi, qd, rd)


def circumsphere_refine(sphere, halfspace):
    """Smallest sphere containing the dome sphere ∩ half space.

    Only shrinks (and is only valid as a refinement) when the sphere
    center lies outside the dome, i.e. the cut fraction is positive.
    """
    dome = make_dome(sphere, halfspace)
    if dome.cut_fraction <= 0.0:
        raise NotRefinableError("cut fraction <= 0: circumsphere is the "
                                "sphere itself")
    return Sphere(center=dome.dome_center, radius=dome.dome_radius)


def dome_diameter(dome):
    """Exact diameter of the dome.

    The flat face's diameter when the sphere center is cut away
    (cut_fraction > 0), otherwise the full sphere diameter.
    """
    if dome.cut_fraction > 0.0:
        return 2.0 * dome.dome_radius
    return 2.0 * dome.sphere.radius


# ---------------------------------------------------------------------------
# support values
# ---------------------------------------------------------------------------

def mu_sphere(sphere, b):
    """max theta^T b over the ball: q^T b + r ||b||."""
    b = np.asarray(b, dtype=np.float64).ravel()
    return float(sphere.center @ b) + sphere.radius * float(np.linalg.norm(b))


def _checked_sqrt(radicand, scale):
    """sqrt with tiny negative radicands clamped, larger ones rejected."""
    bad = radicand < -RADICAND_TOL * scale
    if np.any(bad):
        raise GeometryError("negative radicand beyond tolerance: branch "
                            "misclassification in a support formula")
    return np.sqrt(np.maximum(radicand, 0.0))


def dome_support_increment(t1, t2, r, psi):
    """M1: the support of the dome over its center term, batched.

    t1 = n^T b, t2 = ||b||. Two branches: the maximizer either ignores the
    cut (value r*t2) or sits on the rim.
    """
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)
    scale = np.maximum(1.0, t2 * t2)
    u = _checked_sqrt(t2 * t2 - t1 * t1, scale)
    s = np.sqrt(max(0.0, 1.0 - psi * psi))
    rim = -psi * r * t1 + r * u * s
    return np.where(t1 < -psi * t2, r * t2, rim)


def mu_dome(dome, b):
    """max theta^T b over the dome (exact closed form)."""
    b = np.asarray(b, dtype=np.float64).ravel()
    t1 = float(dome.halfspace.normal @ b)
    t2 = float(np.linalg.norm(b))
    inc = dome_support_increment(np.array([t1]), np.array([t2]),
                                 dome.sphere.radius, dome.cut_fraction)
    return float(dome.sphere.center @ b) + float(inc[0])


def make_region2h(sphere, h1, h2, nonempty_tol=1e-10):
    """Validate and assemble a sphere ∩ two-half-space region.

    Degenerate normal pairs (parallel within roundoff) are rejected; the
    caller must deduplicate. Nonemptiness requires
    arccos(cut1) + arccos(cut2) >= arccos(normals_dot), checked with a
    small angular tolerance. The mirror-image failure, where one cut cap
    contains the other so a half space is redundant inside the sphere, is
    rejected too: the region is then just a dome and the four-branch
    support formula does not apply.
    """
    q, r = sphere.center, sphere.radius
    if r <= 0.0:
        raise ValueError("two-half-space region needs a positive radius")
    tau = float(h1.normal @ h2.normal)
    if 1.0 - tau * tau <= PSI_TOL:
        raise GeometryError("parallel or antiparallel half-space normals")
    psi1 = _clamp_cut((float(h1.normal @ q) - h1.offset) / r, "cut1")
    psi2 = _clamp_cut((float(h2.normal @ q) - h2.offset) / r, "cut2")
    gap = np.arccos(psi1) + np.arccos(psi2) - np.arccos(np.clip(tau, -1, 1))
    if gap < -nonempty_tol:
        raise EmptyRegionError("half spaces do not intersect inside the sphere")
    # Gram determinant of (n1, n2, boundary direction); negative with a
    # nonempty region means one cutting plane misses the sphere
    det = (1.0 - tau * tau + 2.0 * tau * psi1 * psi2
           - psi1 * psi1 - psi2 * psi2)
    if det < -PSI_TOL:
        raise ImproperRegionError("one half space is redundant inside the "
                                  "sphere; use the dome on the deeper cut")
    return Region2H(sphere, h1, h2, psi1, psi2, tau)


def region2h_support_increment(t1, t2, t3, r, psi1, psi2, tau,
                               return_branches=False):
    """M2: support of the two-half-space region over its center term, batched.

    t1 = n1^T b, t2 = n2^T b, t3 = ||b||. Four branches depending on which
    of the two cuts bind at the maximizer: neither (a), only the first (b),
    only the second (c), or both (d).
    """
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)
    t3 = np.asarray(t3, dtype=np.float64)
    scale = np.maximum(1.0, t3 * t3)
    u1 = _checked_sqrt(t3 * t3 - t1 * t1, scale)
    u2 = _checked_sqrt(t3 * t3 - t2 * t2, scale)
    s1 = np.sqrt(max(0.0, 1.0 - psi1 * psi1))
    s2 = np.sqrt(max(0.0, 1.0 - psi2 * psi2))
    one_m_tau2 = 1.0 - tau * tau

    cond_a = (t1 < -psi1 * t3) & (t2 < -psi2 * t3)
    # cross-multiplied forms of the angular conditions (denominators >= 0)
    cond_b = (t2 >= -psi2 * t3) & ((t1 - tau * t2) * s2 <
                                   (tau * psi2 - psi1) * u2)
    cond_c = (t1 >= -psi1 * t3) & ((t2 - tau * t1) * s1 <
                                   (tau * psi1 - psi2) * u1)

    val_a = r * t3
    val_b = -r * psi2 * t2 + r * u2 * s2
    val_c = -r * psi1 * t1 + r * u1 * s1
    h_psi = _checked_sqrt(
        np.asarray(one_m_tau2 + 2.0 * tau * psi1 * psi2
                   - psi1 * psi1 - psi2 * psi2), 1.0)
    h_t = _checked_sqrt(one_m_tau2 * t3 * t3 + 2.0 * tau * t1 * t2
                        - t1 * t1 - t2 * t2, scale)
    val_d = (r / one_m_tau2) * (
        -((psi1 - tau * psi2) * t1 + (psi2 - tau * psi1) * t2)
        + h_psi * h_t)

    branches = np.where(cond_a, 0, np.where(cond_b, 1, np.where(cond_c, 2, 3)))
    values = np.choose(branches, [val_a, val_b, val_c, val_d])
    if return_branches:
        return values, branches
    return values


def mu_region2h(region, b):
    """max theta^T b over the two-half-space region (exact closed form)."""
    b = np.asarray(b, dtype=np.float64).ravel()
    t1 = float(region.h1.normal @ b)
    t2 = float(region.h2.normal @ b)
    t3 = float(np.linalg.norm(b))
    inc = region2h_support_increment(
        np.array([t1]), np.array([t2]), np.array([t3]), region.sphere.radius,
        region.cut1, region.cut2, region.normals_dot)
    return float(region.sphere.center @ b) + float(inc[0])


def mu_region2h_branch(region, b):
    """Which M2 branch the maximizer for b lands in (0..3), for diagnostics."""
    b = np.asarray(b, dtype=np.float64).ravel()
    _, br = region2h_support_increment(
        np.array([float(region.h1.normal @ b)]),
        np.array([float(region.h2.normal @ b)]),
        np.array([float(np.linalg.norm(b))]),
        region.sphere.radius, region.cut1, region.cut2, region.normals_dot,
        return_branches=True)
    return int(br[0])
