"""Problem data and primal/dual plumbing for lasso screening.

Everything downstream (region tests, the solver, the benchmark harness)
works in terms of a `Dictionary` (the feature matrix) and an `Instance`
(a target vector plus regularization level). Both are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

LASSO = "lasso"
NONNEG = "nonneg"
KINDS = (LASSO, NONNEG)

# |theta^T b_i| >= 1 - ACTIVE_TOL marks constraint i as active
ACTIVE_TOL = 1e-7
_NORMALIZED_TOL = 1e-12


def _as_vector(y, n=None, name="vector"):
    y = np.asarray(y, dtype=np.float64).ravel()
    if n is not None and y.shape[0] != n:
        raise ValueError(f"{name} has length {y.shape[0]}, expected {n}")
    return y


class Dictionary:
    """Immutable feature matrix with cached per-column norms.

    Columns are the features. Dense input is stored column-major
    (Fortran order) so per-column access stays contiguous; sparse CSC
    input is kept sparse and densified only when a subdictionary is
    extracted for solving.
    """

    def __init__(self, columns):
        if sp.issparse(columns):
            B = sp.csc_matrix(columns, dtype=np.float64)
            if B.ndim != 2 or B.shape[0] < 1 or B.shape[1] < 1:
                raise ValueError("dictionary must be a nonempty 2-d matrix")
            norms = np.sqrt(np.asarray(B.multiply(B).sum(axis=0)).ravel())
        else:
            B = np.array(columns, dtype=np.float64, order="F")
            if B.ndim != 2 or B.shape[0] < 1 or B.shape[1] < 1:
                raise ValueError("dictionary must be a nonempty 2-d matrix")
            if not np.all(np.isfinite(B)):
                raise ValueError("dictionary contains non-finite entries")
            norms = np.linalg.norm(B, axis=0)
            B.flags.writeable = False
        if np.any(norms == 0.0):
            bad = int(np.flatnonzero(norms == 0.0)[0])
            raise ValueError(f"feature {bad} is the zero vector")
        norms.flags.writeable = False
        self._B = B
        self.norms = norms
        self.n = int(B.shape[0])
        self.p = int(B.shape[1])
        self.normalized = bool(np.all(np.abs(norms - 1.0) <= _NORMALIZED_TOL))

    @property
    def is_sparse(self):
        return sp.issparse(self._B)

    def dense(self):
        """The (n, p) matrix as a Fortran-ordered dense array."""
        if self.is_sparse:
            return np.asarray(self._B.toarray(), order="F")
        return self._B

    def column(self, i):
        if self.is_sparse:
            return self._B[:, [i]].toarray().ravel()
        return self._B[:, i]

    def dot_columns(self, v):
        """Inner product of every feature with v, i.e. B^T v."""
        v = _as_vector(v, self.n, "v")
        if self.is_sparse:
            return self._B.T @ v
        return self._B.T @ v

    def matvec(self, w):
        """B w for a full-length weight vector."""
        w = _as_vector(w, self.p, "w")
        return self._B @ w

    def subdictionary(self, indices):
        """Dense Dictionary restricted to the given column indices."""
        indices = _check_indices(indices, self.p)
        if self.is_sparse:
            return Dictionary(self._B[:, indices].toarray())
        return Dictionary(self._B[:, indices])


def _check_indices(indices, p):
    indices = np.asarray(indices, dtype=np.intp).ravel()
    if indices.size and (indices.min() < 0 or indices.max() >= p):
        raise IndexError(f"index out of range for p={p}")
    return indices


@dataclass(frozen=True)
class Instance:
    """One lasso / nonnegative-lasso problem: target y at level lambda.

    lambda_max is the smallest lambda with all-zero solution; argmax_index
    and argmax_sign record which (signed) feature attains it, ties broken
    by lowest index.
    """

    y: np.ndarray
    lam: float
    kind: str
    lambda_max: float
    argmax_index: int
    argmax_sign: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not self.lam > 0.0:
            raise ValueError("lambda must be positive")

    @property
    def ratio(self):
        return self.lam / self.lambda_max

    def key(self):
        """Cheap fingerprint used to detect mixed-instance report merges."""
        return (self.kind, float(self.lam), self.y.shape[0],
                hash(self.y.tobytes()))


def compute_lambda_max(dictionary, y, kind=LASSO):
    """Largest correlation over the feature pool: max_{b in pool} y^T b.

    The pool is {+-b_i} for the lasso and {b_i} for the nonnegative
    variant. Returns (value, argmax index, sign of the attaining pool
    element); ties go to the lowest index.
    """
    y = _as_vector(y, dictionary.n, "y")
    corr = dictionary.dot_columns(y)
    if kind == LASSO:
        vals = np.abs(corr)
    elif kind == NONNEG:
        vals = corr
    else:
        raise ValueError(f"kind must be one of {KINDS}")
    i = int(np.argmax(vals))
    sign = 1 if (kind == NONNEG or corr[i] >= 0.0) else -1
    return float(vals[i]), i, sign


def make_instance(dictionary, y, lam=None, ratio=None, kind=LASSO):
    """Build an Instance, giving either lambda directly or lambda/lambda_max."""
    y = _as_vector(y, dictionary.n, "y")
    y = y.copy()
    y.flags.writeable = False
    lmax, imax, sign = compute_lambda_max(dictionary, y, kind)
    if (lam is None) == (ratio is None):
        raise ValueError("give exactly one of lam or ratio")
    if lam is None:
        if lmax <= 0.0:
            raise ValueError("ratio-based lambda needs lambda_max > 0")
        lam = ratio * lmax
    return Instance(y=y, lam=float(lam), kind=kind, lambda_max=lmax,
                    argmax_index=imax, argmax_sign=sign)


@dataclass(frozen=True)
class Partition:
    """Split of the feature indices into selected and rejected sets."""

    selected: np.ndarray
    rejected: np.ndarray

    @classmethod
    def from_flags(cls, rejected_flags):
        flags = np.asarray(rejected_flags, dtype=bool).ravel()
        sel = np.flatnonzero(~flags)
        rej = np.flatnonzero(flags)
        return cls(selected=sel, rejected=rej)

    @property
    def p(self):
        return self.selected.size + self.rejected.size

    def rejection_fraction(self):
        return self.rejected.size / self.p


@dataclass(frozen=True)
class Solution:
    """Primal weights plus the certified dual point they induce."""

    w: np.ndarray
    theta: np.ndarray
    gap: float
    active: np.ndarray
    converged: bool = True

    @property
    def support(self):
        return np.flatnonzero(self.w != 0.0)


def subsample(w, indices):
    """w restricted to the given indices (the down-arrow of the sampling algebra)."""
    w = np.asarray(w, dtype=np.float64).ravel()
    indices = _check_indices(indices, w.shape[0])
    return w[indices]


def upsample(z, indices, p):
    """Zero-padded embedding of z at the given indices into length p."""
    z = np.asarray(z, dtype=np.float64).ravel()
    indices = _check_indices(indices, p)
    if z.shape[0] != indices.shape[0]:
        raise ValueError("z and indices length mismatch")
    out = np.zeros(p)
    out[indices] = z
    return out


def dual_from_primal(dictionary, inst, w):
    """theta = (y - B w) / lambda; at the primal optimum this is the dual optimum."""
    w = _as_vector(w, dictionary.p, "w")
    return (inst.y - dictionary.matvec(w)) / inst.lam


def pool_max(dictionary, theta, kind):
    """max_{b in pool} theta^T b, the quantity that decides dual feasibility."""
    corr = dictionary.dot_columns(theta)
    if kind == LASSO:
        return float(np.max(np.abs(corr))) if corr.size else 0.0
    return float(np.max(corr)) if corr.size else 0.0


def feasible_dual_point(dictionary, inst, theta):
    """Scale theta into the dual feasible set: theta / max(1, max_pool theta^T b)."""
    theta = _as_vector(theta, dictionary.n, "theta")
    m = pool_max(dictionary, theta, inst.kind)
    if m > 1.0:
        return theta / m
    return theta.copy()


def primal_objective(dictionary, inst, w):
    w = _as_vector(w, dictionary.p, "w")
    resid = inst.y - dictionary.matvec(w)
    return 0.5 * float(resid @ resid) + inst.lam * float(np.abs(w).sum())


def dual_objective(inst, theta):
    d = theta - inst.y / inst.lam
    return 0.5 * float(inst.y @ inst.y) - 0.5 * inst.lam ** 2 * float(d @ d)


def duality_gap(dictionary, inst, w, theta):
    """Primal minus dual objective after scaling theta into feasibility.

    Nonnegative up to roundoff; zero exactly when (w, theta) are jointly
    optimal.
    """
    theta = feasible_dual_point(dictionary, inst, theta)
    return primal_objective(dictionary, inst, w) - dual_objective(inst, theta)


def active_set(dictionary, theta, kind=LASSO, tol=ACTIVE_TOL):
    """Indices whose dual constraint is tight at theta (float-safe equality)."""
    corr = dictionary.dot_columns(theta)
    vals = np.abs(corr) if kind == LASSO else corr
    return np.flatnonzero(vals >= 1.0 - tol)


def recover_primal(dictionary, inst, theta_opt, tol=1e-8):
    """Primal weights from a certified dual optimum.

    Solves the linear system on the active columns, B_A w_A = y - lambda
    theta, returning the minimum-norm least-squares representative. Raises
    if the system is inconsistent beyond tol (theta was not optimal);
    warns, without failing, when the sign-consistency conditions are
    violated or the active system is rank deficient (the instance then has
    multiple primal solutions).
    """
    theta_opt = _as_vector(theta_opt, dictionary.n, "theta_opt")
    rhs = inst.y - inst.lam * theta_opt
    act = active_set(dictionary, theta_opt, inst.kind)
    w = np.zeros(dictionary.p)
    scale = max(1.0, float(np.linalg.norm(rhs)))
    if act.size == 0:
        if np.linalg.norm(rhs) > tol * scale:
            raise ValueError("empty active set but y != lambda*theta: "
                             "theta_opt is not a dual optimum")
        return w
    Ba = dictionary.subdictionary(act).dense()
    wa, _, rank, _ = np.linalg.lstsq(Ba, rhs, rcond=None)
    if np.linalg.norm(Ba @ wa - rhs) > tol * scale:
        raise ValueError("active-set system inconsistent beyond tolerance: "
                         "theta_opt is not a dual optimum")
    if rank < act.size:
        warnings.warn("active-set system is rank deficient; returning the "
                      "minimum-norm primal representative", RuntimeWarning)
    corr_a = dictionary.dot_columns(theta_opt)[act]
    if np.any(wa * corr_a < -1e-9 * scale):
        warnings.warn("sign-inconsistent active weights: primal solution is "
                      "not unique at this instance", RuntimeWarning)
    if inst.kind == NONNEG:
        wa = np.maximum(wa, 0.0)
    w[act] = wa
    return w


def rescale_instance(dictionary, inst, alpha):
    """Scale (B, y, lambda) -> (alpha B, alpha y, alpha^2 lambda).

    Leaves lambda/lambda_max unchanged, so every default-parameter test
    sees the same geometry.
    """
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    scaled = Dictionary(dictionary._B * alpha if not dictionary.is_sparse
                        else dictionary._B.multiply(alpha))
    inst2 = make_instance(scaled, alpha * np.asarray(inst.y),
                          lam=alpha ** 2 * inst.lam, kind=inst.kind)
    return scaled, inst2
