"""Shared test utilities: independent oracles and instance generators.

The oracles here deliberately avoid the library's closed forms: support
values come from an SOCP solver, maxima from exhaustive scans, and
containment checks from rejection sampling. They are the other side of
every dual-route check.
"""

import numpy as np
import cvxpy as cp

from lassoscreen import Dictionary, make_instance

S2 = np.sqrt(2.0) / 2.0


def tiny_dictionary():
    """Three features in the plane: e1, e2 and the diagonal unit vector."""
    return Dictionary(np.array([[1.0, 0.0, S2],
                                [0.0, 1.0, S2]]))


def tiny_instance(lam=0.5, kind="lasso"):
    d = tiny_dictionary()
    return d, make_instance(d, np.array([1.0, 0.0]), lam=lam, kind=kind)


def support_oracle(q, r, halfspaces, b, solver=cp.CLARABEL):
    """max b^T theta over sphere(q, r) cut by half spaces, via SOCP."""
    th = cp.Variable(q.size)
    cons = [cp.norm(th - q) <= r]
    for n, c in halfspaces:
        cons.append(n @ th <= c)
    prob = cp.Problem(cp.Maximize(b @ th), cons)
    prob.solve(solver=solver)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"oracle SOCP status {prob.status}")
    return float(prob.value)


def lasso_oracle(dictionary, inst, solver=cp.CLARABEL):
    """Reference solve of the primal through cvxpy (independent of CD)."""
    B = dictionary.dense()
    w = cp.Variable(dictionary.p, nonneg=(inst.kind == "nonneg"))
    obj = 0.5 * cp.sum_squares(inst.y - B @ w) + inst.lam * cp.norm1(w)
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=solver)
    return np.asarray(w.value).ravel(), float(prob.value)


def random_unit(rng, d):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_problem(rng, n=None, p=None, kind="lasso", style="uniform",
                   unit_norms=True, y_scale=1.0):
    """A random dictionary plus target, in the styles the suite sweeps.

    style "uniform" mimics the synthetic benchmark data (positive,
    strongly correlated features); "gaussian" gives nearly orthogonal
    ones. With unit_norms=False the column norms are drawn from
    [0.5, 2].
    """
    n = n or int(rng.integers(10, 51))
    p = p or int(rng.integers(50, 501))
    if style == "uniform":
        M = rng.random((n, p))
    else:
        M = rng.normal(size=(n, p))
    M /= np.linalg.norm(M, axis=0)
    if not unit_norms:
        M *= rng.uniform(0.5, 2.0, size=p)
    if style == "uniform":
        y = rng.random(n)
    else:
        y = rng.normal(size=n)
    y = y / np.linalg.norm(y) * y_scale
    return Dictionary(M), y


def random_instance(rng, ratio=None, **kw):
    d, y = random_problem(rng, **kw)
    ratio = ratio if ratio is not None else rng.uniform(0.05, 0.95)
    kind = kw.get("kind", "lasso")
    return d, make_instance(d, y, ratio=ratio, kind=kind)


def sample_feasible(rng, dictionary, kind, count):
    """Random points of the dual feasible set (scaled random directions)."""
    out = []
    for _ in range(count):
        u = rng.normal(size=dictionary.n)
        corr = dictionary.dot_columns(u)
        m = np.max(np.abs(corr)) if kind == "lasso" else max(np.max(corr), 0.0)
        if m <= 0:
            out.append(u)
            continue
        out.append(u / m * rng.uniform(0.0, 1.0))
    return out


def sample_dome_points(rng, dome, count):
    """Points of the dome: rejection-sampled interior plus boundary points."""
    q, r = dome.sphere.center, dome.sphere.radius
    n, c = dome.halfspace.normal, dome.halfspace.offset
    d = q.size
    pts = []
    while len(pts) < count // 2:
        u = rng.normal(size=d)
        x = q + r * rng.uniform(0, 1) ** (1.0 / d) * u / np.linalg.norm(u)
        if n @ x <= c:
            pts.append(x)
    # spherical boundary part
    while len(pts) < 3 * count // 4:
        u = random_unit(rng, d)
        x = q + r * u
        if n @ x <= c:
            pts.append(x)
    # flat face: dome_center + dome_radius * unit vector orthogonal to n
    while len(pts) < count:
        u = rng.normal(size=d)
        u -= (u @ n) * n
        nu = np.linalg.norm(u)
        if nu == 0:
            continue
        x = dome.dome_center + dome.dome_radius * rng.uniform(0, 1) ** (
            1.0 / max(d - 1, 1)) * u / nu
        if np.linalg.norm(x - q) <= r * (1 + 1e-12):
            pts.append(x)
    return np.array(pts)
