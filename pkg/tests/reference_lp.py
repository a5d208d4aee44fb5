"""Brute-force LP reference: enumerate candidate vertices and pick the best.

For min c @ x subject to A @ x <= b, x >= 0, every vertex of the feasible
region activates some n linearly independent rows of the stacked system
[A; -I] x <= [b; 0].  Trying every n-subset of rows is exponential but
exact, which is the entire point: the embedded simplex is validated
against an oracle whose only failure mode would be obvious.
"""

import itertools

import numpy as np

FEAS_TOL = 1e-9


def vertex_minimize(c, a_ub, b_ub):
    """Return (status, best_x, best_objective) by exhaustive vertex search.

    Assumes the feasible region is bounded (callers add explicit box rows),
    so feasibility is equivalent to some vertex being feasible.
    """
    c = np.asarray(c, dtype=float)
    a_ub = np.asarray(a_ub, dtype=float)
    b_ub = np.asarray(b_ub, dtype=float)
    n = c.size
    stacked_a = np.vstack([a_ub, -np.eye(n)])
    stacked_b = np.concatenate([b_ub, np.zeros(n)])
    best = None
    best_x = None
    for rows in itertools.combinations(range(stacked_a.shape[0]), n):
        square = stacked_a[list(rows)]
        rhs = stacked_b[list(rows)]
        try:
            x = np.linalg.solve(square, rhs)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(x)):
            continue
        if np.any(stacked_a @ x > stacked_b + FEAS_TOL):
            continue
        value = float(c @ x)
        if best is None or value < best:
            best = value
            best_x = x
    if best is None:
        return "infeasible", None, None
    return "optimal", best_x, best


def random_bounded_lp(seed, n_vars, n_rows):
    """A random feasible bounded LP: b >= 0 keeps the origin feasible and
    an explicit simplex cap keeps the region bounded."""
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, 1.0, size=(n_rows, n_vars))
    b = rng.uniform(0.2, 2.0, size=n_rows)
    cap = float(rng.uniform(1.0, 4.0))
    a = np.vstack([a, np.ones(n_vars)])
    b = np.concatenate([b, [cap]])
    c = rng.normal(0.0, 1.0, size=n_vars)
    return c, a, b
