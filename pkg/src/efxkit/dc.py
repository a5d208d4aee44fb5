"""Difference-of-convex descent on the existence objective.

The existence objective splits into two convex piecewise-linear terms: a
max-term over agent pairs and items, minus the sum of row maxima.  Each
descent step linearizes the subtracted term at the current scores through
one row-max selection per item, and the resulting convex subproblem is a
small LP: an epigraph variable for the max-term, one auxiliary variable
per item and agent pair for the shifted row maxima, and box bounds that
keep every iterate inside the region where encoded allocations live.
Successive LP optima are non-increasing, and any score matrix that reaches
a nonpositive objective extracts a verified EFX allocation by row argmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .extension import _pair_shift_max, dc_objective, default_box_bound, encode_allocation
from .instance import DEFAULT_EFX_TOL, Allocation, Instance, is_efx, total_mass

DCA_STEP_TOL = 1e-8
DCA_MAX_ITERS = 200
DESCENT_SLACK = 1e-9
RECHECK_TOL = 1e-8


class InternalCheckError(RuntimeError):
    """An invariant the solvers rely on failed at run time."""


def convex_part(inst: Instance, y: np.ndarray) -> float:
    """The max-term of the objective: worst over pairs and items of the
    item's envied-column score plus the other items' shifted row maxima."""
    y = np.asarray(y, dtype=float)
    values = inst.values
    best = -np.inf
    for i in range(inst.n):
        for j in range(inst.n):
            if i == j:
                continue
            shifted = _pair_shift_max(values, y, i, j)
            total = shifted.sum()
            best = max(best, float((y[:, j] + (total - shifted)).max()))
    return best


def rowmax_sum(y: np.ndarray) -> float:
    """The subtracted convex term: sum of per-item row maxima."""
    return float(np.asarray(y, dtype=float).max(axis=1).sum())


@dataclass(frozen=True)
class LPModel:
    """Sparse rows of the linearized subproblem plus box bounds.

    Variables are ordered: m*n scores, then one auxiliary per (item, pair),
    then the epigraph variable.  Row families: 1 epigraph rows coupling the
    scores to the max-term, 2 and 3 lower-bounding each auxiliary by the
    shifted scores of the pair's two agents, 4 by the bystander scores.
    """

    m: int
    n: int
    pairs: tuple
    rows: tuple  # (((var, coef), ...), rhs, family)
    lower: np.ndarray
    upper: np.ndarray
    objective: np.ndarray

    @property
    def n_vars(self) -> int:
        return self.m * self.n + self.m * len(self.pairs) + 1

    def y_var(self, item: int, agent: int) -> int:
        return item * self.n + agent

    def z_var(self, item: int, pair: int) -> int:
        return self.m * self.n + item * len(self.pairs) + pair

    @property
    def w_var(self) -> int:
        return self.m * self.n + self.m * len(self.pairs)


@dataclass(frozen=True)
class LPSolution:
    status: str
    y: np.ndarray | None
    z: np.ndarray | None
    w: float | None
    objective: float | None
    pivots: int


def build_lp(inst: Instance, selection: np.ndarray, m_const: float | None = None) -> LPModel:
    """Build the LP for one descent step.

    ``selection`` is the per-item agent index at which the subtracted term
    is linearized; the objective is the epigraph variable minus the sum of
    the selected scores.
    """
    m, n = inst.m, inst.n
    values = inst.values
    selection = np.asarray(selection, dtype=int)
    if selection.shape != (m,) or selection.min() < 0 or selection.max() >= n:
        raise ValueError("selection must pick one agent per item")
    if m_const is None:
        m_const = default_box_bound(inst)
    mass = total_mass(inst).total
    vmax = float(values.max())
    pairs = tuple((i, j) for i in range(n) for j in range(n) if i != j)

    model_dims = LPModel(
        m=m, n=n, pairs=pairs, rows=(),
        lower=np.zeros(0), upper=np.zeros(0), objective=np.zeros(0),
    )
    rows = []
    for p, (i, j) in enumerate(pairs):
        for k in range(m):
            coeffs = [(model_dims.y_var(k, j), 1.0)]
            coeffs += [(model_dims.z_var(ell, p), 1.0) for ell in range(m) if ell != k]
            coeffs.append((model_dims.w_var, -1.0))
            rows.append((tuple(coeffs), 0.0, 1))
    for p, (i, j) in enumerate(pairs):
        for ell in range(m):
            z = model_dims.z_var(ell, p)
            rows.append((((model_dims.y_var(ell, i), 1.0), (z, -1.0)), float(values[ell, i]), 2))
            rows.append((((model_dims.y_var(ell, j), 1.0), (z, -1.0)), float(-values[ell, i]), 3))
            for r in range(n):
                if r != i and r != j:
                    rows.append((((model_dims.y_var(ell, r), 1.0), (z, -1.0)), 0.0, 4))

    n_y = m * n
    n_z = m * len(pairs)
    lower = np.concatenate([
        np.full(n_y, -m_const),
        np.full(n_z, -m_const - vmax),
        [-(m + 1) * m_const - mass],
    ])
    upper = np.concatenate([
        np.zeros(n_y),
        np.full(n_z, m_const + vmax),
        [(m + 1) * m_const + mass],
    ])
    objective = np.zeros(n_y + n_z + 1)
    objective[-1] = 1.0
    for ell in range(m):
        objective[model_dims.y_var(ell, int(selection[ell]))] -= 1.0

    return LPModel(
        m=m, n=n, pairs=pairs, rows=tuple(rows),
        lower=lower, upper=upper, objective=objective,
    )


def _dense_rows(model: LPModel) -> tuple[np.ndarray, np.ndarray]:
    a = np.zeros((len(model.rows), model.n_vars))
    b = np.empty(len(model.rows))
    for r, (coeffs, rhs, _family) in enumerate(model.rows):
        for var, coef in coeffs:
            a[r, var] = coef
        b[r] = rhs
    return a, b


def solve_lp(model: LPModel) -> LPSolution:
    """Solve the model with the embedded simplex and recheck the vertex.

    Variables are shifted by their lower bounds into standard form, with
    upper bounds appended as extra rows.  The returned point is verified
    against every original row and bound rather than trusting the solver
    status alone.
    """
    a_model, b_model = _dense_rows(model)
    span = model.upper - model.lower
    a_std = np.vstack([a_model, np.eye(model.n_vars)])
    b_std = np.concatenate([b_model - a_model @ model.lower, span])
    result = simplex.solve_standard(model.objective, a_std, b_std)
    if result.status != "optimal":
        return LPSolution(result.status, None, None, None, None, result.pivots)
    point = result.x + model.lower
    if (
        np.any(a_model @ point > b_model + RECHECK_TOL)
        or np.any(point < model.lower - RECHECK_TOL)
        or np.any(point > model.upper + RECHECK_TOL)
    ):
        return LPSolution("numeric-failure", None, None, None, None, result.pivots)
    n_y = model.m * model.n
    n_z = model.m * len(model.pairs)
    y = point[:n_y].reshape(model.m, model.n)
    z = point[n_y : n_y + n_z].reshape(model.m, len(model.pairs))
    w = float(point[-1])
    return LPSolution("optimal", y, z, w, float(model.objective @ point), result.pivots)


def greedy_allocation(inst: Instance) -> Allocation:
    """Give each item to the agent valuing it most, ties to the smaller index."""
    return Allocation(np.argmax(inst.values, axis=1))


@dataclass
class DCAResult:
    y: np.ndarray
    objective: float
    iterations: int
    converged: bool
    status: str  # converged | max-iters | lp-failure
    trace: list = field(default_factory=list)
    allocation: Allocation | None = None
    efx: bool = False


def dca_solve(
    inst: Instance,
    y0: np.ndarray | None = None,
    delta: float = DCA_STEP_TOL,
    max_iters: int = DCA_MAX_ITERS,
    m_const: float | None = None,
    efx_tol: float = DEFAULT_EFX_TOL,
) -> DCAResult:
    """Iterated linearize-and-solve descent from a score matrix.

    Starts at the encoding of the greedy allocation unless ``y0`` is given,
    linearizes the row-max term through each item's current argmax (ties to
    the smallest agent), solves the LP, and stops once the iterate moves by
    at most ``delta`` in the max norm.  LP objective values are checked to
    be non-increasing; the extracted allocation is the row argmax of the
    final scores and its EFX verdict is checked independently.
    """
    if m_const is None:
        m_const = default_box_bound(inst)
    if y0 is None:
        y = encode_allocation(inst, greedy_allocation(inst), m_const)
    else:
        y = np.array(y0, dtype=float)
        if y.shape != (inst.m, inst.n):
            raise ValueError("y0 must be an items-by-agents matrix")
        if y.min() < -m_const or y.max() > 0.0:
            raise ValueError("y0 must lie in the score box")

    trace: list[dict] = []
    previous_objective = np.inf
    status = "max-iters"
    converged = False
    for t in range(max_iters):
        selection = np.argmax(y, axis=1)
        model = build_lp(inst, selection, m_const)
        sol = solve_lp(model)
        if sol.status != "optimal":
            status = "lp-failure"
            break
        if sol.objective > previous_objective + DESCENT_SLACK:
            raise InternalCheckError(
                f"descent violated at step {t}: {previous_objective} -> {sol.objective}"
            )
        previous_objective = sol.objective
        step = float(np.abs(sol.y - y).max())
        y = sol.y
        trace.append(
            {
                "iteration": t,
                "objective": float(sol.objective),
                "value": dc_objective(inst, y),
                "step": step,
            }
        )
        if step <= delta:
            status = "converged"
            converged = True
            break

    allocation = Allocation(np.argmax(y, axis=1))
    report = is_efx(inst, allocation, efx_tol)
    objective = trace[-1]["objective"] if trace else dc_objective(inst, y)
    return DCAResult(
        y=y,
        objective=float(objective),
        iterations=len(trace),
        converged=converged,
        status=status,
        trace=trace,
        allocation=allocation,
        efx=report.ok,
    )
