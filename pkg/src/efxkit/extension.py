"""Smoothed certificates: a continuous bound on rounded envy and its limit.

Rounding a fractional point row by row (each item picks an owner from its
row's distribution) gives a random allocation whose expected worst envy is
bounded by a smooth log-sum-exp expression in the point and a temperature.
Reparameterizing the point through a row-wise softmax sends the bound, as
the temperature grows, to a piecewise-linear objective over unconstrained
score matrices: a difference of two convex max-terms whose infimum is
nonpositive exactly when an EFX allocation exists.  Integral allocations
embed as score matrices with zeros at owner coordinates and a large
negative constant elsewhere, where the objective reproduces the exact EFX
slack.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .instance import Allocation, Instance, total_mass

DEFAULT_LAMBDAS = (1.0, 10.0, 100.0, 1000.0)


def default_box_bound(inst: Instance) -> float:
    """Box radius for score matrices: one more than twice the total mass.

    Any strict bound above twice the total mass keeps encoded allocations
    faithful; this default is shared by the DC and fixed-point solvers.
    """
    return 2.0 * total_mass(inst).total + 1.0


def rowwise_round(x: np.ndarray, seed: int) -> Allocation:
    """Sample one owner per item from the item's row distribution."""
    rng = np.random.default_rng(seed)
    return Allocation(_rowwise_round_batch(x, rng, 1)[0])


def rowwise_round_many(x: np.ndarray, seed: int, count: int) -> np.ndarray:
    """Draw ``count`` independent row-wise roundings as a (count, m) owner array."""
    rng = np.random.default_rng(seed)
    return _rowwise_round_batch(x, rng, count)


def _rowwise_round_batch(x: np.ndarray, rng: np.random.Generator, count: int) -> np.ndarray:
    """Vectorized row-wise rounding: (count, m) owner rows.

    Inverse-CDF sampling with u in [0, 1); integral rows always return
    their unit coordinate regardless of the draw.
    """
    x = np.asarray(x, dtype=float)
    m, n = x.shape
    cdf = np.cumsum(x, axis=1)
    u = rng.random((count, m))
    owners = (u[:, :, None] >= cdf[None, :, :]).sum(axis=2)
    return np.minimum(owners, n - 1)


def rounding_bound(inst: Instance, x: np.ndarray, lam: float) -> float:
    """Log-sum-exp upper bound on expected worst envy under row-wise rounding.

    Evaluated entirely in log space: each item contributes a three-term
    log-sum-exp per ordered agent pair (terms with zero coefficient drop
    out), so the bound stays finite and accurate for temperatures into the
    thousands.  At integral points it reproduces the exact log-mean-exp of
    the envy gaps, hence is at most log(n * m) / lam on EFX allocations.
    """
    if lam <= 0:
        raise ValueError("temperature must be positive")
    x = np.asarray(x, dtype=float)
    values = inst.values
    m, n = x.shape
    summands = []
    with np.errstate(divide="ignore"):
        log_x = np.log(x)
        for i in range(n):
            v = values[:, i]
            for j in range(n):
                if i == j:
                    continue
                rest = 1.0 - x[:, i] - x[:, j]
                log_rest = np.where(rest > 0.0, np.log(np.maximum(rest, 1e-300)), -np.inf)
                stacked = np.stack(
                    [log_rest, log_x[:, i] - lam * v, log_x[:, j] + lam * v]
                )
                factor_logs = logsumexp(stacked, axis=0)
                total = factor_logs.sum()
                summands.append(log_x[:, j] + (total - factor_logs))
    return float(logsumexp(np.concatenate(summands)) / lam)


def softmax_map(y: np.ndarray, lam: float) -> np.ndarray:
    """Row-wise softmax at temperature lam, with rows renormalized.

    After the usual max-shifted exponentials are normalized, the largest
    coordinate absorbs the row's remaining rounding defect, which makes
    row sums bit-exactly 1.0 for almost every input and never worse than
    one ulp off (the final pairwise summation order does its own rounding,
    so absolute exactness cannot be forced for every row).  The nudge
    moves the top coordinate by at most an ulp and cannot break
    nonnegativity; coordinates whose exponentials underflow come out as
    exact zeros rather than tiny positives.
    """
    if lam <= 0:
        raise ValueError("temperature must be positive")
    y = np.asarray(y, dtype=float)
    z = lam * (y - y.max(axis=1, keepdims=True))
    e = np.exp(z)
    x = e / e.sum(axis=1, keepdims=True)
    rows = np.arange(x.shape[0])
    top = x.argmax(axis=1)
    for _ in range(4):
        defect = 1.0 - x.sum(axis=1)
        if not defect.any():
            break
        x[rows, top] += defect
    return x


def _pair_shift_max(values: np.ndarray, y: np.ndarray, i: int, j: int) -> np.ndarray:
    """Per-item row maximum after shifting agent i's value onto column j.

    Column i drops by the item's value for i, column j gains it, and the
    remaining columns stand; the result is the row max of that shift.
    """
    v = values[:, i]
    shifted = np.maximum(y[:, i] - v, y[:, j] + v)
    if y.shape[1] > 2:
        masked = y.copy()
        masked[:, i] = -np.inf
        masked[:, j] = -np.inf
        shifted = np.maximum(shifted, masked.max(axis=1))
    return shifted


def dc_objective(inst: Instance, y: np.ndarray) -> float:
    """Piecewise-linear existence objective over score matrices.

    Difference of two convex terms: the worst, over agent pairs and items,
    of the item's column-j score plus the shifted row maxima of all other
    items, minus the plain sum of row maxima.  Row-wise constant shifts
    cancel, and its infimum is <= 0 exactly when an EFX allocation exists.
    """
    y = np.asarray(y, dtype=float)
    values = inst.values
    h = y.max(axis=1)
    best = -np.inf
    for i in range(inst.n):
        for j in range(inst.n):
            if i == j:
                continue
            shifted = _pair_shift_max(values, y, i, j)
            total = shifted.sum()
            candidate = (y[:, j] + (total - shifted)).max()
            best = max(best, candidate)
    return float(best - h.sum())


def encode_allocation(inst: Instance, alloc: Allocation, m_const: float | None = None) -> np.ndarray:
    """Score matrix of an allocation: zero at owner coordinates, -M elsewhere.

    M must strictly exceed twice the total mass so that the objective at
    the encoding equals the allocation's exact EFX slack.
    """
    if m_const is None:
        m_const = default_box_bound(inst)
    if m_const <= 2.0 * total_mass(inst).total:
        raise ValueError("box radius must strictly exceed twice the total mass")
    y = np.full((inst.m, inst.n), -m_const)
    y[np.arange(inst.m), alloc.owner] = 0.0
    return y


def softmax_limit_gaps(inst: Instance, y: np.ndarray, lams=DEFAULT_LAMBDAS) -> list[float]:
    """Gaps between the smooth bound along the softmax path and the
    piecewise-linear objective, for an increasing temperature ladder."""
    lams = [float(l) for l in lams]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("temperatures must be strictly increasing")
    f = dc_objective(inst, y)
    return [abs(rounding_bound(inst, softmax_map(y, lam), lam) - f) for lam in lams]
