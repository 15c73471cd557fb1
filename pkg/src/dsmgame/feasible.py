"""Per-consumer feasible sets (box bounds plus a total-energy budget) and
exact Euclidean projection onto them.

The projection solves the scalar dual equation
    sum_h clip(v_h - lam, q_min_h, q_max_h) = E
by bisection on lam; the feasible set is a box intersected with a hyperplane,
so this one-dimensional root find is exact up to the bisection tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import _as_1d

#: absolute bisection tolerance on the dual multiplier
DUAL_TOL = 1e-12
_MAX_BISECT = 200


@dataclass(frozen=True)
class ConsumerSpec:
    """Box bounds and total energy budget defining one consumer's set Q_n."""

    q_min: np.ndarray
    q_max: np.ndarray
    energy: float

    def __post_init__(self):
        q_min = _as_1d(self.q_min, "q_min")
        q_max = _as_1d(self.q_max, "q_max")
        if q_min.shape != q_max.shape:
            raise ValueError("q_min and q_max must have equal length")
        for arr, name in ((q_min, "q_min"), (q_max, "q_max")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "energy", float(self.energy))

    @property
    def horizon(self) -> int:
        return self.q_min.shape[0]


def validate(spec: ConsumerSpec) -> str | None:
    """Check nonemptiness of Q_n; returns None when valid, else a report
    naming the first violated slot or the budget mismatch."""
    crossed = spec.q_min > spec.q_max
    if np.any(crossed):
        h = int(np.argmax(crossed)) + 1
        return (
            f"slot {h}: q_min={spec.q_min[h - 1]:g} exceeds q_max={spec.q_max[h - 1]:g}"
        )
    if np.any(spec.q_min < 0):
        h = int(np.argmax(spec.q_min < 0)) + 1
        return f"slot {h}: q_min={spec.q_min[h - 1]:g} is negative"
    if spec.energy <= 0:
        return f"energy budget E={spec.energy:g} must be positive"
    lo, hi = spec.q_min.sum(), spec.q_max.sum()
    if not lo <= spec.energy <= hi:
        return (
            f"energy budget E={spec.energy:g} outside feasible range "
            f"[{lo:g}, {hi:g}]"
        )
    return None


def is_feasible(q, spec: ConsumerSpec, tol: float = 1e-9) -> bool:
    """True iff q respects the box bounds and budget within tolerance."""
    q = _as_1d(q, "profile")
    if q.shape[0] != spec.horizon:
        raise ValueError(f"profile has length {q.shape[0]}, expected {spec.horizon}")
    if np.any(q < spec.q_min - tol) or np.any(q > spec.q_max + tol):
        return False
    return abs(q.sum() - spec.energy) <= tol


def _project_rows_small(v, q_min, q_max, budgets) -> np.ndarray:
    # scalar-arithmetic twin of the vectorized bisection below; on the tiny
    # instances the gossip loop and the oracles work with, numpy dispatch
    # overhead dominates, so plain floats are several times faster
    out = np.empty_like(v)
    for r in range(v.shape[0]):
        vr, lo_b, hi_b = v[r].tolist(), q_min[r].tolist(), q_max[r].tolist()
        target = float(budgets[r])
        lo = min(x - b for x, b in zip(vr, hi_b))
        hi = max(x - b for x, b in zip(vr, lo_b))
        width = hi - lo
        if width > DUAL_TOL:
            steps = min(_MAX_BISECT, int(math.ceil(math.log2(width / DUAL_TOL))))
            for _ in range(steps):
                mid = 0.5 * (lo + hi)
                total = 0.0
                for x, a, b in zip(vr, lo_b, hi_b):
                    y = x - mid
                    total += a if y < a else b if y > b else y
                if total >= target:
                    lo = mid
                else:
                    hi = mid
        lam = 0.5 * (lo + hi)
        q = [min(max(x - lam, a), b) for x, a, b in zip(vr, lo_b, hi_b)]
        free = [k for k, (y, a, b) in enumerate(zip(q, lo_b, hi_b)) if a < y < b]
        if free:
            adjust = (target - sum(q)) / len(free)
            for k in free:
                q[k] = min(max(q[k] + adjust, lo_b[k]), hi_b[k])
        out[r] = q
    return out


def project_rows(points, q_min, q_max, budgets) -> np.ndarray:
    """Project each row of `points` onto its own box-plus-budget set.

    All arguments broadcast row-wise: q_min/q_max are (N, H), budgets (N,).
    Vectorized bisection runs all dual variables in lockstep, which keeps the
    synchronous-round solvers a few dense array ops per iteration.
    """
    v = np.atleast_2d(np.asarray(points, dtype=float))
    q_min = np.atleast_2d(q_min)
    q_max = np.atleast_2d(q_max)
    budgets = np.atleast_1d(budgets)
    if v.shape[0] <= 6 and v.shape[1] <= 6:
        return _project_rows_small(
            v,
            np.broadcast_to(q_min, v.shape),
            np.broadcast_to(q_max, v.shape),
            np.broadcast_to(budgets, v.shape[:1]),
        )
    lo = (v - q_max).min(axis=1)
    hi = (v - q_min).max(axis=1)
    # each halving shrinks every bracket; the iteration count needed for the
    # widest one is known upfront, so the loop body stays branch-free
    width = float(np.max(hi - lo))
    if width > DUAL_TOL:
        steps = min(_MAX_BISECT, int(np.ceil(np.log2(width / DUAL_TOL))))
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            surplus = np.clip(v - mid[:, None], q_min, q_max).sum(axis=1) - budgets
            too_low = surplus >= 0
            lo = np.where(too_low, mid, lo)
            hi = np.where(too_low, hi, mid)
    lam = 0.5 * (lo + hi)
    q = np.clip(v - lam[:, None], q_min, q_max)
    # polish: spread the residual budget gap over the strictly free
    # coordinates; exact for singleton sets and keeps sums at float accuracy
    free = (q > q_min) & (q < q_max)
    n_free = free.sum(axis=1)
    adjust = np.where(n_free > 0, (budgets - q.sum(axis=1)) / np.maximum(n_free, 1), 0.0)
    return np.clip(q + adjust[:, None] * free, q_min, q_max)


def project(v, spec: ConsumerSpec) -> np.ndarray:
    """Euclidean projection of v onto Q_n; idempotent and nonexpansive."""
    report = validate(spec)
    if report is not None:
        raise ValueError(f"invalid consumer spec: {report}")
    v = _as_1d(v, "point")
    if v.shape[0] != spec.horizon:
        raise ValueError(f"point has length {v.shape[0]}, expected {spec.horizon}")
    return project_rows(v, spec.q_min, spec.q_max, spec.energy)[0]


def sample_feasible(spec: ConsumerSpec, rng: np.random.Generator) -> np.ndarray:
    """Random point of Q_n: uniform draw inside the box, then projected."""
    report = validate(spec)
    if report is not None:
        raise ValueError(f"invalid consumer spec: {report}")
    draw = rng.uniform(spec.q_min, spec.q_max)
    return project(draw, spec)
