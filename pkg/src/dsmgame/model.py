"""Economic primitives: polynomial price curve, billing schemes, game mapping,
and the analytic uniqueness/monotonicity certificates.

Slot indices in the scalar helpers (`price`, `price_derivative`,
`monotonicity_certificate`) are 1-based, matching the on-disk file formats;
array positions are the usual 0-based numpy convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularityError(ValueError):
    """Raised when price curvature is evaluated at a diverging point
    (zero aggregate load with exponent strictly between 1 and 2)."""


def _as_1d(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_profile(q, horizon: int | None = None) -> np.ndarray:
    """Validate a consumption profile: 1-D, finite, nonnegative, optional length."""
    arr = _as_1d(q, "profile")
    if np.any(arr < 0):
        raise ValueError("profile entries must be nonnegative")
    if horizon is not None and arr.shape[0] != horizon:
        raise ValueError(f"profile has length {arr.shape[0]}, expected {horizon}")
    return arr


def aggregate(profiles) -> np.ndarray:
    """Elementwise sum of consumer profiles (rows of an N x H array)."""
    mat = np.atleast_2d(np.asarray(profiles, dtype=float))
    return mat.sum(axis=0)


@dataclass(frozen=True)
class PriceCurve:
    """Per-slot polynomial price p_h(L) = a_h * L^b_h + c_h.

    a_h > 0, b_h >= 1, c_h >= 0 for every slot; construction rejects violations.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = _as_1d(self.a, "a")
        b = _as_1d(self.b, "b")
        c = _as_1d(self.c, "c")
        if not (a.shape == b.shape == c.shape):
            raise ValueError("price parameters a, b, c must have equal length")
        if a.shape[0] == 0:
            raise ValueError("price curve needs at least one slot")
        if np.any(a <= 0):
            raise ValueError("price coefficients a_h must be positive")
        if np.any(b < 1):
            raise ValueError("price exponents b_h must be >= 1")
        if np.any(c < 0):
            raise ValueError("price offsets c_h must be nonnegative")
        for arr, name in ((a, "a"), (b, "b"), (c, "c")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return self.a.shape[0]

    def price_vector(self, loads) -> np.ndarray:
        """p_h(L_h) for an array of loads; last axis must have length H."""
        loads = np.asarray(loads, dtype=float)
        self._check_loads(loads)
        return self.a * loads**self.b + self.c

    def price_derivative_vector(self, loads) -> np.ndarray:
        """p_h'(L_h) = a_h b_h L^(b_h - 1); the b_h = 1 branch avoids 0**0."""
        loads = np.asarray(loads, dtype=float)
        self._check_loads(loads)
        linear = self.b == 1.0
        powers = np.where(linear, 0.0, self.b - 1.0)
        return np.where(linear, self.a, self.a * self.b * loads**powers)

    def price_second_derivative_vector(self, loads) -> np.ndarray:
        """p_h''(L_h) = a_h b_h (b_h - 1) L^(b_h - 2).

        Diverges at L = 0 when 1 < b_h < 2; such evaluations raise
        SingularityError instead of returning an infinity.
        """
        loads = np.asarray(loads, dtype=float)
        self._check_loads(loads)
        linear = self.b == 1.0
        singular = (loads == 0) & (self.b < 2) & ~linear
        if np.any(singular):
            slot = int(np.argmax(singular) % self.horizon) + 1
            raise SingularityError(
                f"price curvature diverges at zero load in slot {slot} "
                f"(exponent b={self.b[slot - 1]:g} < 2)"
            )
        powers = np.where(linear, 0.0, self.b - 2.0)
        with np.errstate(divide="ignore"):
            curv = self.a * self.b * (self.b - 1.0) * loads**powers
        return np.where(linear, 0.0, curv)

    def _check_loads(self, loads: np.ndarray) -> None:
        if loads.shape[-1:] != (self.horizon,):
            raise ValueError(
                f"load array has last dimension {loads.shape[-1:]}, expected {self.horizon}"
            )
        if np.any(loads < 0):
            raise ValueError("loads must be nonnegative")

    def _slot(self, h: int) -> int:
        if not 1 <= h <= self.horizon:
            raise ValueError(f"slot index {h} outside 1..{self.horizon}")
        return h - 1


def price(curve: PriceCurve, h: int, load: float) -> float:
    """Energy price of slot h (1-based) at total load `load`."""
    i = curve._slot(h)
    if load < 0:
        raise ValueError("load must be nonnegative")
    return float(curve.a[i] * load ** curve.b[i] + curve.c[i])


def price_derivative(curve: PriceCurve, h: int, load: float) -> float:
    """Marginal price p_h'(load); returns a_h for linear slots at any load."""
    i = curve._slot(h)
    if load < 0:
        raise ValueError("load must be nonnegative")
    if curve.b[i] == 1.0:
        return float(curve.a[i])
    return float(curve.a[i] * curve.b[i] * load ** (curve.b[i] - 1.0))


def bill_instantaneous(q_n, q_sigma, curve: PriceCurve) -> float:
    """Instantaneous-load bill: sum_h p_h(aggregate_h) * own_h."""
    q_n = as_profile(q_n, curve.horizon)
    q_sigma = as_profile(q_sigma, curve.horizon)
    return float(curve.price_vector(q_sigma) @ q_n)


def grid_cost(q_sigma, curve: PriceCurve) -> float:
    """Total grid cost sum_h p_h(aggregate_h) * aggregate_h."""
    q_sigma = as_profile(q_sigma, curve.horizon)
    return float(curve.price_vector(q_sigma) @ q_sigma)


def bill_total_load(n: int, profiles, budgets, curve: PriceCurve) -> float:
    """Total-load bill: consumer n's budget share of the grid cost.

    `n` indexes rows of `profiles` (0-based); `budgets` holds every E_m.
    """
    mat = np.atleast_2d(np.asarray(profiles, dtype=float))
    budgets = _as_1d(budgets, "budgets")
    if budgets.shape[0] != mat.shape[0]:
        raise ValueError("one budget per profile required")
    if not 0 <= n < mat.shape[0]:
        raise ValueError(f"consumer index {n} outside 0..{mat.shape[0] - 1}")
    total_budget = budgets.sum()
    if total_budget <= 0:
        raise ValueError("total energy budget must be positive")
    return float(budgets[n] / total_budget * grid_cost(mat.sum(axis=0), curve))


def mapping_profiles(profiles, aggregates, curve: PriceCurve) -> np.ndarray:
    """Game mapping rows f_n^h = p_h'(agg) * own_h + p_h(agg), broadcasting.

    `aggregates` is either one shared aggregate (H,) or one per row (N, H),
    which is how the consensus solvers feed per-consumer estimates through.
    """
    profiles = np.asarray(profiles, dtype=float)
    return profiles * curve.price_derivative_vector(aggregates) + curve.price_vector(
        aggregates
    )


def mapping_component(q_n, q_sigma, curve: PriceCurve) -> np.ndarray:
    """Consumer n's mapping F_n(q_n, q_sigma), the bill gradient in q_n."""
    q_n = as_profile(q_n, curve.horizon)
    q_sigma = as_profile(q_sigma, curve.horizon)
    return mapping_profiles(q_n, q_sigma, curve)


def hessian_diagonal(q_n, q_sigma, curve: PriceCurve) -> np.ndarray:
    """Diagonal of the own-profile bill Hessian: own_h * p_h'' + 2 p_h'."""
    q_n = as_profile(q_n, curve.horizon)
    q_sigma = as_profile(q_sigma, curve.horizon)
    return q_n * curve.price_second_derivative_vector(
        q_sigma
    ) + 2.0 * curve.price_derivative_vector(q_sigma)


@dataclass(frozen=True)
class Certificate:
    """Numeric uniqueness certificate for the equilibrium.

    `holds` is true iff every price exponent stays below `uniqueness_bound`
    = 3 + 4/(N-1); `kappa` carries the per-slot margin and `min_eigenvalue`
    the per-slot smallest eigenvalue of the symmetrized slot Jacobian when
    loads were supplied (NaN otherwise).
    """

    uniqueness_bound: float
    kappa: np.ndarray
    min_eigenvalue: np.ndarray
    holds: bool


def kappa_margin(n_consumers: int, b) -> np.ndarray:
    """Monotonicity margin kappa = (N + 1 + b) - sqrt(N (N - 1 + b^2))."""
    b = np.asarray(b, dtype=float)
    n = float(n_consumers)
    return (n + 1.0 + b) - np.sqrt(n * (n - 1.0 + b**2))


def uniqueness_certificate(
    n_consumers: int, curve: PriceCurve, slot_loads=None
) -> Certificate:
    """Evaluate the sufficient uniqueness condition max_h b_h < 3 + 4/(N-1).

    With `slot_loads` (an N x H matrix of per-consumer loads) the per-slot
    smallest symmetrized-Jacobian eigenvalues are evaluated as well.
    """
    if n_consumers < 2:
        raise ValueError("uniqueness bound requires at least two consumers")
    bound = 3.0 + 4.0 / (n_consumers - 1.0)
    kappa = kappa_margin(n_consumers, curve.b)
    min_eig = np.full(curve.horizon, np.nan)
    if slot_loads is not None:
        mat = np.asarray(slot_loads, dtype=float)
        if mat.shape != (n_consumers, curve.horizon):
            raise ValueError(
                f"slot_loads must have shape ({n_consumers}, {curve.horizon})"
            )
        for h in range(1, curve.horizon + 1):
            _, min_eig[h - 1] = monotonicity_certificate(mat[:, h - 1], h, curve)
    min_eig.setflags(write=False)
    kappa.setflags(write=False)
    return Certificate(
        uniqueness_bound=bound,
        kappa=kappa,
        min_eigenvalue=min_eig,
        holds=bool(np.max(curve.b) < bound),
    )


def jacobian_slot_matrix(slot_loads, h: int, curve: PriceCurve) -> np.ndarray:
    """N x N slot-load Jacobian G_h of the per-slot mapping.

    Entry (n, m) is sigma_h * [q_sum + (b_h - 1) * load_n], plus an extra
    sigma_h * q_sum on the diagonal, with sigma_h = a_h b_h q_sum^(b_h - 2).
    """
    loads = _as_1d(slot_loads, "slot_loads")
    if np.any(loads <= 0):
        raise ValueError("slot loads must be strictly positive")
    i = curve._slot(h)
    q_sum = loads.sum()
    sigma = curve.a[i] * curve.b[i] * q_sum ** (curve.b[i] - 2.0)
    z = q_sum + (curve.b[i] - 1.0) * loads
    g = np.tile(z[:, None], (1, loads.shape[0]))
    np.fill_diagonal(g, z + q_sum)
    return sigma * g


def rank_two_eigenvalues(slot_loads, h: int, curve: PriceCurve) -> tuple[float, float]:
    """Closed-form nonzero eigenvalues of the rank-two part z 1^T + 1 z^T,
    where z = q_sum * 1 + (b_h - 1) * loads."""
    loads = _as_1d(slot_loads, "slot_loads")
    i = curve._slot(h)
    n = loads.shape[0]
    q_sum = loads.sum()
    z = q_sum + (curve.b[i] - 1.0) * loads
    root = np.sqrt(n * (z @ z))
    base = (n + 1.0 + curve.b[i]) * q_sum - 2.0 * q_sum
    return float(base + root), float(base - root)


def monotonicity_certificate(
    slot_loads, h: int, curve: PriceCurve
) -> tuple[float, float]:
    """Per-slot monotonicity check at the given positive loads.

    Returns (kappa_h, min eigenvalue of G_h + G_h^T); the eigenvalue is
    computed with a dense symmetric eigensolver, and is positive whenever
    kappa_h is.
    """
    loads = _as_1d(slot_loads, "slot_loads")
    if np.any(loads <= 0):
        raise ValueError("slot loads must be strictly positive")
    g = jacobian_slot_matrix(loads, h, curve)
    min_eig = float(np.linalg.eigvalsh(g + g.T)[0])
    kappa = float(kappa_margin(loads.shape[0], curve.b[curve._slot(h)]))
    return kappa, min_eig


def par(q_sigma) -> float:
    """Peak-to-average ratio H * max_h(load) / sum_h(load); >= 1 always."""
    q_sigma = as_profile(q_sigma)
    total = q_sigma.sum()
    if total <= 0:
        raise ValueError("total load must be positive")
    return float(q_sigma.shape[0] * q_sigma.max() / total)
