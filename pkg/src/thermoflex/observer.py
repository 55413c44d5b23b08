"""
Output-injection observer for the fleet distribution.

    d x~/dt = (A + B u) x~ + L(t) (y - C x~),   L = [0, ..., 0, L_2N]^T

``L_2N`` is re-selected from the current control so that
``det(A + B u - L C + eps I)`` has the sign of a negative definite matrix.
The determinant is affine in ``L_2N`` (the gain only enters the last row),
so two evaluations locate its root.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import GainSelectionError, ParameterError
from .fleet import RateSet, SystemMatrices, check_time_step, project_to_simplex, uniform_state

DEFAULT_GAMMA = 0.5
DEFAULT_MARGIN_FRACTION = 0.05
GAIN_STEP_FRACTION = 0.1
_GAIN_CACHE_QUANTUM = 1e-6


@dataclass(frozen=True)
class ObserverState:
    x_hat: np.ndarray
    l_gain: float
    gamma: float
    margin: float
    epsilon_t: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ParameterError(f"gamma must lie in (0, 1), got {self.gamma!r}")
        if not self.margin > 0:
            raise ParameterError(f"margin must be positive, got {self.margin!r}")


def default_margin(rates: RateSet) -> float:
    return DEFAULT_MARGIN_FRACTION * min(rates.alpha, rates.beta)


def initial_state(rates: RateSet, n_bins: int, gamma: float = DEFAULT_GAMMA,
                  margin: float | None = None, x_hat: np.ndarray | None = None) -> ObserverState:
    margin = default_margin(rates) if margin is None else margin
    if margin > 0.5 * min(rates.alpha, rates.beta):
        raise ParameterError(f"margin {margin} exceeds half of min(alpha, beta)")
    x0 = uniform_state(n_bins) if x_hat is None else np.asarray(x_hat, dtype=float)
    return ObserverState(x0, 0.0, gamma, margin, 0.0)


def restricted_control(u: float, rates: RateSet, margin: float) -> float:
    """Clamp ``u`` into ``[-beta + margin, alpha - margin]``."""
    if not margin > 0:
        raise ParameterError(f"margin must be positive, got {margin!r}")
    return min(max(u, -rates.beta + margin), rates.alpha - margin)


def epsilon_rate(u: float, rates: RateSet, gamma: float) -> float:
    """Guaranteed decay rate ``gamma * min(beta + u, alpha - u)``."""
    return gamma * min(rates.beta + u, rates.alpha - u)


def observer_matrix(mats: SystemMatrices, u: float, l_gain: float, eps: float = 0.0) -> np.ndarray:
    """``A + B u - L C + eps I`` with the gain in the last row."""
    mat = mats.a_mat + u * mats.b_mat + eps * np.eye(mats.c_row.size)
    mat[-1] -= l_gain * mats.c_row
    return mat


def _det(mat: np.ndarray) -> float:
    lu, piv = scipy.linalg.lu_factor(mat, check_finite=False)
    sign = -1.0 if np.count_nonzero(piv != np.arange(piv.size)) % 2 else 1.0
    return sign * float(np.prod(np.diag(lu)))


def leading_minors(mat: np.ndarray) -> np.ndarray:
    return np.array([np.linalg.det(mat[:i, :i]) for i in range(1, mat.shape[0] + 1)])


def select_gain(mats: SystemMatrices, u: float, eps: float) -> float:
    """
    Choose ``L_2N`` so that ``(-1)^(2N) det(A~) > 0``.

    The root of the affine map ``L -> det(A~)`` is found from evaluations at
    0 and 1, then the gain is moved 10% of the root's magnitude past it.

    Raises
    ------
    GainSelectionError
        If ``det(A~)`` is (numerically) independent of the gain.
    """
    size = mats.c_row.size
    base = _det(observer_matrix(mats, u, 0.0, eps))
    slope = _det(observer_matrix(mats, u, 1.0, eps)) - base
    if abs(slope) < 1e-14:
        raise GainSelectionError(f"det(A~) insensitive to L_2N (slope {slope:.3e})")
    root = -base / slope
    sign = 1.0 if size % 2 == 0 else -1.0
    # move along the direction in which sign * det increases
    direction = 1.0 if sign * slope > 0 else -1.0
    offset = GAIN_STEP_FRACTION * abs(root)
    if offset == 0.0:
        offset = GAIN_STEP_FRACTION / abs(slope)
    gain = root + direction * offset

    mat = observer_matrix(mats, u, gain, eps)
    minors = leading_minors(mat)
    signs = (-1.0) ** np.arange(1, size + 1)
    assert np.all(signs * minors > 0), f"leading minors not sign-alternating: {minors}"
    return gain


class GainSchedule:
    """Memoises :func:`select_gain` on ``u`` quantised to 1e-6."""

    def __init__(self, mats: SystemMatrices, rates: RateSet, gamma: float):
        self.mats = mats
        self.rates = rates
        self.gamma = gamma
        self._cache: dict[int, tuple[float, float]] = {}

    def __call__(self, u: float) -> tuple[float, float]:
        key = round(u / _GAIN_CACHE_QUANTUM)
        hit = self._cache.get(key)
        if hit is None:
            u_q = key * _GAIN_CACHE_QUANTUM
            eps = epsilon_rate(u_q, self.rates, self.gamma)
            hit = (select_gain(self.mats, u_q, eps), eps)
            self._cache[key] = hit
        return hit


def observer_step(
    obs: ObserverState,
    u: float,
    y_measured: float,
    mats: SystemMatrices,
    rates: RateSet,
    dt: float,
    schedule: GainSchedule | None = None,
) -> ObserverState:
    """Advance the estimate one Euler step with a freshly selected gain."""
    check_time_step(dt, rates)
    if u < -rates.beta + obs.margin - 1e-12 or u > rates.alpha - obs.margin + 1e-12:
        raise ParameterError(
            f"u = {u:.9g} outside the observer's restricted set "
            f"[{-rates.beta + obs.margin:.9g}, {rates.alpha - obs.margin:.9g}]"
        )
    if schedule is None:
        eps = epsilon_rate(u, rates, obs.gamma)
        gain = select_gain(mats, u, eps)
    else:
        gain, eps = schedule(u)
    x_hat = obs.x_hat
    innovation = y_measured - float(mats.c_row @ x_hat)
    deriv = mats.a_mat @ x_hat + u * (mats.b_mat @ x_hat)
    deriv[-1] += gain * innovation
    x_next, _ = project_to_simplex(x_hat + dt * deriv)
    return replace(obs, x_hat=x_next, l_gain=gain, epsilon_t=eps)
