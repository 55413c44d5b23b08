"""
Markov jump population model of one building's thermostatic appliance fleet.

The comfort band is split into ``n_bins`` temperature bins per thermostat
status, giving ``2N`` states.  States ``0..N-1`` are the off bins (temperature
rising), states ``N..2N-1`` are the on bins (temperature falling).  The state
vector ``x`` holds the probability of finding an appliance in each state and
evolves as

    dx/dt = (A + B u) x,        y = C x

where ``u`` is the set-point shift rate normalised by the bin width
(``u = r_set / delta``, 1/min).  Time is in minutes throughout and power is
counted in running appliances; ``rated_power`` only converts to kW in reports.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, ControlSaturationError, ParameterError

log = logging.getLogger(__name__)

#: Default ISO tick: 4 seconds, expressed in minutes.
DEFAULT_DT = 4.0 / 60.0

#: Integrator guard, ``dt * (alpha + beta)`` must stay below this.
STABILITY_LIMIT = 0.5

_CLAMP_LOG_THRESHOLD = 1e-12
_CONSISTENCY_RTOL = 1e-6


@dataclass(frozen=True)
class BuildingParams:
    """
    Physical and user parameters of one homogeneous appliance fleet.

    Either ``bin_width`` or ``band_width`` must be given (or both, in which
    case ``band_width == n_bins * bin_width`` is checked).  ``t_gain`` is
    derived from ``tau * band_width * (1/t_on + 1/t_off)`` unless supplied; a
    supplied value is validated by :func:`derive_rates`.

    Parameters
    ----------
    n_bins : int
        Temperature bins per duty half (N).
    t_on, t_off : float
        On and off durations of the uncontrolled duty cycle (min).
    set_band_width : float
        Width of the user-allowed set point range (degC).
    set_point : float
        Nominal set point (degC); the allowed range is centred on it.
    population : float
        Number of appliances in the fleet.
    tau : float
        Effective thermal constant of the building (min).
    bin_width, band_width : float, optional
        Temperature bin width delta and comfort band width (degC).
    t_gain : float, optional
        Appliance temperature gain (degC).
    rated_power : float
        kW per running appliance, used for reporting only.
    """

    n_bins: int
    t_on: float
    t_off: float
    set_band_width: float
    set_point: float
    population: float
    tau: float
    bin_width: float | None = None
    band_width: float | None = None
    t_gain: float | None = None
    rated_power: float = 1.0
    t_gain_supplied: bool = field(default=False, init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise ParameterError(f"n_bins must be a positive integer, got {self.n_bins!r}")
        object.__setattr__(self, "n_bins", int(self.n_bins))
        for name in ("t_on", "t_off", "set_band_width", "population", "tau", "rated_power"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be strictly positive, got {value!r}")

        if self.bin_width is None and self.band_width is None:
            raise ParameterError("one of bin_width or band_width is required")
        if self.band_width is None:
            object.__setattr__(self, "band_width", self.n_bins * self.bin_width)
        elif self.bin_width is None:
            object.__setattr__(self, "bin_width", self.band_width / self.n_bins)
        elif not math.isclose(self.band_width, self.n_bins * self.bin_width, rel_tol=1e-9):
            raise ParameterError(
                "band_width must equal n_bins * bin_width "
                f"({self.band_width} != {self.n_bins} * {self.bin_width})"
            )
        if not (self.bin_width > 0 and math.isfinite(self.bin_width)):
            raise ParameterError(f"bin_width must be strictly positive, got {self.bin_width!r}")

        if self.t_gain is None:
            derived = self.tau * self.band_width * (1.0 / self.t_on + 1.0 / self.t_off)
            object.__setattr__(self, "t_gain", derived)
        else:
            if not (self.t_gain > 0 and math.isfinite(self.t_gain)):
                raise ParameterError(f"t_gain must be strictly positive, got {self.t_gain!r}")
            object.__setattr__(self, "t_gain_supplied", True)

    @cached_property
    def set_point_min(self) -> float:
        return self.set_point - 0.5 * self.set_band_width

    @cached_property
    def set_point_max(self) -> float:
        return self.set_point + 0.5 * self.set_band_width

    @property
    def n_states(self) -> int:
        return 2 * self.n_bins

    @property
    def duty_cycle(self) -> float:
        return self.t_on + self.t_off


@dataclass(frozen=True)
class RateSet:
    """Transition rates (1/min) and thermal rates (degC/min) of a fleet."""

    alpha: float
    beta: float
    r_on: float
    r_off: float

    @property
    def total(self) -> float:
        return self.alpha + self.beta


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    a_mat: np.ndarray
    b_mat: np.ndarray
    c_row: np.ndarray
    n_bins: int
    population: float

    def __post_init__(self):
        # C A and C B are fixed rows; caching them turns the controller into two dot products.
        object.__setattr__(self, "ca_row", self.c_row @ self.a_mat)
        object.__setattr__(self, "cb_row", self.c_row @ self.b_mat)
        # rows giving d(x_N + x_2N)/dt, used by the dispatch width model
        n = self.n_bins
        object.__setattr__(self, "boundary_a", self.a_mat[n - 1] + self.a_mat[-1])
        object.__setattr__(self, "boundary_b", self.b_mat[n - 1] + self.b_mat[-1])
        object.__setattr__(self, "boundary_ab", np.vstack([self.boundary_a, self.boundary_b]))
        # [A; B] so one product gives both drift terms of an Euler step
        object.__setattr__(self, "ab_mat", np.vstack([self.a_mat, self.b_mat]))

    def generator(self, u: float) -> np.ndarray:
        """Return ``A + B u``."""
        return self.a_mat + u * self.b_mat


def derive_rates(params: BuildingParams) -> RateSet:
    """
    Transition and thermal rates implied by the duty cycle.

    Raises
    ------
    ParameterError
        If ``t_gain / tau`` disagrees with ``r_on + r_off`` by more than 1e-6
        relative.
    """
    n = params.n_bins
    rates = RateSet(
        alpha=n / params.t_off,
        beta=n / params.t_on,
        r_on=params.band_width / params.t_on,
        r_off=params.band_width / params.t_off,
    )
    lhs = params.t_gain / params.tau
    rhs = rates.r_on + rates.r_off
    if abs(lhs - rhs) > _CONSISTENCY_RTOL * abs(rhs):
        raise ParameterError(
            "r_on + r_off = t_gain / tau violated: "
            f"t_gain/tau = {lhs:.9g} but band_width*(1/t_on + 1/t_off) = {rhs:.9g} "
            f"(t_gain should be {params.tau * rhs:.9g})"
        )
    return rates


def build_matrices(params: BuildingParams, rates: RateSet) -> SystemMatrices:
    n = params.n_bins
    size = 2 * n
    a_mat = np.zeros((size, size))
    b_mat = np.zeros((size, size))
    for j in range(size):
        nxt = (j + 1) % size
        if j < n:
            # off process: rate (alpha - u)
            a_mat[j, j], a_mat[nxt, j] = -rates.alpha, rates.alpha
            b_mat[j, j], b_mat[nxt, j] = 1.0, -1.0
        else:
            # on process: rate (beta + u); the last column wraps to state 0
            a_mat[j, j], a_mat[nxt, j] = -rates.beta, rates.beta
            b_mat[j, j], b_mat[nxt, j] = -1.0, 1.0
    c_row = np.concatenate([np.zeros(n), np.full(n, float(params.population))])
    return SystemMatrices(a_mat, b_mat, c_row, n, float(params.population))


def check_control(u: float, rates: RateSet, tol: float = 1e-12) -> None:
    slack = tol * max(1.0, rates.total)
    if u < -rates.beta - slack or u > rates.alpha + slack:
        raise ControlSaturationError(
            f"u = {u:.9g} outside [-beta, alpha] = [{-rates.beta:.9g}, {rates.alpha:.9g}]; "
            "transition rates would go negative"
        )


def check_time_step(dt: float, rates: RateSet) -> None:
    if not dt > 0:
        raise ConfigurationError(f"time step must be positive, got {dt!r}")
    if dt * rates.total >= STABILITY_LIMIT:
        raise ConfigurationError(
            f"dt * (alpha + beta) = {dt * rates.total:.6g} >= {STABILITY_LIMIT}; "
            f"use dt < {STABILITY_LIMIT / rates.total:.6g} min"
        )


def project_to_simplex(v: np.ndarray) -> tuple[np.ndarray, float]:
    """
    Clamp negative entries to zero and renormalise.

    Returns the projected vector and the clamp magnitude ``max(0, -min(v))``.
    """
    lowest = float(v.min())
    if lowest < 0.0:
        if lowest < -_CLAMP_LOG_THRESHOLD:
            log.warning("clamping negative probability %.3e", lowest)
        v = np.maximum(v, 0.0)
    total = v.sum()
    if not total > 0:
        raise ConfigurationError("state vector lost all probability mass")
    return v / total, max(0.0, -lowest)


def raw_step(x: np.ndarray, u: float, dt: float, mats: SystemMatrices) -> np.ndarray:
    """One forward-Euler step of ``(A + B u) x`` without projection."""
    size = x.size
    drift = mats.ab_mat @ x
    return x + dt * (drift[:size] + u * drift[size:])


def step_with_clamp(x, u, dt, mats, rates):
    check_control(u, rates)
    check_time_step(dt, rates)
    return project_to_simplex(raw_step(x, u, dt, mats))


def step(x: np.ndarray, u: float, dt: float, mats: SystemMatrices, rates: RateSet) -> np.ndarray:
    """
    Advance the fleet distribution by one Euler step and project to the simplex.

    Raises
    ------
    ControlSaturationError
        If ``u`` is outside ``[-beta, alpha]``.
    ConfigurationError
        If ``dt * (alpha + beta) >= 0.5``.
    """
    return step_with_clamp(x, u, dt, mats, rates)[0]


def output(x: np.ndarray, mats: SystemMatrices) -> float:
    """Aggregate consumption ``C x`` in running appliances."""
    return float(mats.c_row @ x)


def steady_state(rates: RateSet, n_bins: int) -> np.ndarray:
    """Uncontrolled stationary distribution: flat within each duty half."""
    if not (rates.alpha > 0 and rates.beta > 0):
        raise ParameterError("steady state needs alpha, beta > 0")
    total = n_bins * rates.total
    return np.concatenate([
        np.full(n_bins, rates.beta / total),
        np.full(n_bins, rates.alpha / total),
    ])


def uniform_state(n_bins: int) -> np.ndarray:
    return np.full(2 * n_bins, 1.0 / (2 * n_bins))


def validate_state(x: np.ndarray, n_bins: int | None = None, atol: float = 1e-9) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size % 2:
        raise ParameterError(f"state must be a 1-D vector of even length, got shape {x.shape}")
    if n_bins is not None and x.size != 2 * n_bins:
        raise ParameterError(f"state has {x.size} entries, expected {2 * n_bins}")
    if np.any(x < -atol) or np.any(x > 1 + atol):
        raise ParameterError("state entries must lie in [0, 1]")
    if abs(x.sum() - 1.0) > atol:
        raise ParameterError(f"state must sum to 1, sums to {x.sum():.12g}")
    return x


def boundary_bins(x: np.ndarray) -> tuple[float, float]:
    """Return ``(x_N, x_2N)``: the top off bin and the last on bin."""
    n = x.size // 2
    return float(x[n - 1]), float(x[-1])


def admissible_control_interval(
    params: BuildingParams,
    rates: RateSet,
    current_set_point: float,
    dt: float,
) -> tuple[float, float]:
    """
    Control rates that keep both the Markov rates and the next set point valid.

    The interval always contains zero.
    """
    lo_slack = params.set_point_min - current_set_point
    hi_slack = params.set_point_max - current_set_point
    if lo_slack > 0.0 or hi_slack < 0.0:
        tol = 1e-9 * max(1.0, params.set_band_width)
        if lo_slack > tol or hi_slack < -tol:
            raise ParameterError(
                f"set point {current_set_point:.9g} outside "
                f"[{params.set_point_min:.9g}, {params.set_point_max:.9g}]"
            )
        lo_slack, hi_slack = min(lo_slack, 0.0), max(hi_slack, 0.0)
    scale = dt * params.bin_width
    lo = lo_slack / scale
    hi = hi_slack / scale
    # the slacks straddle zero here, so the result does too
    return (lo if lo > -rates.beta else -rates.beta), (hi if hi < rates.alpha else rates.alpha)


@dataclass(frozen=True, eq=False)
class Fleet:
    """Bundle of a building's parameters with its derived rates and matrices."""

    params: BuildingParams
    rates: RateSet
    mats: SystemMatrices

    @classmethod
    def from_params(cls, params: BuildingParams) -> "Fleet":
        rates = derive_rates(params)
        return cls(params, rates, build_matrices(params, rates))

    @property
    def baseline(self) -> float:
        """Uncontrolled mean consumption ``N_c alpha / (alpha + beta)``."""
        return self.params.population * self.rates.alpha / self.rates.total

    def steady_state(self) -> np.ndarray:
        return steady_state(self.rates, self.params.n_bins)
