"""
Closed-form regulation capability of a fleet.

``delta_r`` quantities here are one-step consumption ramps (appliances per
minute), i.e. the commanded value of ``C dx/dt``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .fleet import BuildingParams, RateSet, admissible_control_interval, boundary_bins

T50_MAX_RESPONSE_MIN = 5.0
#: Peak accumulated regulation of the T-50 test, in units of R_r * min.
T50_PEAK_ACCUMULATION = 10.0


@dataclass(frozen=True)
class CapabilityReport:
    s_max: float
    ramp_lo: float
    ramp_hi: float
    dr_min: float
    dr_max: float
    r_qual: float

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


def long_term_bound(params: BuildingParams) -> float:
    """Largest accumulated regulation (appliance * min) the set point range allows."""
    return params.population * params.tau * params.set_band_width / (2.0 * params.t_gain)


def short_term_bounds(x: np.ndarray, params: BuildingParams, rates: RateSet) -> tuple[float, float]:
    """One-period ramp limits from the thermal parameters (Markov rates only)."""
    x_n, x_2n = boundary_bins(x)
    scale = params.n_bins * params.population * params.t_gain / (params.tau * params.band_width)
    return -scale * x_2n, scale * x_n


def markov_ramp_bounds(x: np.ndarray, population: float, rates: RateSet) -> tuple[float, float]:
    """Same limits written with transition rates: ``[-N_c(a+b)x_2N, N_c(a+b)x_N]``."""
    x_n, x_2n = boundary_bins(x)
    return -population * rates.total * x_2n, population * rates.total * x_n


def ramp_at_control(x: np.ndarray, u: float, population: float, rates: RateSet) -> float:
    """Consumption ramp produced by control ``u``: ``N_c[(a x_N - b x_2N) - u (x_N + x_2N)]``."""
    x_n, x_2n = boundary_bins(x)
    return population * ((rates.alpha * x_n - rates.beta * x_2n) - u * (x_n + x_2n))


def thresholds_for_interval(
    x: np.ndarray,
    population: float,
    rates: RateSet,
    interval: tuple[float, float],
) -> tuple[float, float]:
    """Map a control interval onto ``(dr_min, dr_max)``; the ramp decreases in ``u``."""
    x_n, x_2n = boundary_bins(x)
    return thresholds_from_boundary(x_n, x_2n, population, rates, interval)


def thresholds_from_boundary(
    x_n: float,
    x_2n: float,
    population: float,
    rates: RateSet,
    interval: tuple[float, float],
) -> tuple[float, float]:
    """:func:`thresholds_for_interval` given only the two boundary bins."""
    lo, hi = interval
    drift = rates.alpha * x_n - rates.beta * x_2n
    boundary = x_n + x_2n
    return population * (drift - hi * boundary), population * (drift - lo * boundary)


def provision_thresholds(
    x: np.ndarray,
    current_set_point: float,
    params: BuildingParams,
    rates: RateSet,
    dt: float,
) -> tuple[float, float]:
    """
    Achievable one-step ramp range ``(dr_min, dr_max)`` at the current state.

    Raises
    ------
    ParameterError
        If the set point is outside its allowed range.
    """
    interval = admissible_control_interval(params, rates, current_set_point, dt)
    return thresholds_for_interval(x, params.population, rates, interval)


def spinning_reserve(delta_p: float, dr_min: float, dr_max: float) -> float:
    if dr_min > dr_max:
        raise ParameterError(f"dr_min {dr_min} > dr_max {dr_max}")
    if delta_p > dr_max:
        return delta_p - dr_max
    if delta_p < dr_min:
        return delta_p - dr_min
    return 0.0


def qualification_terms(params: BuildingParams, k: float = T50_MAX_RESPONSE_MIN) -> tuple[float, float]:
    """Return the (long-term, short-term) limits whose minimum is the T-50 capacity."""
    if not 0 < k <= T50_MAX_RESPONSE_MIN:
        raise ParameterError(f"response time k must be in (0, 5] min, got {k!r}")
    long_term = long_term_bound(params) / T50_PEAK_ACCUMULATION
    short_term = min(k * params.population / params.t_on, k * params.population / params.t_off)
    return long_term, short_term


def qualification_limit(params: BuildingParams, k: float = T50_MAX_RESPONSE_MIN) -> float:
    """Largest regulation capacity R_r with which the fleet can pass the T-50 test."""
    return min(qualification_terms(params, k))


def capability_report(
    x: np.ndarray,
    current_set_point: float,
    params: BuildingParams,
    rates: RateSet,
    dt: float,
    k: float = T50_MAX_RESPONSE_MIN,
) -> CapabilityReport:
    ramp_lo, ramp_hi = short_term_bounds(x, params, rates)
    dr_min, dr_max = provision_thresholds(x, current_set_point, params, rates, dt)
    return CapabilityReport(
        s_max=long_term_bound(params),
        ramp_lo=ramp_lo,
        ramp_hi=ramp_hi,
        dr_min=dr_min,
        dr_max=dr_max,
        r_qual=qualification_limit(params, k),
    )
