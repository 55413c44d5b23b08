"""
Building-level feedback-linearising controller.

The output ``y = C x`` has relative degree one, so choosing

    u = -CAx / CBx + (-K (Cx - R) + dR/dt) / CBx

turns the tracking error into ``de/dt = -K e``.  ``CBx = -N_c (x_N + x_2N)``
vanishes when no appliance sits at a comfort-band boundary; the controller
then reports a singular state and holds ``u = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SingularStateError
from .fleet import SystemMatrices


@dataclass(frozen=True)
class ControllerConfig:
    gain: float = 1.0
    x_floor: float = 1e-9

    def __post_init__(self):
        if not self.gain > 0:
            raise ParameterError(f"controller gain must be positive, got {self.gain!r}")
        if not self.x_floor > 0:
            raise ParameterError(f"x_floor must be positive, got {self.x_floor!r}")


@dataclass(frozen=True)
class ControlOutcome:
    u: float
    saturated: bool
    singular: bool
    requested_u: float


def signal_derivative(r_now: float, r_next: float, dt: float) -> float:
    """Forward difference of a sampled signal."""
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt!r}")
    return (r_next - r_now) / dt


def _clamp(value: float, interval: tuple[float, float]) -> float:
    lo, hi = interval
    return min(max(value, lo), hi)


def control_law(
    x: np.ndarray,
    target: float,
    target_dot: float,
    mats: SystemMatrices,
    cfg: ControllerConfig,
    admissible: tuple[float, float],
) -> ControlOutcome:
    lo, hi = admissible
    if lo > hi:
        raise ParameterError(f"empty admissible interval [{lo}, {hi}]")
    n = mats.n_bins
    if x[n - 1] + x[-1] < cfg.x_floor:
        return ControlOutcome(0.0, saturated=False, singular=True, requested_u=0.0)

    cax = float(mats.ca_row @ x)
    cbx = float(mats.cb_row @ x)
    error = float(mats.c_row @ x) - target
    requested = (-cax + (-cfg.gain * error + target_dot)) / cbx
    u = _clamp(requested, admissible)
    return ControlOutcome(u, saturated=u != requested, singular=False, requested_u=requested)


def control_for_ramp(x: np.ndarray, delta_r: float, mats: SystemMatrices) -> float:
    """
    The unique control making the consumption ramp ``C dx/dt`` equal ``delta_r``.

    Raises
    ------
    SingularStateError
        If ``x_N + x_2N == 0``.
    """
    n = mats.n_bins
    boundary = float(x[n - 1] + x[-1])
    if boundary <= 0.0:
        raise SingularStateError("x_N + x_2N = 0: consumption ramp cannot be steered")
    drift = float(mats.ca_row @ x)
    return (drift - delta_r) / (mats.population * boundary)


def control_for_ramp_at_boundary(x_n: float, x_2n: float, delta_r: float, population: float, rates) -> float:
    """:func:`control_for_ramp` given only the two boundary bins, where all of ``C A x`` lives."""
    boundary = x_n + x_2n
    if boundary <= 0.0:
        raise SingularStateError("x_N + x_2N = 0: consumption ramp cannot be steered")
    return (population * (rates.alpha * x_n - rates.beta * x_2n) - delta_r) / (population * boundary)


def ramp_for_control(x: np.ndarray, u: float, mats: SystemMatrices) -> float:
    """Inverse of :func:`control_for_ramp`: ``C (A + B u) x``."""
    return float(mats.ca_row @ x + u * (mats.cb_row @ x))
