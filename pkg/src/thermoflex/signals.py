"""Regulation signals: CSV ingestion, seeded synthetic walks and T-50 test profiles."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SignalError

log = logging.getLogger(__name__)

T50_DURATION_MIN = 50.0

#: (minute, level as a fraction of R_r) knots of the default T-50 profile.
#: Up to +R_r in 5 min, hold 5, back to 0, rest, down to -R_r in 5 min, hold 5,
#: back.  The accumulated regulation peaks at 10 R_r min over [15, 30].
DEFAULT_T50_PROFILE: tuple[tuple[float, float], ...] = (
    (0.0, 0.0),
    (5.0, 1.0),
    (10.0, 1.0),
    (15.0, 0.0),
    (30.0, 0.0),
    (35.0, -1.0),
    (40.0, -1.0),
    (45.0, 0.0),
    (50.0, 0.0),
)


@dataclass(frozen=True, eq=False)
class RegulationSignal:
    """Uniformly sampled regulation request ``R(t)`` (appliances), times in minutes."""

    times: np.ndarray
    values: np.ndarray
    r_r: float
    r_b: float = 0.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size == 0:
            raise SignalError("signal needs matching non-empty time and value arrays")
        if times.size > 1:
            steps = np.diff(times)
            if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(1.0, abs(steps[0])):
                raise SignalError("signal samples must be strictly increasing and uniformly spaced")
        if np.any(np.abs(values) > self.r_r * (1 + 1e-12) + 1e-12):
            raise SignalError(f"signal exceeds the sold capacity R_r = {self.r_r}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def __len__(self) -> int:
        return self.values.size


def ingest_signal(path, dt: float, r_r: float, r_b: float = 0.0, scale: float = 1.0) -> RegulationSignal:
    """
    Read a ``t_s,reg_kw`` CSV and resample it onto a ``dt``-minute grid.

    ``reg_kw / scale`` gives the signal in appliance units.  Values beyond
    ``+/- r_r`` are clipped with a warning.

    Raises
    ------
    SignalError
        On an empty file, a non-numeric field or non-increasing time; the
        message carries the offending line number.
    """
    path = Path(path)
    times, values = [], []
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        for line_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if line_no == 1 and not _is_number(row[0]):
                continue
            if len(row) < 2:
                raise SignalError(f"expected two columns, got {row!r}", line=line_no)
            try:
                t_s, reg = float(row[0]), float(row[1])
            except ValueError:
                raise SignalError(f"non-numeric field in {','.join(row)!r}", line=line_no) from None
            if not (np.isfinite(t_s) and np.isfinite(reg)):
                raise SignalError(f"non-finite field in {','.join(row)!r}", line=line_no)
            if times and t_s <= times[-1]:
                raise SignalError(f"time {t_s} does not increase", line=line_no)
            times.append(t_s)
            values.append(reg / scale)
    if not times:
        raise SignalError(f"{path} contains no samples")

    # resample in seconds so integer timestamps hit the grid exactly
    t_s = np.asarray(times)
    dt_s = round(dt * 60.0, 9)
    n = int(np.floor((t_s[-1] - t_s[0]) / dt_s + 1e-9))
    grid_s = t_s[0] + dt_s * np.arange(n + 1)
    resampled = np.interp(grid_s, t_s, np.asarray(values))
    over = np.abs(resampled) > r_r
    if over.any():
        log.warning("clipped %d of %d signal samples to +/- R_r = %g", int(over.sum()), over.size, r_r)
        resampled = np.clip(resampled, -r_r, r_r)
    return RegulationSignal(dt * np.arange(n + 1), resampled, r_r, r_b)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def validate_profile(profile) -> tuple[tuple[float, float], ...]:
    knots = tuple((float(t), float(level)) for t, level in profile)
    if len(knots) < 2:
        raise SignalError("T-50 profile needs at least two knots")
    times = [t for t, _ in knots]
    if times[0] != 0.0 or times[-1] != T50_DURATION_MIN:
        raise SignalError("T-50 profile must span [0, 50] min")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise SignalError("T-50 profile times must be strictly increasing")
    if any(abs(level) > 1.0 for _, level in knots):
        raise SignalError("T-50 profile levels must lie within [-1, 1] (fractions of R_r)")
    return knots


def generate_t50(r_r: float, profile=DEFAULT_T50_PROFILE, dt: float = 4.0 / 60.0) -> RegulationSignal:
    """Piecewise-linear 50-minute qualification signal scaled by ``r_r``."""
    if r_r < 0:
        raise SignalError(f"R_r must be non-negative, got {r_r}")
    knots = validate_profile(profile)
    n = int(round(T50_DURATION_MIN / dt))
    grid = dt * np.arange(n + 1)
    levels = np.interp(grid, [t for t, _ in knots], [v for _, v in knots])
    return RegulationSignal(grid, r_r * levels, r_r)


def generate_synthetic(seed: int, r_r: float, duration: float, dt: float, volatility: float) -> RegulationSignal:
    """
    Seeded random walk with increments of standard deviation ``volatility * dt``,
    reflected at ``+/- r_r``; starts at zero.
    """
    if volatility < 0:
        raise SignalError(f"volatility must be non-negative, got {volatility}")
    n = int(round(duration / dt))
    rng = np.random.default_rng(seed)
    steps = rng.normal(0.0, volatility * dt, size=n)
    values = np.empty(n + 1)
    values[0] = level = 0.0
    for k, inc in enumerate(steps, start=1):
        level = _reflect(level + inc, r_r)
        values[k] = level
    return RegulationSignal(dt * np.arange(n + 1), values, r_r)


def _reflect(value: float, bound: float) -> float:
    if bound <= 0:
        return 0.0
    period = 4.0 * bound
    folded = (value + bound) % period
    if folded > 2.0 * bound:
        folded = period - folded
    return folded - bound
