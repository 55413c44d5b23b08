"""
Closed-loop ISO/building simulation, T-50 qualification runs and their outputs.

Each tick: buildings publish their ramp thresholds, the ISO turns the
signal's one-step change into a ramp ``delta_p`` and dispatches it, then
every building inverts its dispatched ramp into a set-point rate, steps its
fleet and updates its observer.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .capability import T50_MAX_RESPONSE_MIN, qualification_limit, thresholds_from_boundary
from .control import ControllerConfig, control_for_ramp_at_boundary, control_law
from .dispatch import BuildingSnapshot, DispatchProblem, boundary_readout, proportional_dispatch, solve
from .errors import ConfigurationError, ParameterError, SignalError, SimulationError, ThermoflexError
from .fleet import (
    DEFAULT_DT,
    BuildingParams,
    Fleet,
    admissible_control_interval,
    check_control,
    check_time_step,
    step_with_clamp,
    uniform_state,
)
from .observer import GainSchedule, initial_state, observer_step
from .scenario import Scenario
from .signals import (
    DEFAULT_T50_PROFILE,
    RegulationSignal,
    _reflect,
    generate_synthetic,
    generate_t50,
    ingest_signal,
)

log = logging.getLogger(__name__)

TRACE_HEADER = ("tick", "t_min", "building", "cx", "u", "delta_r", "dr_min", "dr_max",
                "t_set", "s_accum", "sat", "sing")
ISO_NAME = "ISO"
T50_TOLERANCE = 0.02


def fmt(value: float) -> str:
    """Nine significant digits; negative zero is written as ``0``."""
    return f"{float(value) + 0.0:.9g}"


@dataclass(frozen=True)
class StatsTable:
    total: float
    mean: float
    std: float
    max: float
    min: float

    def as_dict(self) -> dict[str, float]:
        return {"total": self.total, "mean": self.mean, "std": self.std, "max": self.max, "min": self.min}


def summarize(p_spin, dt: float) -> StatsTable:
    """Spinning-reserve statistics; ``total`` is ``sum |p_spin| * dt``."""
    series = np.asarray(p_spin, dtype=float)
    if series.size == 0:
        raise ParameterError("cannot summarise an empty P_spin series")
    return StatsTable(
        total=float(np.abs(series).sum() * dt),
        mean=float(series.mean()),
        std=float(series.std()),
        max=float(series.max()),
        min=float(series.min()),
    )


@dataclass(eq=False)
class SimTrace:
    """
    Column store of a run.  Per-building arrays have shape ``(ticks, buildings)``
    and describe the tick starting at ``t_min``; ``s_accum`` already includes
    that tick's dispatch.  ``x_n``, ``x_2n`` and ``x_sum`` summarise the
    distribution the building controlled with (the estimate when an observer
    feeds the controller); ``clamp`` is the plant's pre-projection deficit.
    """

    names: tuple[str, ...]
    dt: float
    n_ticks: int

    COLUMNS = ("cx", "target", "dr_min", "dr_max", "t_set", "u", "delta_r", "x_n", "x_2n", "x_sum",
               "true_sum", "obs_error", "sat", "sing", "s_accum", "clamp")

    def __post_init__(self):
        n, m = self.n_ticks, len(self.names)
        self.t_min = self.dt * np.arange(n)
        self.signal = np.zeros(n)
        self.delta_p = np.zeros(n)
        self.p_spin = np.zeros(n)
        self.objective = np.zeros(n)
        # one row per (tick, building), filled with a single assignment in the hot loop
        self.buffer = np.zeros((n, m, len(self.COLUMNS)))
        for j, name in enumerate(self.COLUMNS):
            if name not in ("sat", "sing"):
                setattr(self, name, self.buffer[:, :, j])
        self.obs_error[:] = np.nan

    @property
    def sat(self) -> np.ndarray:
        return self.buffer[:, :, self.COLUMNS.index("sat")] != 0

    @property
    def sing(self) -> np.ndarray:
        return self.buffer[:, :, self.COLUMNS.index("sing")] != 0

    def __len__(self) -> int:
        return self.n_ticks

    def rows(self):
        """Trace rows in file order: each tick's buildings, then its ISO row."""
        sat, sing = self.sat, self.sing
        for k in range(self.n_ticks):
            tick, t = str(k), fmt(self.t_min[k])
            for i, name in enumerate(self.names):
                yield (tick, t, name, fmt(self.cx[k, i]), fmt(self.u[k, i]), fmt(self.delta_r[k, i]),
                       fmt(self.dr_min[k, i]), fmt(self.dr_max[k, i]), fmt(self.t_set[k, i]),
                       fmt(self.s_accum[k, i]), str(int(sat[k, i])), str(int(sing[k, i])))
            yield (tick, t, ISO_NAME, fmt(self.delta_p[k]), fmt(self.p_spin[k]), fmt(self.objective[k]),
                   "", "", "", "", "", "")

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            writer.writerows(self.rows())

    def write_plotdata(self, out_dir) -> list[Path]:
        """Long-format CSVs: building series, ISO series and (if any) observer error."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        path = out_dir / "buildings_long.csv"
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(("t_min", "building", "series", "value"))
            for series in ("cx", "target", "t_set", "u", "delta_r", "dr_min", "dr_max", "s_accum"):
                data = getattr(self, series)
                for i, name in enumerate(self.names):
                    writer.writerows((fmt(t), name, series, fmt(v)) for t, v in zip(self.t_min, data[:, i]))
        written.append(path)
        path = out_dir / "iso_long.csv"
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(("t_min", "series", "value"))
            for series in ("signal", "delta_p", "p_spin", "objective"):
                writer.writerows((fmt(t), series, fmt(v)) for t, v in zip(self.t_min, getattr(self, series)))
        written.append(path)
        if not np.all(np.isnan(self.obs_error)):
            path = out_dir / "observer_long.csv"
            with path.open("w", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(("t_min", "building", "error_norm"))
                for i, name in enumerate(self.names):
                    writer.writerows((fmt(t), name, fmt(v)) for t, v in zip(self.t_min, self.obs_error[:, i])
                                     if not math.isnan(v))
            written.append(path)
        return written


@dataclass(eq=False)
class _Building:
    name: str
    fleet: Fleet
    capacity: float
    controller: ControllerConfig
    x: np.ndarray
    set_point: float
    limits: tuple[float, float] | None = None
    observer: object = None
    schedule: GainSchedule | None = None
    use_estimate: bool = False
    level: float = 0.0
    s_accum: float = 0.0

    def __post_init__(self):
        fleet = self.fleet
        self.baseline = fleet.baseline
        self.params, self.rates, self.mats = fleet.params, fleet.rates, fleet.mats
        self.population = fleet.params.population
        self.lower = self.params.set_point_min
        self.upper = self.params.set_point_max

    def publish(self, probe, dt: float) -> BuildingSnapshot:
        """Upward report for this tick; keeps what :meth:`respond` and :meth:`settle` need."""
        y, self.true_sum, boundary = probe
        if self.use_estimate:
            x_used = self.observer.x_hat
            boundary = boundary_readout(x_used, self.mats)
        else:
            x_used = self.x
        admissible = admissible_control_interval(self.params, self.rates, self.set_point, dt)
        lo, hi = admissible
        if self.limits is not None:
            lo = lo if lo > self.limits[0] else self.limits[0]
            hi = hi if hi < self.limits[1] else self.limits[1]
        dr_min, dr_max = thresholds_from_boundary(boundary[0], boundary[1], self.population, self.rates, (lo, hi))
        self.y, self.x_used, self.boundary, self.interval = y, x_used, boundary, (lo, hi)
        self.head = (y, self.baseline + self.level, dr_min, dr_max, self.set_point)
        return BuildingSnapshot(x_used, self.set_point, self.params, self.rates, self.baseline, self.capacity,
                                y, self.limits, self.mats, boundary, admissible)

    def respond(self, delta_r: float) -> float:
        """Invert the dispatched ramp into a control; records the trace columns."""
        x_n, x_2n = self.boundary[0], self.boundary[1]
        requested = 0.0
        if x_n + x_2n < self.controller.x_floor:
            u, singular = 0.0, True
        else:
            requested = control_for_ramp_at_boundary(x_n, x_2n, delta_r, self.population, self.rates)
            lo, hi = self.interval
            u = lo if requested < lo else hi if requested > hi else requested
            singular = False
        scale = abs(requested) if abs(requested) > 1.0 else 1.0
        saturated = not singular and abs(u - requested) > 1e-9 * scale
        x_used = self.x_used
        x_sum = float(x_used.sum()) if x_used is not self.x else self.true_sum
        obs_error = float(np.linalg.norm(self.x - self.observer.x_hat)) if self.observer is not None else math.nan
        # column order follows SimTrace.COLUMNS after t_set, minus s_accum and clamp
        self.tail = (u, delta_r, x_n, x_2n, x_sum, self.true_sum, obs_error, float(saturated), float(singular))
        return u

    def settle(self, u: float, delta_r: float, dt: float, clamp: float) -> tuple:
        """Post-step bookkeeping: set point, observer and regulation accumulators; returns the trace row."""
        nxt = self.set_point + u * dt * self.params.bin_width
        self.set_point = self.lower if nxt < self.lower else self.upper if nxt > self.upper else nxt
        if self.observer is not None:
            self.observer = observer_step(self.observer, u, self.y, self.mats, self.rates, dt, self.schedule)
        self.level += delta_r * dt
        self.s_accum += self.level * dt
        return self.head + self.tail + (self.s_accum, clamp)


def _init_buildings(scenario: Scenario) -> list[_Building]:
    buildings = []
    for spec, fleet in zip(scenario.buildings, scenario.fleets()):
        params, rates = fleet.params, fleet.rates
        capacity = spec.capacity
        if capacity is None:
            capacity = qualification_limit(params, scenario.response_time_min)
        x0 = fleet.steady_state() if spec.initial_state == "steady" else uniform_state(params.n_bins)
        set_point = params.set_point if spec.initial_set_point is None else spec.initial_set_point
        if not params.set_point_min <= set_point <= params.set_point_max:
            raise ConfigurationError(f"building {spec.name!r}: initial set point {set_point} outside its range")
        building = _Building(
            name=spec.name,
            fleet=fleet,
            capacity=capacity,
            controller=ControllerConfig(spec.controller.gain, spec.controller.x_floor),
            x=x0,
            set_point=set_point,
        )
        if spec.observer.enabled:
            try:
                obs = initial_state(rates, params.n_bins, spec.observer.gamma, spec.observer.margin)
            except ParameterError as exc:
                raise ConfigurationError(f"building {spec.name!r}: {exc}") from exc
            building.observer = obs
            building.schedule = GainSchedule(fleet.mats, rates, obs.gamma)
            building.limits = (-rates.beta + obs.margin, rates.alpha - obs.margin)
            building.use_estimate = spec.observer.use_estimate
        buildings.append(building)
    return buildings


def build_signal(scenario: Scenario, r_r: float, r_b: float) -> RegulationSignal:
    """The aggregate regulation request on the scenario's tick grid."""
    dt = scenario.dt
    spec = scenario.signal
    try:
        if spec.kind == "file":
            signal = ingest_signal(scenario.resolve(spec.path), dt, r_r, r_b, scale=spec.kw_per_unit)
        elif spec.kind == "synthetic":
            signal = generate_synthetic(scenario.seed, r_r, scenario.duration_min, dt, spec.volatility)
        else:
            profile = DEFAULT_T50_PROFILE if spec.profile is None else spec.profile
            signal = generate_t50(r_r, profile, dt)
    except OSError as exc:
        raise ConfigurationError(f"cannot read signal: {exc}") from exc
    if len(signal) < scenario.n_ticks + 1:
        raise ConfigurationError(
            f"signal covers {len(signal) - 1} ticks but the scenario needs {scenario.n_ticks}"
        )
    return RegulationSignal(signal.times, signal.values, r_r, r_b)


def _disturbance(scenario: Scenario) -> np.ndarray:
    n = scenario.n_ticks
    spec = scenario.disturbance
    if spec is None:
        return np.zeros(n + 1)
    rng = np.random.default_rng(np.random.SeedSequence([scenario.seed, 1]))
    steps = rng.normal(0.0, spec.volatility * scenario.dt, size=n)
    level = 0.0
    values = np.zeros(n + 1)
    for k, inc in enumerate(steps, start=1):
        level = _reflect(level + inc, spec.amplitude)
        values[k] = level
    return values


def run_simulation(scenario: Scenario, dispatch_mode: str | None = None) -> tuple[SimTrace, StatsTable]:
    """
    Run the scenario's tick loop.

    Raises
    ------
    SimulationError
        When any module fails inside the loop; carries the tick and building.
    """
    mode = dispatch_mode or scenario.dispatch_mode
    if mode not in ("optimized", "proportional"):
        raise ConfigurationError(f"unknown dispatch mode {mode!r}")
    dt = scenario.dt
    buildings = _init_buildings(scenario)
    r_r = sum(b.capacity for b in buildings)
    r_b = sum(b.fleet.baseline for b in buildings)
    signal = build_signal(scenario, r_r, r_b).values
    n = scenario.n_ticks
    trace = SimTrace(tuple(b.name for b in buildings), dt, n)
    trace.signal[:] = signal[:n]
    buffer = trace.buffer
    bank = _StateBank(buildings, dt)
    # plain floats: numpy scalar arithmetic is the slow path in this loop
    demand = (signal[: n + 1] + _disturbance(scenario)).tolist()
    globals_ = []

    for k in range(n):
        delta_p = (demand[k + 1] - demand[k]) / dt
        snapshots = []
        try:
            for b, probe in zip(buildings, bank.readout()):
                snapshots.append(b.publish(probe, dt))
        except ThermoflexError as exc:
            raise SimulationError(str(exc), tick=k, building=b.name) from exc

        problem = DispatchProblem(snapshots, delta_p, dt, scenario.penalty)
        try:
            if mode == "optimized":
                solution = solve(problem, seed=np.random.SeedSequence([scenario.seed, k]))
            else:
                solution = proportional_dispatch(problem)
        except ThermoflexError as exc:
            raise SimulationError(f"dispatch failed: {exc}", tick=k) from exc
        globals_.append((delta_p, solution.p_spin, solution.objective))

        dispatched = solution.delta_r.tolist()
        controls, rows = [], []
        try:
            for b, delta_r in zip(buildings, dispatched):
                controls.append(b.respond(delta_r))
        except ThermoflexError as exc:
            raise SimulationError(str(exc), tick=k, building=b.name) from exc
        try:
            clamps = bank.step(controls)
        except ThermoflexError as exc:
            raise SimulationError(str(exc), tick=k) from exc
        try:
            for b, u, delta_r, clamp in zip(buildings, controls, dispatched, clamps):
                rows.append(b.settle(u, delta_r, dt, clamp))
        except ThermoflexError as exc:
            raise SimulationError(str(exc), tick=k, building=b.name) from exc
        buffer[k] = rows

    if n:
        trace.delta_p[:], trace.p_spin[:], trace.objective[:] = np.array(globals_).T
    return trace, summarize(trace.p_spin, dt)


class _StateBank:
    """
    Every building's distribution in one vector, so a tick's Euler steps are a
    single block-diagonal product.  Each ``_Building.x`` is a view into it.
    The update is :func:`fleet.step` per building, with ``I + dt A`` and
    ``dt B`` folded into one stacked matrix (equal up to rounding).
    """

    N_PROBES = 6

    def __init__(self, buildings: list[_Building], dt: float):
        sizes = [b.x.size for b in buildings]
        self.sizes = np.array(sizes)
        self.offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        total = int(sum(sizes))
        self.x = np.concatenate([b.x for b in buildings])
        self.ab = np.zeros((2 * total, total))
        # per building: C, e_N, e_2N, d(x_N + x_2N)/dt at u = 0, its u-slope, and the mass
        self.probe = np.zeros((self.N_PROBES * len(buildings), total))
        for i, (b, start, size) in enumerate(zip(buildings, self.offsets, sizes)):
            mats = b.fleet.mats
            block = slice(start, start + size)
            self.ab[block, block] = mats.a_mat
            self.ab[total + start:total + start + size, block] = mats.b_mat
            rows = self.probe[self.N_PROBES * i:self.N_PROBES * (i + 1), block]
            rows[0] = mats.c_row
            rows[1, mats.n_bins - 1] = 1.0
            rows[2, -1] = 1.0
            rows[3] = mats.boundary_a
            rows[4] = mats.boundary_b
            rows[5] = 1.0
            b.x = self.x[block]
        self.ab *= dt
        self.ab[:total] += np.eye(total)
        self.owner = np.repeat(np.arange(len(buildings)), sizes)
        self.bounds = [(-b.fleet.rates.beta, b.fleet.rates.alpha, b.fleet.rates) for b in buildings]
        self.total = total
        self.no_deficit = [0.0] * len(buildings)

    def readout(self) -> list[tuple[float, float, tuple[float, float, float, float]]]:
        """Per building: consumption ``C x``, probability mass and the dispatch boundary readout."""
        values = (self.probe @ self.x).tolist()
        step = self.N_PROBES
        return [(values[j], values[j + 5], tuple(values[j + 1:j + 5])) for j in range(0, len(values), step)]

    def step(self, controls: list[float]) -> list[float]:
        for u, (lo, hi, rates) in zip(controls, self.bounds):
            if not lo <= u <= hi:
                check_control(u, rates)
        moved = self.ab @ self.x
        size = self.total
        nxt = moved[:size]
        nxt += np.asarray(controls)[self.owner] * moved[size:]
        deficits = self.no_deficit
        if nxt.min() < 0.0:
            lowest = np.minimum.reduceat(nxt, self.offsets).tolist()
            for value in lowest:
                if value < -1e-12:
                    log.warning("clamping negative probability %.3e", value)
            np.maximum(nxt, 0.0, out=nxt)
            deficits = [max(-value, 0.0) for value in lowest]
            mass = np.add.reduceat(nxt, self.offsets)
            if not mass.min() > 0:
                raise ConfigurationError("state vector lost all probability mass")
        else:
            # the generator conserves mass, so only rounding is left to remove
            mass = np.add.reduceat(nxt, self.offsets)
        np.divide(nxt, mass[self.owner], out=self.x)
        return deficits


# ---------------------------------------------------------------- T-50 runs


@dataclass(eq=False)
class T50Result:
    r_r: float
    passed: bool
    rate_ok: bool
    sustained_ok: bool
    max_error: float
    tolerance: float
    times: np.ndarray
    target: np.ndarray
    cx: np.ndarray
    set_point: np.ndarray
    u: np.ndarray
    saturated: int

    def summary(self) -> dict:
        return {
            "r_r": self.r_r,
            "passed": self.passed,
            "rate_ok": self.rate_ok,
            "sustained_ok": self.sustained_ok,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "saturated_ticks": self.saturated,
        }

    def write_plotdata(self, path, building: str = "") -> None:
        with Path(path).open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(("t_min", "building", "series", "value"))
            for series in ("target", "cx", "set_point", "u"):
                writer.writerows((fmt(t), building, series, fmt(v))
                                 for t, v in zip(self.times, getattr(self, series)))


def run_t50(
    params: BuildingParams,
    r_r: float,
    profile=DEFAULT_T50_PROFILE,
    dt: float = DEFAULT_DT,
    controller: ControllerConfig = ControllerConfig(),
    tolerance: float = T50_TOLERANCE,
) -> T50Result:
    """
    Track ``R_b + R(t)`` for the T-50 profile from steady state at the nominal
    set point.

    The rate-of-response check covers ticks where the request is moving, the
    sustained-response check the holds; both require ``|Cx - target|`` within
    ``tolerance * r_r``.
    """
    fleet = Fleet.from_params(params)
    check_time_step(dt, fleet.rates)
    signal = generate_t50(r_r, profile, dt)
    req = signal.values
    n = req.size - 1
    target = fleet.baseline + req
    x = fleet.steady_state()
    set_point = params.set_point
    cx = np.empty(n + 1)
    set_points = np.empty(n + 1)
    u_series = np.zeros(n + 1)
    saturated = 0
    mats, rates = fleet.mats, fleet.rates
    for k in range(n):
        cx[k] = mats.c_row @ x
        set_points[k] = set_point
        interval = admissible_control_interval(params, rates, set_point, dt)
        outcome = control_law(x, target[k], (req[k + 1] - req[k]) / dt, mats, controller, interval)
        saturated += outcome.saturated
        u_series[k] = outcome.u
        x, _ = step_with_clamp(x, outcome.u, dt, mats, rates)
        set_point = min(max(set_point + outcome.u * dt * params.bin_width, params.set_point_min),
                        params.set_point_max)
    cx[n] = mats.c_row @ x
    set_points[n] = set_point

    tol = tolerance * r_r + 1e-9 * params.population
    error = np.abs(cx - target)
    moving = np.zeros(n + 1, dtype=bool)
    moving[:-1] = req[1:] != req[:-1]
    rate_err = float(error[moving].max()) if moving.any() else 0.0
    hold_err = float(error[~moving].max())
    return T50Result(
        r_r=r_r,
        passed=rate_err <= tol and hold_err <= tol,
        rate_ok=rate_err <= tol,
        sustained_ok=hold_err <= tol,
        max_error=float(error.max()),
        tolerance=tol,
        times=signal.times,
        target=target,
        cx=cx,
        set_point=set_points,
        u=u_series,
        saturated=int(saturated),
    )


@dataclass(frozen=True)
class SweepResult:
    r_r_max: float
    multipliers: np.ndarray
    passed: np.ndarray
    boundary: float

    @property
    def boundary_ratio(self) -> float:
        return self.boundary / self.r_r_max


def sweep_rr(
    params: BuildingParams,
    start: float = 0.5,
    stop: float = 1.5,
    steps: int = 41,
    k: float = T50_MAX_RESPONSE_MIN,
    **t50_kwargs,
) -> SweepResult:
    """
    Run T-50 at ``R_r = m * qualification_limit`` for ``steps`` multipliers in
    ``[start, stop]``.  The boundary is the midpoint between the last pass and
    the first failure (or the last multiplier if every run passes).
    """
    if steps < 2 or not 0 <= start < stop:
        raise ConfigurationError(f"need steps >= 2 and 0 <= start < stop, got {start}, {stop}, {steps}")
    r_max = qualification_limit(params, k)
    multipliers = np.linspace(start, stop, steps)
    passed = np.array([run_t50(params, m * r_max, **t50_kwargs).passed for m in multipliers])
    failures = np.flatnonzero(~passed)
    if failures.size == 0:
        boundary = multipliers[-1]
    elif failures[0] == 0:
        boundary = multipliers[0]
    else:
        j = failures[0]
        boundary = 0.5 * (multipliers[j - 1] + multipliers[j])
    return SweepResult(r_max, multipliers, passed, float(boundary * r_max))


def read_trace_spin(path) -> tuple[np.ndarray, float]:
    """``(p_spin series, dt)`` from the ISO rows of a trace CSV."""
    times, spins = [], []
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            raise SignalError("not a trace file: header mismatch", line=1)
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(TRACE_HEADER):
                raise SignalError(f"expected {len(TRACE_HEADER)} fields", line=line_no)
            if row[2] != ISO_NAME:
                continue
            try:
                times.append(float(row[1]))
                spins.append(float(row[4]))
            except ValueError:
                raise SignalError("non-numeric ISO field", line=line_no) from None
    if not spins:
        raise SignalError(f"{path} has no ISO rows")
    if len(times) > 1:
        dt = times[1] - times[0]
    else:
        log.warning("single-tick trace; assuming dt = %g min", DEFAULT_DT)
        dt = DEFAULT_DT
    return np.asarray(spins), dt
