"""
ISO-side per-tick dispatch of a system ramp ``delta_p`` across buildings.

For building ``i`` with control ``u_i`` the dispatched ramp is affine,
``dr_i(u) = p_i - q_i u`` with ``q_i = N_c (x_N + x_2N)``, and the capability
width it will have on the next tick is

    W_i(u) = N_c s_i'(u) [min(sl_i + u, beta_i) + min(sh_i - u, alpha_i)]

where ``s'`` is ``x_N + x_2N`` after one Euler step and ``sl``/``sh`` are the
set point slacks in control units.  The optimised dispatch maximises
``sum_i W_i - M p_spin**2`` with ``p_spin = delta_p - sum_i dr_i``.

Because ``s'`` is affine in ``u`` and the slack terms are piecewise linear,
the objective is piecewise quadratic along any line.  The solver runs exact
line maximisations over single coordinates and over balance-preserving pairs
(which walk along the steep ``p_spin`` valley), from several starts.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .capability import thresholds_for_interval
from .errors import ConfigurationError, ParameterError, SolverError
from .fleet import BuildingParams, RateSet, SystemMatrices, admissible_control_interval, build_matrices

log = logging.getLogger(__name__)

PENALTY_SCALE = 1e3
N_RANDOM_STARTS = 8
ORACLE_MAX_BUILDINGS = 3


class DispatchMethod(str, enum.Enum):
    OPTIMIZED = "optimized"
    PROPORTIONAL = "proportional"
    ORACLE = "oracle"


@dataclass(eq=False)
class BuildingSnapshot:
    """What one building reports to the ISO on a tick (treat as read-only)."""

    x: np.ndarray
    set_point: float
    params: BuildingParams
    rates: RateSet
    baseline: float
    capacity: float
    output: float
    control_limits: tuple[float, float] | None = None
    mats: SystemMatrices | None = field(default=None, repr=False)
    boundary: tuple[float, float, float, float] | None = field(default=None, repr=False)
    #: admissible control interval at the problem's ``dt``, if the caller already has it
    admissible: tuple[float, float] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mats is None:
            self.mats = build_matrices(self.params, self.rates)
        if self.boundary is None:
            self.boundary = boundary_readout(self.x, self.mats)


def boundary_readout(x: np.ndarray, mats: SystemMatrices) -> tuple[float, float, float, float]:
    """``(x_N, x_2N, d(x_N + x_2N)/dt|_{u=0}, d(x_N + x_2N)/du)``: all the ISO needs from a state."""
    drift_a, drift_b = (mats.boundary_ab @ x).tolist()
    return float(x[mats.n_bins - 1]), float(x[-1]), drift_a, drift_b


@dataclass(frozen=True, eq=False)
class DispatchProblem:
    snapshots: tuple[BuildingSnapshot, ...]
    delta_p: float
    dt: float
    penalty: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        if not self.snapshots:
            raise ParameterError("dispatch needs at least one building")
        if self.penalty is not None and not self.penalty > 0:
            raise ParameterError(f"penalty must be positive, got {self.penalty!r}")

    @property
    def size(self) -> int:
        return len(self.snapshots)


@dataclass(frozen=True, eq=False)
class DispatchSolution:
    u: np.ndarray
    delta_r: np.ndarray
    width: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    p_spin: float
    objective: float
    penalty: float
    method: DispatchMethod

    @property
    def balance_residual(self) -> float:
        return float(self.delta_r.sum() + self.p_spin)


class _Terms:
    """Scalar coefficients of one building's slice of the objective."""

    __slots__ = ("nc", "alpha", "beta", "p", "q", "s0", "s1", "sl", "sh", "lo", "hi", "kinks")

    def __init__(self, snap: BuildingSnapshot, dt: float):
        params = snap.params
        self.nc = nc = params.population
        self.alpha = alpha = snap.rates.alpha
        self.beta = beta = snap.rates.beta
        x_n, x_2n, drift_a, drift_b = snap.boundary
        self.p = p = nc * (alpha * x_n - beta * x_2n)
        self.q = q = nc * (x_n + x_2n)
        # x_N + x_2N after one Euler step is affine in u: s0 + s1 u
        self.s0 = x_n + x_2n + dt * drift_a
        self.s1 = dt * drift_b
        scale = dt * params.bin_width
        offset = snap.set_point - params.set_point
        half = 0.5 * params.set_band_width
        self.sl = sl = (half + offset) / scale
        self.sh = sh = (half - offset) / scale
        self.lo, self.hi = _box(snap, dt, p, q)
        self.kinks = (beta - sl, sh - alpha)

    def width(self, u: float) -> float:
        return self.nc * (self.s0 + self.s1 * u) * (min(self.sl + u, self.beta) + min(self.sh - u, self.alpha))

    def ramp(self, u: float) -> float:
        return self.p - self.q * u


def feasible_box(snap: BuildingSnapshot, dt: float) -> tuple[float, float]:
    """
    Control interval allowed by the Markov rates, the set point range, and the
    sold regulation band ``R_b +/- R_r`` one tick ahead.

    If the band cannot be reached within one tick the interval collapses onto
    the admissible endpoint closest to it.
    """
    nc = snap.params.population
    x_n, x_2n = snap.boundary[:2]
    p = nc * (snap.rates.alpha * x_n - snap.rates.beta * x_2n)
    q = nc * (x_n + x_2n)
    return _box(snap, dt, p, q)


def _box(snap: BuildingSnapshot, dt: float, p: float, q: float) -> tuple[float, float]:
    if snap.admissible is None:
        lo, hi = admissible_control_interval(snap.params, snap.rates, snap.set_point, dt)
    else:
        lo, hi = snap.admissible
    limits = snap.control_limits
    if limits is not None:
        lo = lo if lo > limits[0] else limits[0]
        hi = hi if hi < limits[1] else limits[1]
    free = snap.output + dt * p
    if q > 0:
        # output + dt * (p - q u) within the sold band R_b +/- R_r
        reg_lo = (free - snap.baseline - snap.capacity) / (dt * q)
        reg_hi = (free - snap.baseline + snap.capacity) / (dt * q)
        new_lo = lo if lo > reg_lo else reg_lo
        new_hi = hi if hi < reg_hi else reg_hi
        if new_lo <= new_hi:
            return new_lo, new_hi
        point = hi if reg_lo > hi else lo
        log.debug("regulation band unreachable this tick; pinning u to %.6g", point)
        return point, point
    return lo, hi


def default_penalty(problem: DispatchProblem) -> float:
    """
    ``1e3 * W_ref / max_i(dr_max_i)**2`` with ``W_ref = sum_i N_c (alpha + beta)``.

    ``W_ref`` bounds the total width, so a spinning reserve as large as the
    biggest ramp costs a thousand times any achievable width.  Without it the
    weight would depend on the power unit and, for large fleets, the solver
    would trade spinning reserve for width.
    """
    extremes, width_ref = [], 0.0
    for snap in problem.snapshots:
        interval = feasible_box(snap, problem.dt)
        extremes.append(thresholds_for_interval(snap.x, snap.params.population, snap.rates, interval))
        width_ref += snap.params.population * snap.rates.total
    return _penalty_for(extremes, width_ref)


def _penalty_for(extremes, width_ref: float) -> float:
    top = max([dr_max for _, dr_max in extremes])
    if top <= 0:
        top = max(max(abs(a), abs(b)) for a, b in extremes)
    if top <= 0:
        return PENALTY_SCALE * width_ref
    return PENALTY_SCALE * width_ref / top**2


def _penalty(problem: DispatchProblem, terms=None) -> float:
    if problem.penalty is not None:
        return problem.penalty
    if terms is None:
        return default_penalty(problem)
    width_ref = sum([t.nc * (t.alpha + t.beta) for t in terms])
    return _penalty_for([(t.ramp(t.hi), t.ramp(t.lo)) for t in terms], width_ref)


def evaluate(problem: DispatchProblem, u, penalty: float | None = None) -> float:
    """Objective ``sum W_i - M p_spin**2`` at control vector ``u``."""
    dt = problem.dt
    terms = [_Terms(s, dt) for s in problem.snapshots]
    penalty = _penalty(problem) if penalty is None else penalty
    widths = sum(t.width(float(v)) for t, v in zip(terms, u))
    p_spin = problem.delta_p - sum(t.ramp(float(v)) for t, v in zip(terms, u))
    return widths - penalty * p_spin**2


def _solution(problem, terms, u, penalty, method) -> DispatchSolution:
    rows = []
    ramp_sum = width_sum = 0.0
    for t, v in zip(terms, u):
        v = float(v)
        a = t.sl + v
        a = a if a < t.beta else t.beta
        b = t.sh - v
        b = b if b < t.alpha else t.alpha
        ramp = t.p - t.q * v
        width = t.nc * (t.s0 + t.s1 * v) * (a + b)
        ramp_sum += ramp
        width_sum += width
        rows.append((v, ramp, width, a, b))
    p_spin = problem.delta_p - ramp_sum
    objective = width_sum - penalty * p_spin**2
    u, delta_r, width, m1, m2 = np.array(rows).T
    return DispatchSolution(u, delta_r, width, m1, m2, p_spin, objective, penalty, method)


class _Ascent:
    """Exact coordinate and pairwise line ascent on the dispatch objective."""

    def __init__(self, terms: list[_Terms], delta_p: float, penalty: float, tie_weight: float):
        self.terms = terms
        self.delta_p = delta_p
        self.penalty = penalty
        self.tie_weight = tie_weight

    def value(self, u) -> float:
        spin = self.delta_p - sum(t.ramp(v) for t, v in zip(self.terms, u))
        return (
            sum(t.width(v) for t, v in zip(self.terms, u))
            - self.penalty * spin * spin
            - self.tie_weight * sum(v * v for v in u)
        )

    def _line_max(self, u: list[float], direction: dict[int, float]) -> float:
        """Maximise along ``u + t d``; returns the objective gain and updates ``u``."""
        t_lo, t_hi = -np.inf, np.inf
        for i, d in direction.items():
            term = self.terms[i]
            a, b = (term.lo - u[i]) / d, (term.hi - u[i]) / d
            if a > b:
                a, b = b, a
            t_lo, t_hi = max(t_lo, a), min(t_hi, b)
        t_lo, t_hi = min(t_lo, 0.0), max(t_hi, 0.0)
        if t_hi - t_lo <= 0.0:
            return 0.0
        points = {t_lo, t_hi}
        for i, d in direction.items():
            for kink in self.terms[i].kinks:
                t = (kink - u[i]) / d
                if t_lo < t < t_hi:
                    points.add(t)
        points = sorted(points)

        def along(t):
            trial = list(u)
            for i, d in direction.items():
                trial[i] = min(max(u[i] + t * d, self.terms[i].lo), self.terms[i].hi)
            return self.value(trial), trial

        base, _ = along(0.0)
        candidates = list(points) + [0.0]
        for left, right in zip(points[:-1], points[1:]):
            mid = 0.5 * (left + right)
            f0, fm, f1 = along(left)[0], along(mid)[0], along(right)[0]
            h = 0.5 * (right - left)
            curv = (f0 - 2 * fm + f1) / (2 * h * h)
            if curv < 0:
                slope = (f1 - f0) / (2 * h)
                vertex = mid - slope / (2 * curv)
                if left < vertex < right:
                    candidates.append(vertex)
        best_value, best_u = base, None
        for t in candidates:
            value, trial = along(t)
            if value > best_value:
                best_value, best_u = value, trial
        if best_u is None:
            return 0.0
        u[:] = best_u
        return best_value - base

    def run(self, start: list[float], tol: float, max_sweeps: int) -> list[float]:
        u = list(start)
        m = len(u)
        pairs = [(i, j) for i, j in itertools.combinations(range(m), 2)
                 if self.terms[i].q > 0 and self.terms[j].q > 0]
        for _ in range(max_sweeps):
            gain = 0.0
            for i in range(m):
                gain += self._line_max(u, {i: 1.0})
            for i, j in pairs:
                gain += self._line_max(u, {i: 1.0 / self.terms[i].q, j: -1.0 / self.terms[j].q})
            if gain < tol * max(1.0, abs(self.value(u))):
                return u
        raise SolverError(f"dispatch ascent did not converge in {max_sweeps} sweeps", iterate=list(u))


def _tie_weight(terms) -> float:
    """Weight of a ``sum(u**2)`` term that resolves exact ties without moving real optima."""
    width_scale = sum(t.nc * (t.alpha + t.beta) for t in terms)
    extent = max(max(t.hi - t.lo for t in terms), 1e-12)
    return 1e-10 * width_scale / extent**2


def solve(
    problem: DispatchProblem,
    n_starts: int = N_RANDOM_STARTS,
    seed: int | np.random.SeedSequence = 0,
    tol: float = 1e-9,
    max_sweeps: int = 500,
) -> DispatchSolution:
    """
    Optimised dispatch: best of a zero start and ``n_starts`` random starts.

    Raises
    ------
    SolverError
        If an ascent run fails to converge; ``iterate`` holds the last point.
    """
    dt = problem.dt
    terms = [_Terms(s, dt) for s in problem.snapshots]
    penalty = _penalty(problem, terms)
    tie_weight = _tie_weight(terms)
    ascent = _Ascent(terms, problem.delta_p, penalty, tie_weight)

    rng = np.random.default_rng(seed)
    starts = [[min(max(0.0, t.lo), t.hi) for t in terms]]
    for _ in range(n_starts):
        starts.append([float(rng.uniform(t.lo, t.hi)) for t in terms])

    best_u, best_value = None, -np.inf
    for start in starts:
        u = ascent.run(start, tol, max_sweeps)
        value = ascent.value(u)
        if value > best_value + 1e-12 * max(1.0, abs(value)):
            best_u, best_value = u, value
    return _solution(problem, terms, best_u, penalty, DispatchMethod.OPTIMIZED)


def proportional_dispatch(problem: DispatchProblem) -> DispatchSolution:
    """Split ``delta_p`` by sold capacity, clamp to each building's range, spin the rest."""
    dt = problem.dt
    terms = [_Terms(s, dt) for s in problem.snapshots]
    capacities = [float(s.capacity) for s in problem.snapshots]
    total = sum(capacities)
    if not total > 0:
        raise ParameterError("proportional dispatch needs positive total capacity")
    u = []
    for term, capacity in zip(terms, capacities):
        share = problem.delta_p * capacity / total
        lo, hi = term.lo, term.hi
        if term.q > 0:
            # ramp is decreasing in u: hi gives the smallest ramp
            least, most = term.p - term.q * hi, term.p - term.q * lo
            wanted = least if share < least else most if share > most else share
            v = (term.p - wanted) / term.q
        else:
            v = 0.0
        u.append(lo if v < lo else hi if v > hi else v)
    return _solution(problem, terms, u, _penalty(problem, terms), DispatchMethod.PROPORTIONAL)


def _oracle_objective(problem, controls, penalty):
    """
    Objective at broadcastable control arrays ``controls[i]``, computed
    straight from the model rather than from :class:`_Terms`.
    """
    dt = problem.dt
    total_width = 0.0
    total_ramp = 0.0
    for snap, u in zip(problem.snapshots, controls):
        n = snap.params.n_bins
        nc = snap.params.population
        x = snap.x
        ax = snap.mats.a_mat @ x
        bx = snap.mats.b_mat @ x
        # x_N + x_2N after one Euler step, and the set point slacks after it in control units
        s_now = x[n - 1] + x[-1] + dt * (ax[n - 1] + ax[-1])
        s_du = dt * (bx[n - 1] + bx[-1])
        step = dt * snap.params.bin_width
        low = (snap.set_point - snap.params.set_point_min) / step
        high = (snap.params.set_point_max - snap.set_point) / step
        m1 = np.minimum(low + u, snap.rates.beta)
        m2 = np.minimum(high - u, snap.rates.alpha)
        total_width = total_width + nc * (s_now + s_du * u) * (m1 + m2)
        x_n, x_2n = x[n - 1], x[-1]
        total_ramp = total_ramp + nc * ((snap.rates.alpha * x_n - snap.rates.beta * x_2n) - u * (x_n + x_2n))
    p_spin = problem.delta_p - total_ramp
    return total_width - penalty * p_spin**2


class _Profile:
    """
    Grid maximisation over one "inner" control for every point of a grid of
    the others.  Maximising the inner control exactly enough removes the
    narrow ``p_spin`` valley that a plain tensor grid cannot resolve.
    """

    WINDOW_POINTS = 41
    #: largest number of objective evaluations held in memory at once
    CHUNK = 2_000_000

    def __init__(self, problem, boxes, penalty, tie_weight, inner, refine, inner_points):
        self.inner_points = inner_points
        self.problem = problem
        self.boxes = boxes
        self.penalty = penalty
        self.tie_weight = tie_weight
        self.inner = inner
        self.refine = refine

    def _ranked(self, controls):
        value = _oracle_objective(self.problem, controls, self.penalty)
        return value - self.tie_weight * sum(np.square(c) for c in controls)

    def __call__(self, outer: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """Best tie-broken value and inner control for each point of the outer tensor grid."""
        size = int(np.prod([g.size for g in outer])) * self.inner_points
        if outer and size > self.CHUNK and outer[0].size > 1:
            rows = max(1, self.CHUNK * outer[0].size // size)
            parts = [self._profile([outer[0][i:i + rows]] + outer[1:]) for i in range(0, outer[0].size, rows)]
            return np.concatenate([v for v, _ in parts]), np.concatenate([u for _, u in parts])
        return self._profile(outer)

    def _profile(self, outer):
        m = len(self.boxes)
        dims = len(outer) + 1
        shape = tuple(g.size for g in outer)
        controls = [None] * m
        for axis, (k, grid) in enumerate(zip(self._outer_axes(), outer)):
            controls[k] = grid.reshape([-1 if a == axis else 1 for a in range(dims)])
        lo, hi = self.boxes[self.inner]
        span = hi - lo
        grid = np.linspace(lo, hi, self.inner_points) if span > 0 else np.array([lo])
        cand = np.broadcast_to(grid, shape + grid.shape)
        h = grid[1] - grid[0] if grid.size > 1 else 0.0
        best_val, best_u = None, None
        for round_ in range(self.refine + 1):
            controls[self.inner] = cand
            values = np.broadcast_to(self._ranked(controls), cand.shape)
            idx = np.argmax(values, axis=-1)[..., None]
            val = np.take_along_axis(values, idx, -1)[..., 0]
            u = np.take_along_axis(cand, idx, -1)[..., 0]
            if best_val is None:
                best_val, best_u = val, u
            else:
                better = val > best_val
                best_val, best_u = np.where(better, val, best_val), np.where(better, u, best_u)
            if h == 0.0 or round_ == self.refine:
                break
            offsets = np.linspace(-2 * h, 2 * h, self.WINDOW_POINTS)
            cand = np.clip(best_u[..., None] + offsets, lo, hi)
            h = offsets[1] - offsets[0]
        return best_val, best_u

    def _outer_axes(self):
        return [k for k in range(len(self.boxes)) if k != self.inner]


def solve_oracle(problem: DispatchProblem, grid_points: int = 201, refine: int = 6,
                 seeds: int = 8) -> DispatchSolution:
    """
    Exhaustive grid search over the control boxes (validation oracle).

    The control with the widest ramp range is profiled out: for every point
    of a ``grid_points`` tensor grid over the other controls it is maximised
    on a ``grid_points`` grid followed by ``refine`` rounds of +/- 2 cell
    windows.  The ``seeds`` best outer grid points are then refined the same
    way.  Ties are broken towards the smallest ``sum(u**2)`` as in
    :func:`solve`.  Only usable for up to three buildings.
    """
    if problem.size > ORACLE_MAX_BUILDINGS:
        raise ConfigurationError(
            f"grid oracle limited to {ORACLE_MAX_BUILDINGS} buildings, got {problem.size}"
        )
    if grid_points < 200:
        raise ConfigurationError(f"grid oracle needs >= 200 points per axis, got {grid_points}")
    dt = problem.dt
    penalty = _penalty(problem)
    terms = [_Terms(s, dt) for s in problem.snapshots]
    boxes = [feasible_box(s, dt) for s in problem.snapshots]
    reach = [t.q * (hi - lo) for t, (lo, hi) in zip(terms, boxes)]
    inner = int(np.argmax(reach))
    profile = _Profile(problem, boxes, penalty, _tie_weight(terms), inner, refine, grid_points)
    outer_axes = profile._outer_axes()

    def grids_for(windows, points):
        return [np.linspace(lo, hi, points) if hi > lo else np.array([lo]) for lo, hi in windows]

    def assemble(outer_u, inner_u):
        u = np.empty(len(boxes))
        u[outer_axes] = outer_u
        u[inner] = inner_u
        return u

    outer_boxes = [boxes[k] for k in outer_axes]
    grids = grids_for(outer_boxes, grid_points)
    values, inner_u = profile(grids)
    if not outer_axes:
        return _solution(problem, terms, assemble([], float(inner_u)), penalty, DispatchMethod.ORACLE)

    flat = values.ravel()
    keep = min(seeds, flat.size)
    top = np.argpartition(-flat, keep - 1)[:keep]
    coarse = [(g[1] - g[0]) if g.size > 1 else 0.0 for g in grids]
    best_u, best_value = None, -np.inf
    for j in top[np.argsort(-flat[top], kind="stable")]:
        index = np.unravel_index(int(j), values.shape)
        u_out = np.array([g[i] for g, i in zip(grids, index)])
        value, u_in = float(values[index]), float(inner_u[index])
        spacing = coarse
        for _ in range(refine):
            windows = [(max(lo, c - 2 * h), min(hi, c + 2 * h))
                       for (lo, hi), c, h in zip(outer_boxes, u_out, spacing)]
            local = grids_for(windows, _Profile.WINDOW_POINTS)
            vals, ins = profile(local)
            k = np.unravel_index(int(np.argmax(vals)), vals.shape)
            if vals[k] >= value:
                value, u_in = float(vals[k]), float(ins[k])
                u_out = np.array([g[i] for g, i in zip(local, k)])
            spacing = [(g[1] - g[0]) if g.size > 1 else 0.0 for g in local]
        if value > best_value:
            best_u, best_value = assemble(u_out, u_in), value
    return _solution(problem, terms, best_u, penalty, DispatchMethod.ORACLE)


def solve_lifted(problem: DispatchProblem, start: np.ndarray, m_offset: float = 1.0) -> dict[str, np.ndarray]:
    """
    Solve the lifted form with explicit ``m1``/``m2`` variables bounded above
    by each of their min() arguments, starting ``m_offset`` below the mins.

    Used to check that the lifted problem has the same optimum, i.e. that the
    ``m`` variables end up equal to their mins.
    """
    dt = problem.dt
    terms = [_Terms(s, dt) for s in problem.snapshots]
    penalty = _penalty(problem)
    m = len(terms)

    def unpack(z):
        return z[:m], z[m:2 * m], z[2 * m:]

    def objective(z):
        u, m1, m2 = unpack(z)
        width = sum(t.nc * (t.s0 + t.s1 * ui) * (a + b) for t, ui, a, b in zip(terms, u, m1, m2))
        spin = problem.delta_p - sum(t.ramp(ui) for t, ui in zip(terms, u))
        return width - penalty * spin**2

    constraints = []
    for k, t in enumerate(terms):
        constraints += [
            {"type": "ineq", "fun": lambda z, k=k, t=t: t.beta - z[m + k]},
            {"type": "ineq", "fun": lambda z, k=k, t=t: t.sl + z[k] - z[m + k]},
            {"type": "ineq", "fun": lambda z, k=k, t=t: t.alpha - z[2 * m + k]},
            {"type": "ineq", "fun": lambda z, k=k, t=t: t.sh - z[k] - z[2 * m + k]},
        ]
    u0 = np.asarray(start, dtype=float)
    m1_0 = np.array([min(t.sl + v, t.beta) for t, v in zip(terms, u0)]) - m_offset
    m2_0 = np.array([min(t.sh - v, t.alpha) for t, v in zip(terms, u0)]) - m_offset
    bounds = [(t.lo, t.hi) for t in terms] + [(None, None)] * (2 * m)
    z0 = np.concatenate([u0, m1_0, m2_0])
    # SLSQP needs an O(1) objective; the penalty term can be many orders larger
    scale = max(1.0, abs(objective(z0)))
    result = optimize.minimize(
        lambda z: -objective(z) / scale,
        z0,
        method="SLSQP",
        bounds=bounds,
        constraints=constraints,
        options={"ftol": 1e-14, "maxiter": 500},
    )
    u, m1, m2 = unpack(result.x)
    return {"u": u, "m1": m1, "m2": m2, "objective": objective(result.x), "success": np.array(result.success)}
