import sys
from pathlib import Path

import numpy as np
import pytest

from thermoflex.fleet import BuildingParams, Fleet

sys.path.insert(0, str(Path(__file__).parent))


def make_params(n_bins=10, t_on=10.0, t_off=20.0, set_band_width=2.0, set_point=22.0,
                population=1000.0, tau=60.0, band_width=1.0, **extra):
    return BuildingParams(n_bins=n_bins, t_on=t_on, t_off=t_off, set_band_width=set_band_width,
                          set_point=set_point, population=population, tau=tau,
                          band_width=band_width, **extra)


def building_spec(name, n_bins=10, t_on=10.0, t_off=20.0, population=1000.0, set_band_width=2.0,
                  band_width=1.0, **extra):
    spec = {"name": name, "params": {"n_bins": n_bins, "t_on": t_on, "t_off": t_off,
                                     "set_band_width": set_band_width, "set_point": 22.0,
                                     "population": population, "tau": 60.0, "band_width": band_width}}
    spec.update(extra)
    return spec


def random_simplex(rng, size):
    return rng.dirichlet(np.ones(size))


@pytest.fixture
def fleet():
    return Fleet.from_params(make_params())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_snapshot(rng, dt=4.0 / 60.0):
    """A building report with random parameters, state and set point."""
    from thermoflex.capability import qualification_limit
    from thermoflex.dispatch import BuildingSnapshot

    n = int(rng.integers(3, 13))
    params = make_params(n_bins=n, t_on=float(rng.uniform(5.0, 30.0)), t_off=float(rng.uniform(5.0, 30.0)),
                         population=float(rng.uniform(200.0, 2000.0)),
                         set_band_width=float(rng.uniform(0.3, 3.0)), band_width=float(rng.uniform(0.3, 1.5)))
    fleet = Fleet.from_params(params)
    if rng.random() < 0.5:
        x = fleet.steady_state()
    else:
        x = 0.5 * fleet.steady_state() + 0.5 * random_simplex(rng, 2 * n)
    set_point = params.set_point_min + float(rng.uniform(0.0, 1.0)) * params.set_band_width
    capacity = qualification_limit(params) * float(rng.uniform(0.5, 1.5))
    y = float(fleet.mats.c_row @ x)
    return BuildingSnapshot(x, set_point, params, fleet.rates, fleet.baseline, capacity, y)


def random_problem(rng, m, dt=4.0 / 60.0):
    from thermoflex.dispatch import DispatchProblem, feasible_box
    from thermoflex.capability import thresholds_for_interval

    snaps = [random_snapshot(rng, dt) for _ in range(m)]
    ranges = [thresholds_for_interval(s.x, s.params.population, s.rates, feasible_box(s, dt)) for s in snaps]
    lo = sum(r[0] for r in ranges)
    hi = sum(r[1] for r in ranges)
    span = max(hi - lo, 1.0)
    delta_p = float(rng.uniform(lo - 0.3 * span, hi + 0.3 * span))
    return DispatchProblem(snaps, delta_p, dt)
