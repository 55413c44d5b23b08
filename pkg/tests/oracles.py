"""Independent reference computations used to freeze expected values in tests."""

from __future__ import annotations

import numpy as np
import scipy.linalg


def jump_chain_histograms(n_bins, alpha, beta, u, x0, n_appliances, times, seed=0):
    """
    Exact simulation of ``n_appliances`` independent appliances, each a
    continuous-time jump chain around the 2N-bin ring with rate ``alpha - u``
    in off bins and ``beta + u`` in on bins.

    Returns the empirical bin distribution at each of ``times`` (ascending).
    """
    rng = np.random.default_rng(seed)
    size = 2 * n_bins
    rates = np.where(np.arange(size) < n_bins, alpha - u, beta + u)
    state = rng.choice(size, size=n_appliances, p=np.asarray(x0) / np.sum(x0))
    clock = rng.exponential(1.0 / rates[state])
    hists = []
    for t in times:
        due = clock <= t
        while due.any():
            idx = np.flatnonzero(due)
            state[idx] = (state[idx] + 1) % size
            clock[idx] += rng.exponential(1.0 / rates[state[idx]])
            due[idx] = clock[idx] <= t
        hists.append(np.bincount(state, minlength=size) / n_appliances)
    return np.array(hists)


def nullspace_steady_state(a_mat):
    """Stationary distribution as the normalised null vector of the generator."""
    basis = scipy.linalg.null_space(a_mat)
    assert basis.shape[1] == 1
    v = basis[:, 0]
    return v / v.sum()


def eq38_thresholds(x, population, set_point, t_min, t_max, dt, bin_width, r_on, r_off):
    """Provision thresholds written term by term from the closed form with rate pair (r_on, r_off)."""
    n = x.size // 2
    x_n, x_2n = x[n - 1], x[-1]
    drift = r_off * x_n - r_on * x_2n
    dr_max = population * (drift + min((set_point - t_min) / (dt * bin_width), r_on) * (x_n + x_2n))
    dr_min = population * (drift - min((t_max - set_point) / (dt * bin_width), r_off) * (x_n + x_2n))
    return dr_min, dr_max


def brute_ramp_range(x, mats, lo, hi, points=20001):
    """Extremes of ``C (A + B u) x`` over a dense grid of ``u`` in ``[lo, hi]``."""
    grid = np.linspace(lo, hi, points)
    ramps = mats.c_row @ (mats.a_mat @ x)[:, None] + grid * (mats.c_row @ (mats.b_mat @ x))
    return float(ramps.min()), float(ramps.max())
