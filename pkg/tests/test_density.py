import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from conftest import random_weights, y_trajectory
from vrjp_bench import RateFamily, SimConfig, TimeScale, complete_graph, cycle_graph, path_graph, simulate
from vrjp_bench.density import (
    bin_probability, density_split, log_density_vrjp, log_density_x, log_density_y, log_jacobian,
    log_product_closed_form,
)
from vrjp_bench.trajectory import Trajectory, excursion_shuffle, local_times, time_change

K3 = complete_graph(3)
VRJP = RateFamily.vrjp(K3, 1.0)


def simpson(f, a, b, tol=1e-12, depth=50):
    """Adaptive Simpson quadrature (test oracle only)."""
    def step(a, b, fa, fm, fb, whole, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15
        return step(a, m, fa, flm, fm, left, depth - 1) + step(m, b, fm, frm, fb, right, depth - 1)

    if b <= a:
        return 0.0
    fa, fm, fb = f(a), f((a + b) / 2), f(b)
    return step(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), depth)


def oracle_log_density_y(tr, g, F, T):
    """Jump rates on the new clock are f_ij(h_j^-1(S_j)) / H_i(S_i); integrate them directly."""
    S = [0.0] * g.vertex_count
    out = 0.0
    visits = tr.visits
    for k, (i, hold) in enumerate(visits):
        a = S[i]
        frozen = [F.rate(i, j, T[j].h_inv(S[j])) for j in g.neighbors(i)]
        out -= simpson(lambda u: sum(frozen) / T[i].H(u), a, a + hold)
        S[i] = a + hold
        if k + 1 < len(visits):
            j = visits[k + 1][0]
            out += math.log(F.rate(i, j, T[j].h_inv(S[j])) / T[i].H(S[i]))
    return out


def markov_log_likelihood(tr, rates):
    """Constant-rate chain: product of jump rates times exp(-total rate * hold)."""
    total = {}
    for (i, _), r in rates.items():
        total[i] = total.get(i, 0.0) + r
    out = 0.0
    visits = tr.visits
    for k, (i, hold) in enumerate(visits):
        out -= total[i] * hold
        if k + 1 < len(visits):
            out += math.log(rates[(i, visits[k + 1][0])])
    return out


# --------------------------------------------------------------------------
# worked examples


def test_x_density_examples():
    assert log_density_x(Trajectory(0, (), (1.0,)), K3, VRJP) == pytest.approx(-2.0, abs=1e-15)
    tr = Trajectory.from_jumps(0, [(1, 1.0)], 2.0)
    assert log_density_x(tr, K3, VRJP) == pytest.approx(-5.0, abs=1e-15)


def test_y_density_no_jump():
    tr = Trajectory(0, (), (3.0,), "Y")
    b = log_density_y(tr, K3, VRJP, TimeScale.vrjp(3))
    assert b.log_density == pytest.approx(-2.0, abs=1e-14)
    # both neighbours are unvisited
    assert b.integral_tilde == 0.0 and b.integral_hat == pytest.approx(2.0)
    assert log_density_vrjp(tr, K3) == pytest.approx(-2.0, abs=1e-14)


def test_empty_trajectory_has_unit_density():
    assert log_density_vrjp(Trajectory(0, (), (0.0,), "Y"), K3) == 0.0


def test_identity_scale_gives_raw_density():
    for trial in range(20):
        x = simulate(K3, VRJP, SimConfig(0, 2.0, 1), trial)
        y = time_change(x, TimeScale.identity(3), "X->Y")
        assert log_density_y(y, K3, VRJP, TimeScale.identity(3)).log_density == pytest.approx(
            log_density_x(x, K3, VRJP), rel=1e-12, abs=1e-12)


def test_split_on_path_graph():
    g = path_graph(3)
    F = RateFamily.vrjp(g, 1.0)
    s = 2.5
    b = density_split(Trajectory(0, (), (s,), "Y"), g, F, TimeScale.vrjp(3))
    assert b.integral_tilde == 0.0
    assert b.integral_hat == pytest.approx(math.sqrt(s + 1) - 1, rel=1e-14)


def test_split_when_everything_is_visited():
    tr = Trajectory.from_visits([(0, 0.5), (1, 0.3), (2, 0.4)], "Y")
    assert density_split(tr, K3, VRJP, TimeScale.vrjp(3)).integral_hat == 0.0


# --------------------------------------------------------------------------
# oracles


def test_constant_rates_match_markov_likelihood():
    rates = {(0, 1): 0.5, (0, 2): 1.0, (1, 0): 2.0, (1, 2): 0.25, (2, 0): 1.5, (2, 1): 0.7}
    F = RateFamily.constant(K3, rates)
    for trial in range(50):
        tr = simulate(K3, F, SimConfig(trial % 3, 4.0, 6), trial)
        assert log_density_x(tr, K3, F) == pytest.approx(markov_log_likelihood(tr, rates), rel=1e-12)


SCALES = {
    "vrjp": TimeScale.vrjp(3),
    "quadratic": TimeScale.quadratic([0.5, 2.0, 1.0], [1.0, 0.5, 3.0]),
    "generic": TimeScale.generic(3, math.expm1, math.exp, math.log1p),
}


@pytest.mark.parametrize("name", list(SCALES))
@pytest.mark.parametrize("rates", ["vrjp", "power"])
def test_closed_form_matches_quadrature(name, rates):
    T = SCALES[name]
    F = VRJP if rates == "vrjp" else RateFamily.power(K3, 0.7, 1.5)
    for trial in range(15):
        x = simulate(K3, F, SimConfig(0, 1.0, 12), trial)
        y = time_change(x, T, "X->Y")
        got = log_density_y(y, K3, F, T).log_density
        assert got == pytest.approx(oracle_log_density_y(y, K3, F, T), rel=1e-8, abs=1e-10)


@pytest.mark.parametrize("g", [complete_graph(3), cycle_graph(4)], ids=["K3", "C4"])
def test_vrjp_closed_form_matches_general_density(g):
    rng = np.random.default_rng(4)
    T = TimeScale.vrjp(g.vertex_count)
    for trial in range(40):
        F = RateFamily.vrjp(g, random_weights(g, rng))
        y = y_trajectory(g, F, 9, trial, horizon=1.5)
        w = {e: F.rate(*e, 0.0) for e in g.edges}
        assert log_density_vrjp(y, g, w) == pytest.approx(
            log_density_y(y, g, F, T).log_density, abs=1e-10, rel=1e-12)


def test_jacobian_by_finite_differences():
    """log d_X - log d_Y equals the sum of log D'(t_k-) with D' from one-sided differences."""
    for name, T in SCALES.items():
        for trial in range(10):
            x = simulate(K3, VRJP, SimConfig(0, 1.5, 2), trial)
            y = time_change(x, T, "X->Y")
            gap = log_density_x(x, K3, VRJP) - log_density_y(y, K3, VRJP, T).log_density
            fd = 0.0
            for t in x.times:
                d = 1e-7 * max(1.0, t)
                fd += math.log((T.D(local_times(x, t)) - T.D(local_times(x, t - d))) / d)
            assert gap == pytest.approx(fd, abs=1e-6), name
            assert gap == pytest.approx(log_jacobian(x, T), abs=1e-10), name


@pytest.mark.parametrize("name", ["vrjp", "quadratic"])
def test_product_closed_form(name):
    T = SCALES[name]
    lam = {(0, 1): 0.3, (1, 0): 0.8, (0, 2): 1.2, (2, 0): 0.5, (1, 2): 0.9, (2, 1): 0.4}
    # f = lambda * h_j' is linear for a quadratic scale
    slopes = {p: lam[p] * 2 * T[p[1]].a for p in lam}
    offsets = {p: lam[p] * T[p[1]].b for p in lam}
    F = RateFamily.linear(K3, slopes, offsets)
    for trial in range(30):
        y = time_change(simulate(K3, F, SimConfig(trial % 3, 1.5, 17), trial), T, "X->Y")
        got = density_split(y, K3, F, T).log_product
        assert got == pytest.approx(log_product_closed_form(y, K3, lam, T), abs=1e-10)


@given(st.integers(0, 10_000), st.integers(0, 2**31))
@settings(max_examples=100, deadline=None)
def test_equivalent_pairs_share_hat_and_product(trial, seed):
    T = TimeScale.vrjp(3)
    sigma = y_trajectory(K3, VRJP, 31, trial, horizon=2.0)
    tau = excursion_shuffle(sigma, np.random.default_rng(seed))
    a, b = density_split(sigma, K3, VRJP, T), density_split(tau, K3, VRJP, T)
    assert abs(a.integral_hat - b.integral_hat) < 1e-10
    assert abs(a.log_product - b.log_product) < 1e-10
    assert abs(log_density_vrjp(sigma, K3) - log_density_vrjp(tau, K3)) < 1e-9


# --------------------------------------------------------------------------
# event probabilities


def test_bin_probability_examples():
    assert bin_probability(K3, VRJP, (0,), None, 1.0) == pytest.approx(math.exp(-2), rel=1e-12)
    assert bin_probability(K3, VRJP, (0, 0), [(0.0, 1.0)], 1.0) == 0.0
    # 0 -> 1 at t in [a, b], nothing afterwards: hand-derived integrand
    H, a, b = 2.0, 0.2, 1.3
    ref, _ = integrate.quad(lambda t: math.exp(-2 * t - (2 + t) * (H - t)), a, b, epsabs=0, epsrel=1e-12)
    assert bin_probability(K3, VRJP, (0, 1), [(a, b)], H) == pytest.approx(ref, rel=1e-9)


def test_bin_probability_y_clock():
    T = TimeScale.vrjp(3)
    y_horizon = 3.0
    # no jump on the new clock up to s is no jump on the raw clock up to h^-1(s)
    p = bin_probability(K3, VRJP, (0,), None, y_horizon, "Y", T)
    assert p == pytest.approx(math.exp(-2 * T[0].h_inv(y_horizon)), rel=1e-12)
    # a one-jump event in both clocks, with matching bins
    a, b = 0.5, 2.0
    x_version = integrate.quad(
        lambda t: math.exp(-2 * t) * math.exp(-(2 + t) * (T[1].h_inv(y_horizon - T[0].h(t)))),
        T[0].h_inv(a), T[0].h_inv(b), epsabs=0, epsrel=1e-12)[0]
    assert bin_probability(K3, VRJP, (0, 1), [(a, b)], y_horizon, "Y", T) == pytest.approx(x_version, rel=1e-8)


def test_bins_must_be_ordered():
    with pytest.raises(ValueError):
        bin_probability(K3, VRJP, (0, 1, 2), [(0.5, 1.0), (0.2, 0.6)], 1.0)
