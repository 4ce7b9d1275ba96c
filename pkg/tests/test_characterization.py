import numpy as np
import pytest

from vrjp_bench import RateFamily, TimeScale, complete_graph, cycle_graph
from vrjp_bench.characterization import (
    NotReducibleError, canonicalize, characterize, equivalent_pairs, exchangeability_report, freedman_check,
    lambda_estimate, reversibility_check, strings_equivalent,
)
from vrjp_bench.trajectory import is_equivalent

K3 = complete_graph(3)
STRINGS = ((0, 1, 0, 2, 1), (0, 2, 1, 0, 1))


def test_lambda_examples():
    rep = lambda_estimate(RateFamily.vrjp(K3, 1.0), TimeScale.vrjp(3))
    assert all(v == 0.5 for v in rep.lambdas.values())
    assert rep.max_rel_deviation == 0.0
    # ratios 1/2 and 5/6 around their mean 2/3
    rep = lambda_estimate(RateFamily.power(K3, 1.0, 2.0), TimeScale.vrjp(3), [0.0, 2.0])
    assert rep.lambdas[(0, 1)] == pytest.approx(2 / 3)
    assert rep.max_rel_deviation == pytest.approx(0.25)
    rep = lambda_estimate(RateFamily.constant(K3, 3.0), TimeScale.identity(3))
    assert all(v == 3.0 for v in rep.lambdas.values()) and rep.max_rel_deviation == 0.0


def test_reversibility_examples():
    lam = {(0, 1): 0.5, (1, 0): 0.5}
    rep = reversibility_check(TimeScale.vrjp(2), lam)
    assert rep.A == {0: pytest.approx(4.0, abs=1e-8), 1: pytest.approx(4.0, abs=1e-8)}
    assert rep.B == {0: 4.0, 1: 4.0}
    assert rep.nonlinear == [] and rep.reversibility_gap < 1e-8
    rep = reversibility_check(TimeScale.identity(2), lam)
    assert rep.A[0] == pytest.approx(0.0, abs=1e-12) and rep.B[0] == 1.0
    assert rep.degenerate == [0, 1]
    rep = reversibility_check(TimeScale.vrjp(2), {(0, 1): 1.0, (1, 0): 2.0})
    assert rep.reversibility_gap == pytest.approx(4.0, abs=1e-7)


def test_numeric_scale_is_flagged_nonlinear():
    T = TimeScale.numeric(2, lambda x: x ** 3 + x)
    rep = reversibility_check(T, {(0, 1): 1.0, (1, 0): 1.0})
    assert rep.nonlinear == [0, 1]


def test_canonicalize_examples():
    form = canonicalize(K3, RateFamily.linear(K3, 1.0, 1.0))
    assert all(c == 1.0 for c in form.scales.values())
    assert all(w == 1.0 for w in form.weights.values())
    form = canonicalize(K3, RateFamily.linear(K3, 1.0, 2.0), verify_pairs=200, seed=1)
    assert all(c == 2.0 for c in form.scales.values())
    assert all(w == 4.0 for w in form.weights.values())
    assert form.symmetric
    assert all(c["verdict"] == "pass" for c in form.checks.values())
    slopes = {p: 1.0 for p in K3.ordered_edges}
    offsets = {p: 1.0 for p in K3.ordered_edges}
    offsets[(2, 1)] = 2.0
    with pytest.raises(NotReducibleError):
        canonicalize(K3, RateFamily.linear(K3, slopes, offsets))


def test_canonicalize_is_identity_on_vrjp():
    rng = np.random.default_rng(0)
    w = {e: float(rng.uniform(0.5, 2)) for e in K3.edges}
    form = canonicalize(K3, RateFamily.vrjp(K3, w))
    assert all(c == 1.0 for c in form.scales.values())
    for (i, j), v in form.weights.items():
        assert v == pytest.approx(w[(min(i, j), max(i, j))], rel=1e-15)


def test_asymmetric_canonical_weights():
    # rho is 1 everywhere but D_01 != D_10
    offsets = {p: 1.0 for p in K3.ordered_edges}
    offsets[(0, 1)] = 3.0
    form = canonicalize(K3, RateFamily.linear(K3, offsets, offsets))
    assert not form.symmetric and form.max_asymmetry == pytest.approx(2 / 3)


def test_pairs_are_equivalent_and_nontrivial():
    pairs = equivalent_pairs(K3, RateFamily.vrjp(K3, 1.0), TimeScale.vrjp(3), 200, seed=5)
    assert len(pairs) == 200
    for p in pairs:
        assert is_equivalent(p.sigma, p.tau)
        assert (p.sigma.skeleton, p.sigma.holds) != (p.tau.skeleton, p.tau.holds)


@pytest.mark.parametrize("g", [K3, cycle_graph(4)], ids=["K3", "C4"])
def test_vrjp_exchangeable(g):
    n = g.vertex_count
    rep = exchangeability_report(g, RateFamily.vrjp(g, 1.3), TimeScale.vrjp(n), 1000, seed=2)
    assert rep.verdict == "pass" and rep.max_abs_log_gap < 1e-9


@pytest.mark.parametrize("F, T", [
    (RateFamily.vrjp(K3, 1.0), TimeScale.identity(3)),
    (RateFamily.power(K3, 1.0, 2.0), TimeScale.vrjp(3)),
])
def test_non_vrjp_not_exchangeable(F, T):
    rep = exchangeability_report(K3, F, T, 200, seed=2)
    assert rep.verdict == "fail" and rep.max_abs_log_gap > 0.01


def test_exchangeability_implies_analytic_conditions():
    """Models passing the density check also pass lambda constancy and H^2 linearity."""
    models = [
        (K3, RateFamily.vrjp(K3, {(0, 1): 0.7, (0, 2): 1.8, (1, 2): 1.1}), TimeScale.vrjp(3)),
        (cycle_graph(4), RateFamily.vrjp(cycle_graph(4), 0.6), TimeScale.vrjp(4)),
        (K3, RateFamily.linear(K3, 1.0, 2.0), canonicalize(K3, RateFamily.linear(K3, 1.0, 2.0)).composed_timescale()),
        (K3, RateFamily.vrjp(K3, 1.0), TimeScale.identity(3)),
        (K3, RateFamily.power(K3, 1.0, 2.0), TimeScale.vrjp(3)),
    ]
    passed = 0
    for g, F, T in models:
        out = characterize(g, F, T, pairs=300, seed=4)
        if out["checks"]["exchangeability"]["verdict"] == "pass":
            passed += 1
            assert out["checks"]["lambda"]["max_rel_deviation"] < 1e-6
            assert max(out["checks"]["reversibility"]["linearity_residual"]) < 1e-6
    assert passed == 3


def test_strings_equivalence():
    assert strings_equivalent(*STRINGS)
    assert not strings_equivalent((0, 1, 2), (0, 2, 1))


def test_freedman_string_against_itself():
    rep = freedman_check(K3, RateFamily.vrjp(K3, 1.0), TimeScale.vrjp(3), 0.3, (STRINGS[0], STRINGS[0]), 20_000, 1)
    assert rep.first == rep.second and rep.z == 0.0


def test_freedman_rejects_inequivalent_strings():
    with pytest.raises(ValueError):
        freedman_check(K3, RateFamily.vrjp(K3, 1.0), TimeScale.vrjp(3), 0.3, ((0, 1, 2), (0, 2, 1)), 100, 1)


def test_freedman_vrjp_passes():
    rep = freedman_check(K3, RateFamily.vrjp(K3, 1.0), TimeScale.vrjp(3), 0.3, STRINGS, 1_000_000, 3)
    assert rep.verdict == "pass"


def test_freedman_scan_finds_witness_for_power_rates():
    F, T = RateFamily.power(K3, 1.0, 2.0), TimeScale.vrjp(3)
    witness = None
    for h in (1.0, 2.0, 3.0):
        rep = freedman_check(K3, F, T, h, STRINGS, 1_000_000, 7)
        if abs(rep.z) > 3:
            witness = h
            break
    assert witness is not None


def test_freedman_and_density_verdicts_agree():
    """VRJP passes both; the un-time-changed VRJP fails both."""
    T = TimeScale.identity(3)
    F = RateFamily.vrjp(K3, 1.0)
    assert exchangeability_report(K3, F, T, 100, seed=1).verdict == "fail"
    assert freedman_check(K3, F, T, 1.2, STRINGS, 1_000_000, 7).verdict == "fail"


def test_characterize_verdicts():
    out = characterize(K3, RateFamily.vrjp(K3, 1.0), TimeScale.vrjp(3), pairs=200, seed=1)
    assert out["verdict"] == "pass" and out["failed"] == []
    out = characterize(K3, RateFamily.power(K3, 1.0, 2.0), TimeScale.vrjp(3), pairs=200, seed=1)
    assert out["verdict"] == "fail" and "lambda" in out["failed"]
    with pytest.raises(ValueError):
        characterize(K3, RateFamily.vrjp(K3, 1.0), TimeScale.vrjp(3), checks=["bogus"])
