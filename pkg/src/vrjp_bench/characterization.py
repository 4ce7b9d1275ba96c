"""Checks that separate VRJP-type models from the rest.

A model is a graph, a rate family and a time scale. The checks here are

* exchangeability in density: equivalent trajectories on the time-changed
  clock must have equal densities;
* the discretized (Freedman) version: equivalent strings sampled on a grid
  must be equally likely;
* the analytic necessary conditions: ``f_ij / h_j'`` constant, ``H_i^2``
  affine, and ``lambda_ij A_j = lambda_ji A_i`` on every edge;
* reduction of linear rates ``W_ij x + D_ij`` to VRJP form by a per-vertex
  rescaling of local time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng
from .density import log_density_y
from .dynamics import QuadraticScale, RateFamily, TimeScale, check_compatible
from .graph import Graph
from .simulator import McEstimate, SimConfig, StringEvent, event_counts, simulate_many
from .trajectory import Trajectory, excursion_shuffle, time_change, transition_counts

DEFAULT_GRID = tuple(0.5 * k for k in range(21))
EXCH_TOL = 1e-9
LAMBDA_TOL = 1e-6
LINEARITY_TOL = 1e-6
REVERSIBILITY_TOL = 1e-6
Z_MAX = 3.0


class NotReducibleError(ValueError):
    """Linear rates whose ``W_ij / D_ij`` depends on the source vertex."""


# --------------------------------------------------------------------------
# exchangeability in density


@dataclass
class EquivalentPair:
    trial: int
    sigma: Trajectory
    tau: Trajectory


def equivalent_pairs(g: Graph, F: RateFamily, T: TimeScale, n_pairs: int, seed: int,
                     start: int = 0, horizon: float = 2.0, max_jumps: int = 10_000,
                     max_attempts: int | None = None) -> list[EquivalentPair]:
    """Simulate raw trajectories, move them to the time-changed clock and pair
    each with a random rearrangement.

    Trajectories without a nontrivial rearrangement are skipped, so every
    returned pair differs from the identity move.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    check_compatible(g, F, T)
    cfg = SimConfig(start, horizon, seed, max_jumps)
    shuffler = rng.shuffle_generator(seed, 1)
    max_attempts = max_attempts or 50 * n_pairs
    pairs: list[EquivalentPair] = []
    first = 0
    block = max(64, 2 * n_pairs)
    while len(pairs) < n_pairs and first < max_attempts:
        count = min(block, max_attempts - first)
        for k, x in enumerate(simulate_many(g, F, cfg, count, first_trial=first)):
            y = time_change(x, T, "X->Y")
            z = excursion_shuffle(y, shuffler)
            if z.skeleton == y.skeleton and z.holds == y.holds:
                continue
            pairs.append(EquivalentPair(first + k, y, z))
            if len(pairs) == n_pairs:
                break
        first += count
    if len(pairs) < n_pairs:
        raise RuntimeError(f"only {len(pairs)} nontrivial pairs in {max_attempts} trajectories; "
                           "increase the horizon")
    return pairs


@dataclass
class ExchReport:
    pairs_tested: int
    max_abs_log_gap: float
    worst_pair: int | None
    tolerance: float

    @property
    def verdict(self) -> str:
        return "pass" if self.max_abs_log_gap <= self.tolerance else "fail"

    def to_dict(self) -> dict:
        return {
            "pairs_tested": self.pairs_tested,
            "max_abs_log_gap": self.max_abs_log_gap,
            "worst_pair": self.worst_pair,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }


def exchangeability_report(g: Graph, F: RateFamily, T: TimeScale, n_pairs: int, seed: int,
                           tol: float = EXCH_TOL, start: int = 0, horizon: float = 2.0) -> ExchReport:
    pairs = equivalent_pairs(g, F, T, n_pairs, seed, start=start, horizon=horizon)
    worst, gap = None, 0.0
    for p in pairs:
        d = abs(log_density_y(p.sigma, g, F, T).log_density - log_density_y(p.tau, g, F, T).log_density)
        if d > gap or worst is None:
            worst, gap = p.trial, d
    return ExchReport(len(pairs), gap, worst, tol)


# --------------------------------------------------------------------------
# discretized exchangeability


@dataclass
class FreedmanReport:
    h: float
    strings: tuple[tuple[int, ...], tuple[int, ...]]
    first: McEstimate
    second: McEstimate
    z: float
    z_max: float = Z_MAX

    @property
    def verdict(self) -> str:
        return "pass" if abs(self.z) < self.z_max else "fail"

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "strings": [list(s) for s in self.strings],
            "first": self.first.to_dict(),
            "second": self.second.to_dict(),
            "z": self.z,
            "z_max": self.z_max,
            "verdict": self.verdict,
        }


def strings_equivalent(a: Sequence[int], b: Sequence[int]) -> bool:
    return len(a) == len(b) and a[0] == b[0] and transition_counts(a) == transition_counts(b)


def freedman_check(g: Graph, F: RateFamily, T: TimeScale, h: float,
                   string_pair: tuple[Sequence[int], Sequence[int]], trials: int, seed: int,
                   z_max: float = Z_MAX, workers: int = 1) -> FreedmanReport:
    """Estimate both string probabilities on the time-changed clock from one sample.

    The two events are disjoint unless the strings coincide, so the variance
    of the difference of frequencies is ``(p1 + p2 - (p1 - p2)^2) / n``.
    """
    xi, eta = (tuple(int(v) for v in s) for s in string_pair)
    if not strings_equivalent(xi, eta):
        raise ValueError(f"strings {xi} and {eta} are not equivalent")
    span = (len(xi) - 1) * h
    cfg = SimConfig(xi[0], span if span > 0 else h, seed, clock="Y")
    events = [StringEvent(xi, h), StringEvent(eta, h)]
    c1, c2 = event_counts(g, F, cfg, events, trials, T, workers)
    e1, e2 = McEstimate.from_counts(int(c1), trials), McEstimate.from_counts(int(c2), trials)
    diff = e1.estimate - e2.estimate
    if xi == eta or diff == 0:
        z = 0.0
    else:
        var = (e1.estimate + e2.estimate - diff * diff) / trials
        z = diff / math.sqrt(var)
    return FreedmanReport(h, (xi, eta), e1, e2, z, z_max)


# --------------------------------------------------------------------------
# analytic conditions


@dataclass
class LambdaReport:
    lambdas: dict[tuple[int, int], float] = field(default_factory=dict)
    max_rel_deviation: float | None = None
    A: dict[int, float] | None = None
    B: dict[int, float] | None = None
    linearity_residual: dict[int, float] | None = None
    nonlinear: list[int] | None = None
    degenerate: list[int] | None = None
    reversibility_gap: float | None = None

    def to_dict(self) -> dict:
        out = {"lambda": [[i, j, v] for (i, j), v in sorted(self.lambdas.items())],
               "max_rel_deviation": self.max_rel_deviation}
        if self.A is not None:
            out.update({
                "A": [self.A[v] for v in sorted(self.A)],
                "B": [self.B[v] for v in sorted(self.B)],
                "linearity_residual": [self.linearity_residual[v] for v in sorted(self.linearity_residual)],
                "nonlinear": self.nonlinear,
                "degenerate": self.degenerate,
                "reversibility_gap": self.reversibility_gap,
            })
        return out


def lambda_estimate(F: RateFamily, T: TimeScale, grid: Sequence[float] = DEFAULT_GRID) -> LambdaReport:
    """Mean of ``f_ij(x) / h_j'(x)`` over the grid and its worst relative spread."""
    grid = [float(x) for x in grid]
    if not grid or min(grid) < 0:
        raise ValueError("grid must be nonempty and nonnegative")
    lambdas = {}
    worst = 0.0
    for i, j in F.graph.ordered_edges:
        ratios = []
        for x in grid:
            d = float(T[j].h_prime(x))
            if d == 0:
                raise ZeroDivisionError(f"h_{j}'({x}) = 0")
            ratios.append(F.rate(i, j, x) / d)
        lam = math.fsum(ratios) / len(ratios)
        lambdas[(i, j)] = lam
        worst = max(worst, max(abs(r - lam) / lam for r in ratios))
    return LambdaReport(lambdas, worst)


def reversibility_check(T: TimeScale, lambdas: dict[tuple[int, int], float],
                        grid: Sequence[float] = DEFAULT_GRID, tol: float = LINEARITY_TOL,
                        report: LambdaReport | None = None) -> LambdaReport:
    """Fit ``H_i(s)^2 = A_i s + B_i`` by least squares and compare ``lambda_ij A_j`` with ``lambda_ji A_i``.

    ``B_i`` is ``H_i(0)^2`` directly. A vertex is flagged non-linear when the
    largest residual of the fit exceeds ``tol`` times the scale of ``H^2``,
    and degenerate when ``A_i`` vanishes (constant-rate Markov case).
    """
    s = np.asarray(grid, dtype=float)
    A, B, resid, nonlinear, degenerate = {}, {}, {}, [], []
    for v in range(len(T)):
        y = np.array([float(T[v].H(x)) ** 2 for x in s])
        slope, intercept = np.polyfit(s, y, 1)
        scale = max(1.0, float(np.max(np.abs(y))))
        r = float(np.max(np.abs(y - (slope * s + intercept)))) / scale
        A[v] = float(slope)
        B[v] = float(T[v].H(0.0)) ** 2
        resid[v] = r
        if r > tol:
            nonlinear.append(v)
        if abs(slope) <= tol * scale:
            degenerate.append(v)
    gap = 0.0
    for (i, j), lam in lambdas.items():
        if (j, i) in lambdas:
            gap = max(gap, abs(lam * A[j] - lambdas[(j, i)] * A[i]))
    out = report or LambdaReport(dict(lambdas))
    out.A, out.B, out.linearity_residual = A, B, resid
    out.nonlinear, out.degenerate, out.reversibility_gap = nonlinear, degenerate, gap
    return out


# --------------------------------------------------------------------------
# linear rates to VRJP form


@dataclass
class CanonicalForm:
    """Per-vertex local-time scales ``c`` and VRJP weights ``W_hat`` (ordered pairs)."""

    scales: dict[int, float]
    weights: dict[tuple[int, int], float]
    symmetric: bool
    max_asymmetry: float
    max_rho_spread: float
    checks: dict = field(default_factory=dict)

    def vrjp_rates(self, g: Graph) -> RateFamily:
        if not self.symmetric:
            raise ValueError("asymmetric weights have no VRJP form")
        return RateFamily.vrjp(g, {(i, j): w for (i, j), w in self.weights.items() if i < j})

    def composed_timescale(self) -> TimeScale:
        """``h_v(x) = (x / c_v)^2 + 2 x / c_v``: the rescaling followed by the VRJP scale."""
        n = len(self.scales)
        return TimeScale("quadratic", [QuadraticScale(1.0 / self.scales[v] ** 2, 2.0 / self.scales[v])
                                       for v in range(n)])

    def to_dict(self) -> dict:
        return {
            "scales": [self.scales[v] for v in sorted(self.scales)],
            "weights": [[i, j, w] for (i, j), w in sorted(self.weights.items())],
            "symmetric": self.symmetric,
            "max_asymmetry": self.max_asymmetry,
            "max_rho_spread": self.max_rho_spread,
            "checks": self.checks,
        }


def canonicalize(g: Graph, F: RateFamily, tol: float = 1e-9, verify_pairs: int = 0,
                 seed: int = 0) -> CanonicalForm:
    """Reduce ``f_ij(x) = W_ij x + D_ij`` to VRJP rates.

    With ``rho_j = W_ij / D_ij`` independent of ``i`` and ``c_j = 1 / rho_j``,
    ``f_ij(x) = D_ij (1 + x / c_j)``. Measuring local time at ``j`` in units
    of ``c_j`` (and time at ``i`` likewise) turns the rate into
    ``W_hat_ij (1 + T_j)`` with ``W_hat_ij = c_i D_ij``.

    With ``verify_pairs > 0`` the density engine checks exchangeability of
    the VRJP(W_hat) process under the VRJP scale and of the original rates
    under the composed scale; the gaps go into ``checks``.
    """
    check_compatible(g, F)
    if F.kind not in ("linear", "vrjp"):
        raise ValueError(f"canonicalize needs linear rates, got {F.kind}")
    if F.kind == "vrjp":
        slopes = offsets = F.params["W"]
    else:
        slopes, offsets = F.params["W"], F.params["D"]
    if np.any(slopes <= 0) or np.any(offsets <= 0):
        raise ValueError("slopes and offsets must be positive")
    rho: dict[int, list[float]] = {}
    for k, (i, j) in enumerate(g.ordered_edges):
        rho.setdefault(j, []).append(slopes[k] / offsets[k])
    spread = 0.0
    scales = {}
    for j in range(g.vertex_count):
        vals = rho[j]
        ref = vals[0]
        s = max(abs(v - ref) / ref for v in vals)
        spread = max(spread, s)
        if s > tol:
            raise NotReducibleError(f"W/D into vertex {j} depends on the source: {vals}")
        scales[j] = float(1.0 / ref)
    weights = {(i, j): float(scales[i] * offsets[k]) for k, (i, j) in enumerate(g.ordered_edges)}
    asym = max(abs(weights[(i, j)] - weights[(j, i)]) / max(weights[(i, j)], weights[(j, i)])
               for i, j in g.edges)
    out = CanonicalForm(scales, weights, bool(asym <= tol), float(asym), float(spread))
    if verify_pairs > 0 and out.symmetric:
        vr = exchangeability_report(g, out.vrjp_rates(g), TimeScale.vrjp(g.vertex_count), verify_pairs, seed)
        comp = exchangeability_report(g, F, out.composed_timescale(), verify_pairs, seed)
        out.checks = {"vrjp_form": vr.to_dict(), "composed_scale": comp.to_dict()}
    return out


# --------------------------------------------------------------------------
# everything at once


CHECKS = ("lambda", "reversibility", "exchangeability", "freedman")


def characterize(g: Graph, F: RateFamily, T: TimeScale, checks: Sequence[str] = CHECKS[:3],
                 pairs: int = 1000, seed: int = 0, grid: Sequence[float] = DEFAULT_GRID,
                 exch_tol: float = EXCH_TOL, lambda_tol: float = LAMBDA_TOL,
                 reversibility_tol: float = REVERSIBILITY_TOL, freedman: dict | None = None) -> dict:
    """Run the requested checks; the overall verdict passes only if all do."""
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}")
    out: dict = {"checks": {}}
    lam = lambda_estimate(F, T, grid)
    if "lambda" in checks:
        out["checks"]["lambda"] = {
            **lam.to_dict(), "tolerance": lambda_tol,
            "verdict": "pass" if lam.max_rel_deviation <= lambda_tol else "fail",
        }
    if "reversibility" in checks:
        rev = reversibility_check(T, lam.lambdas, grid)
        ok = not rev.nonlinear and rev.reversibility_gap <= reversibility_tol
        out["checks"]["reversibility"] = {
            **rev.to_dict(), "tolerance": reversibility_tol, "verdict": "pass" if ok else "fail",
        }
    if "exchangeability" in checks:
        out["checks"]["exchangeability"] = exchangeability_report(g, F, T, pairs, seed, exch_tol).to_dict()
    if "freedman" in checks:
        fr = dict(freedman or {})
        strings = fr.get("strings", [[0, 1, 0, 2, 1], [0, 2, 1, 0, 1]])
        reports = [freedman_check(g, F, T, h, strings, fr.get("trials", 100_000), seed).to_dict()
                   for h in fr.get("h", [0.3])]
        out["checks"]["freedman"] = {
            "runs": reports,
            "verdict": "pass" if all(r["verdict"] == "pass" for r in reports) else "fail",
        }
    failed = sorted(k for k, v in out["checks"].items() if v["verdict"] != "pass")
    out["failed"] = failed
    out["verdict"] = "fail" if failed else "pass"
    return out
