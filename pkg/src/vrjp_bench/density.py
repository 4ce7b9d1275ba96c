"""Log-densities of trajectories with respect to Lebesgue measure on the jump times.

Three routes are provided:

* :func:`log_density_x` for the raw process,
* :func:`log_density_y` for the time-changed process, returned as a
  :class:`DensityBreakdown`,
* :func:`log_density_vrjp`, the closed form for VRJP rates under the VRJP
  time scale, which depends only on transition counts and final local times.

All values are natural logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from scipy import integrate

from .dynamics import RateFamily, TimeScale, check_compatible
from .graph import Graph
from .trajectory import Trajectory, TrajectoryError, transition_counts


@dataclass(frozen=True)
class DensityBreakdown:
    """``log_density = log_product - integral_tilde - integral_hat``.

    ``integral_tilde`` collects the survival integral towards neighbours the
    trajectory visits, ``integral_hat`` towards neighbours it never visits.
    """

    log_product: float
    integral_tilde: float
    integral_hat: float

    @property
    def log_density(self) -> float:
        return self.log_product - self.integral_tilde - self.integral_hat

    def to_dict(self) -> dict:
        return {
            "log_product": self.log_product,
            "integral_tilde": self.integral_tilde,
            "integral_hat": self.integral_hat,
            "log_density": self.log_density,
        }


def _require_clock(tr: Trajectory, clock: str) -> None:
    if tr.clock != clock:
        raise TrajectoryError(f"expected a {clock}-clock trajectory, got {tr.clock}")


def log_density_x(tr: Trajectory, g: Graph, F: RateFamily) -> float:
    """Raw-clock log-density.

    On each holding interval at ``i`` the rates ``f_ij(l_j)`` are frozen, so
    the survival integral is ``sum_j f_ij(l_j) * hold`` exactly.
    """
    _require_clock(tr, "X")
    check_compatible(g, F)
    tr.check_on(g)
    l = [0.0] * g.vertex_count
    log_prod = 0.0
    integral = 0.0
    visits = tr.visits
    for k, (i, hold) in enumerate(visits):
        nbrs = g.neighbors(i)
        rates = [F.rate(i, j, l[j]) for j in nbrs]
        integral += math.fsum(rates) * float(hold)
        if k + 1 < len(visits):
            j = visits[k + 1][0]
            log_prod += math.log(F.rate(i, j, l[j]))
        l[i] += float(hold)
    return log_prod - integral


def log_density_y(tr: Trajectory, g: Graph, F: RateFamily, T: TimeScale) -> DensityBreakdown:
    """Time-changed log-density, split into product and survival parts.

    Holding interval at ``i`` from local time ``a`` to ``b``: neighbour ``j``
    contributes ``f_ij(h_j^{-1}(S_j)) * (H_hat_i(b) - H_hat_i(a))`` to the
    survival integral; a jump ``i -> j`` contributes
    ``log f_ij(h_j^{-1}(S_j)) - log H_i(b)`` to the product.
    """
    _require_clock(tr, "Y")
    check_compatible(g, F, T)
    tr.check_on(g)
    visited = set(tr.skeleton)
    S = [0.0] * g.vertex_count
    log_prod = 0.0
    tilde = 0.0
    hat = 0.0
    visits = tr.visits
    for k, (i, hold) in enumerate(visits):
        a = S[i]
        b = a + float(hold)
        dH = float(T[i].H_hat(b)) - float(T[i].H_hat(a))
        for j in g.neighbors(i):
            c = F.rate(i, j, float(T[j].h_inv(S[j]))) * dH
            if j in visited:
                tilde += c
            else:
                hat += c
        if k + 1 < len(visits):
            j = visits[k + 1][0]
            log_prod += math.log(F.rate(i, j, float(T[j].h_inv(S[j])))) - math.log(float(T[i].H(b)))
        S[i] = b
    return DensityBreakdown(log_prod, tilde, hat)


def log_density_vrjp(tr: Trajectory, g: Graph, W: Mapping | None = None) -> float:
    """Closed-form VRJP log-density on the time-changed clock.

    ``n log(1/2) + sum_k log W_{i_{k-1} i_k} - sum_{i != i_n} log(1 + S_i) / 2
    - sum_{(i, j) ordered, adjacent} (W_ij / 2) (sqrt((S_i + 1)(S_j + 1)) - 1)``
    with ``S`` the final local times. ``W`` defaults to the graph weights.
    """
    _require_clock(tr, "Y")
    tr.check_on(g)

    def w(i, j):
        if W is None:
            return g.weight(i, j)
        return float(W[(i, j)] if (i, j) in W else W[(j, i)])

    S = [0.0] * g.vertex_count
    for v, s in tr.final_local_times().items():
        S[v] = float(s)
    counts = transition_counts(tr)
    out = -tr.n_jumps * math.log(2.0)
    out += math.fsum(c * math.log(w(i, j)) for (i, j), c in counts.items())
    out -= 0.5 * math.fsum(math.log1p(S[i]) for i in range(g.vertex_count) if i != tr.end)
    out -= math.fsum(
        0.5 * w(i, j) * (math.sqrt((S[i] + 1.0) * (S[j] + 1.0)) - 1.0)
        for i, j in g.ordered_edges
    )
    return out


def density_split(tr: Trajectory, g: Graph, F: RateFamily, T: TimeScale) -> DensityBreakdown:
    """Like :func:`log_density_y` but with the unvisited part in closed form.

    A neighbour ``j`` never visited keeps ``S_j = 0``, so its share of the
    survival integral is ``f_ij(0) (H_hat_i(S_i) - H_hat_i(0))`` summed over
    visited ``i``, a function of final local times only.
    """
    full = log_density_y(tr, g, F, T)
    visited = set(tr.skeleton)
    S = tr.final_local_times()
    hat = math.fsum(
        F.rate(i, j, 0.0) * (float(T[i].H_hat(float(S[i]))) - float(T[i].H_hat(0.0)))
        for i in sorted(visited) for j in g.neighbors(i) if j not in visited
    )
    return DensityBreakdown(full.log_product, full.integral_tilde, hat)


def log_product_closed_form(tr: Trajectory, g: Graph, lambdas: Mapping[tuple[int, int], float],
                            T: TimeScale) -> float:
    """Product part for rates of the form ``f_ij = lambda_ij h_j'``.

    Per vertex the ``H`` factors telescope: a visited vertex other than the
    start contributes ``H_i(0)`` on first arrival, and every visited vertex
    other than the end contributes ``1 / H_i(S_i)`` on its last departure.
    """
    _require_clock(tr, "Y")
    counts = transition_counts(tr)
    S = tr.final_local_times()
    out = math.fsum(c * math.log(lambdas[p]) for p, c in counts.items())
    out += math.fsum(math.log(float(T[i].H(0.0))) for i in S if i != tr.start)
    out -= math.fsum(math.log(float(T[i].H(float(S[i])))) for i in S if i != tr.end)
    return out


def log_jacobian(tr: Trajectory, T: TimeScale) -> float:
    """``sum_k log D'(t_k-)`` for an X-trajectory: the speed of ``D`` just before each jump."""
    _require_clock(tr, "X")
    l: dict[int, float] = {}
    out = 0.0
    visits = tr.visits
    for k, (v, hold) in enumerate(visits[:-1]):
        l[v] = l.get(v, 0.0) + float(hold)
        out += math.log(float(T[v].h_prime(l[v])))
    return out


# --------------------------------------------------------------------------
# event probabilities from the density


def _log_density(tr: Trajectory, g: Graph, F: RateFamily, T: TimeScale | None) -> float:
    if tr.clock == "X":
        return log_density_x(tr, g, F)
    if T is None:
        raise TrajectoryError("a Y-clock density needs a time scale")
    return log_density_y(tr, g, F, T).log_density


def bin_probability(g: Graph, F: RateFamily, path: Sequence[int],
                    bins: Sequence[tuple[float, float]] | None, horizon: float,
                    clock: str = "X", T: TimeScale | None = None,
                    epsrel: float = 1e-9) -> float:
    """Probability that the trajectory up to ``horizon`` follows ``path``
    with jump ``k`` inside ``bins[k]``, by integrating the density.

    Bins must be ordered and disjoint (``b_k <= a_{k+1}``); ``None`` for a
    path without jumps.
    """
    path = tuple(int(v) for v in path)
    n = len(path) - 1
    for a, b in zip(path, path[1:]):
        if not g.adjacent(a, b):
            return 0.0
    if n == 0:
        tr = Trajectory(path[0], (), (float(horizon),), clock)
        return math.exp(_log_density(tr, g, F, T))
    bins = [(float(a), float(b)) for a, b in bins]
    if len(bins) != n:
        raise ValueError(f"{n} jumps need {n} bins")
    for (a1, b1), (a2, _) in zip(bins, bins[1:]):
        if b1 > a2:
            raise ValueError("bins must be ordered and disjoint")
    if bins[0][0] < 0 or bins[-1][1] > horizon:
        raise ValueError("bins must lie inside [0, horizon]")

    def integrand(*times):
        tr = Trajectory.from_jumps(path[0], list(zip(path[1:], times)), horizon, clock)
        return math.exp(_log_density(tr, g, F, T))

    # nquad integrates the first argument innermost
    value, _ = integrate.nquad(integrand, bins, opts={"epsrel": epsrel, "epsabs": 0.0, "limit": 100})
    return float(value)


__all__ = [
    "DensityBreakdown", "log_density_x", "log_density_y", "log_density_vrjp", "density_split",
    "log_product_closed_form", "log_jacobian", "bin_probability",
]
