"""Exact simulation of local-time-dependent jump processes.

While the walker sits at ``i`` the local times of all other vertices are
frozen, so every rate ``f_ij(l_j)`` is constant over the holding interval.
Each step therefore draws an exponential holding time with the total rate
and a target proportional to the individual rates; no thinning or time
discretization is involved.

The kernel advances a whole batch of trials at once with numpy. Draw ``2k``
of a trial gives its ``k``-th holding time and draw ``2k + 1`` its ``k``-th
target (see :mod:`vrjp_bench.rng`), so a trial's path is a function of
``(seed, trial index)`` alone. In particular the path up to a horizon is a
prefix of the path up to any later horizon.

With ``clock="Y"`` the horizon is measured on the time-changed clock
``D(t) = sum_v h_v(l_v(t))``: the raw process is advanced until ``D`` would
pass the horizon, and the recorded jump times are the images ``D(t_k)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import rng
from .dynamics import RateFamily, TimeScale, check_compatible
from .graph import Graph
from .trajectory import MAX_JUMPS, Trajectory, TrajectoryError

CHUNK = 1 << 16


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    start: int
    horizon: float
    seed: int
    max_jumps: int = MAX_JUMPS
    clock: str = "X"

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.max_jumps < 1:
            raise ValueError("max_jumps must be at least 1")
        if self.clock not in ("X", "Y"):
            raise ValueError(f"clock must be 'X' or 'Y', got {self.clock!r}")


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    stderr: float
    trials: int
    hits: int

    @classmethod
    def from_counts(cls, hits: int, trials: int) -> "McEstimate":
        if trials <= 0:
            raise ValueError("trials must be positive")
        p = hits / trials
        return cls(p, math.sqrt(p * (1.0 - p) / trials), trials, hits)

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr, "trials": self.trials, "hits": self.hits}


@dataclass
class TrajectoryBatch:
    """Padded arrays for a block of trials; ``targets`` is -1 and ``times`` inf past ``njumps``."""

    start: int
    horizon: float
    clock: str
    trial_ids: np.ndarray
    targets: np.ndarray
    times: np.ndarray
    njumps: np.ndarray
    overflow: np.ndarray

    def __len__(self) -> int:
        return len(self.trial_ids)

    def trajectory(self, b: int) -> Trajectory:
        if self.overflow[b]:
            raise SimulationError(f"trial {int(self.trial_ids[b])} exceeded max_jumps")
        n = int(self.njumps[b])
        jumps = [(int(j), float(t)) for j, t in zip(self.targets[b, :n], self.times[b, :n])]
        return Trajectory.from_jumps(self.start, jumps, self.horizon, self.clock)

    def states_at(self, t: float) -> np.ndarray:
        """Right-continuous state of every trial at time ``t``."""
        k = (self.times <= t).sum(axis=1)
        out = np.full(len(self), self.start, dtype=np.int64)
        has = k > 0
        out[has] = self.targets[has, k[has] - 1]
        return out


def _tables(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    width = g.max_degree
    nbr = np.full((g.vertex_count, width), -1, dtype=np.int64)
    eid = np.zeros((g.vertex_count, width), dtype=np.int64)
    for v in range(g.vertex_count):
        for k, u in enumerate(g.neighbors(v)):
            nbr[v, k] = u
            eid[v, k] = g.ordered_index(v, u)
    return nbr, eid


def _h_by_vertex(T: TimeScale, vertex: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.empty(len(x))
    for v in np.unique(vertex):
        m = vertex == v
        out[m] = T[int(v)].h_array(x[m])
    return out


def run_kernel(g: Graph, F: RateFamily, cfg: SimConfig, trial_ids: np.ndarray,
               timescale: TimeScale | None = None) -> TrajectoryBatch:
    """Simulate the given trials. Trials exceeding ``max_jumps`` are flagged, not raised."""
    check_compatible(g, F, timescale)
    if not 0 <= cfg.start < g.vertex_count:
        raise SimulationError(f"start vertex {cfg.start} not in graph")
    ycl = cfg.clock == "Y"
    if ycl and timescale is None:
        raise SimulationError("a Y-clock simulation needs a time scale")
    trial_ids = np.asarray(trial_ids, dtype=np.uint64)
    B, n = len(trial_ids), g.vertex_count
    nbr, eid = _tables(g)
    nbr_safe = np.where(nbr >= 0, nbr, 0)
    L = np.zeros((B, n))
    S = np.zeros((B, n)) if ycl else None
    clock = np.zeros(B)
    cur = np.full(B, cfg.start, dtype=np.int64)
    active = np.arange(B)
    cols_t: list[np.ndarray] = []
    cols_j: list[np.ndarray] = []
    overflow = np.zeros(B, dtype=bool)
    horizon = float(cfg.horizon)
    k = 0
    while active.size:
        c = cur[active]
        nb = nbr_safe[c]
        mask = nbr[c] >= 0
        x = L[active[:, None], nb]
        r = np.where(mask, F.rate_array(eid[c], x), 0.0)
        cum = np.cumsum(r, axis=1)
        total = cum[:, -1]
        tid = trial_ids[active]
        hold = rng.exponential(cfg.seed, tid, 2 * k, total)
        u = rng.uniform(cfg.seed, tid, 2 * k + 1)
        rows = active
        lc = L[rows, c]
        if ycl:
            lnew = lc + hold
            snew = _h_by_vertex(timescale, c, lnew)
            tnew = clock[rows] + (snew - S[rows, c])
        else:
            tnew = clock[rows] + hold
        jump = tnew <= horizon
        # trials that stop inside this holding interval
        stop = rows[~jump]
        if ycl:
            S[stop, cur[stop]] += horizon - clock[stop]
        else:
            L[stop, cur[stop]] += horizon - clock[stop]
        clock[stop] = horizon
        # trials that jump
        go = rows[jump]
        if k >= cfg.max_jumps:
            overflow[go] = True
            break
        choice = (cum[jump] <= (u[jump] * total[jump])[:, None]).sum(axis=1)
        choice = np.minimum(choice, mask[jump].sum(axis=1) - 1)
        dest = nbr[cur[go], choice]
        if ycl:
            L[go, cur[go]] = lnew[jump]
            S[go, cur[go]] = snew[jump]
        else:
            L[go, cur[go]] += hold[jump]
        clock[go] = tnew[jump]
        cur[go] = dest
        col_t = np.full(B, np.inf)
        col_j = np.full(B, -1, dtype=np.int64)
        col_t[go] = tnew[jump]
        col_j[go] = dest
        cols_t.append(col_t)
        cols_j.append(col_j)
        active = go
        k += 1
    if cols_t:
        times = np.stack(cols_t, axis=1)
        targets = np.stack(cols_j, axis=1)
    else:
        times = np.full((B, 0), np.inf)
        targets = np.full((B, 0), -1, dtype=np.int64)
    njumps = (targets >= 0).sum(axis=1)
    return TrajectoryBatch(cfg.start, horizon, cfg.clock, trial_ids, targets, times, njumps, overflow)


def simulate(g: Graph, F: RateFamily, cfg: SimConfig, trial: int = 0,
             timescale: TimeScale | None = None) -> Trajectory:
    """One trajectory, identical to trial ``trial`` of any batch with the same seed."""
    batch = run_kernel(g, F, cfg, np.array([trial]), timescale)
    if batch.overflow[0]:
        raise SimulationError(f"trajectory exceeded max_jumps={cfg.max_jumps}")
    return batch.trajectory(0)


def simulate_many(g: Graph, F: RateFamily, cfg: SimConfig, trials: int,
                  timescale: TimeScale | None = None, first_trial: int = 0) -> list[Trajectory]:
    out = []
    for lo in range(first_trial, first_trial + trials, CHUNK):
        ids = np.arange(lo, min(lo + CHUNK, first_trial + trials))
        batch = run_kernel(g, F, cfg, ids, timescale)
        if batch.overflow.any():
            bad = int(batch.trial_ids[np.argmax(batch.overflow)])
            raise SimulationError(f"trial {bad} exceeded max_jumps={cfg.max_jumps}")
        out.extend(batch.trajectory(b) for b in range(len(batch)))
    return out


# --------------------------------------------------------------------------
# events


@dataclass(frozen=True)
class SkeletonEvent:
    """Exactly ``len(path) - 1`` jumps along ``path``, jump ``k`` inside ``bins[k]``.

    ``bins=None`` accepts any jump times within the horizon.
    """

    path: tuple[int, ...]
    bins: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(int(v) for v in self.path))
        if not self.path:
            raise ValueError("event path must contain the start vertex")
        if self.bins is not None:
            bins = tuple((float(a), float(b)) for a, b in self.bins)
            if len(bins) != len(self.path) - 1:
                raise ValueError(f"{len(self.path) - 1} jumps need as many bins, got {len(bins)}")
            for a, b in bins:
                if not b > a:
                    raise ValueError(f"empty bin [{a}, {b}]")
            object.__setattr__(self, "bins", bins)

    def matches(self, batch: TrajectoryBatch) -> np.ndarray:
        n = len(self.path) - 1
        if batch.start != self.path[0]:
            return np.zeros(len(batch), dtype=bool)
        ok = batch.njumps == n
        for k in range(n):
            if k >= batch.targets.shape[1]:
                return np.zeros(len(batch), dtype=bool)
            ok &= batch.targets[:, k] == self.path[k + 1]
            if self.bins is not None:
                a, b = self.bins[k]
                t = batch.times[:, k]
                ok &= (t >= a) & (t <= b)
        return ok

    def to_dict(self) -> dict:
        return {"path": list(self.path), "bins": [list(b) for b in self.bins] if self.bins else None}


@dataclass(frozen=True)
class StringEvent:
    """States ``(xi_0, ..., xi_l)`` observed at times ``0, h, ..., l h``."""

    states: tuple[int, ...]
    h: float

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(int(v) for v in self.states))
        if not self.states:
            raise ValueError("string must be nonempty")
        if not self.h > 0:
            raise ValueError("grid step must be positive")

    @property
    def span(self) -> float:
        return (len(self.states) - 1) * self.h

    def matches(self, batch: TrajectoryBatch) -> np.ndarray:
        if self.span > batch.horizon * (1 + 1e-12):
            raise ValueError(f"string spans {self.span} beyond horizon {batch.horizon}")
        ok = np.full(len(batch), batch.start == self.states[0])
        for m, v in enumerate(self.states[1:], 1):
            ok &= batch.states_at(m * self.h) == v
        return ok

    def to_dict(self) -> dict:
        return {"states": list(self.states), "h": self.h}


def _count_chunk(g, F, cfg, timescale, events, lo, hi) -> np.ndarray:
    batch = run_kernel(g, F, cfg, np.arange(lo, hi), timescale)
    if batch.overflow.any():
        bad = int(batch.trial_ids[np.argmax(batch.overflow)])
        raise SimulationError(f"trial {bad} exceeded max_jumps={cfg.max_jumps}")
    return np.array([int(ev.matches(batch).sum()) for ev in events], dtype=np.int64)


def event_counts(g: Graph, F: RateFamily, cfg: SimConfig, events: Sequence, trials: int,
                 timescale: TimeScale | None = None, workers: int = 1,
                 chunk: int = CHUNK) -> np.ndarray:
    """Hit counts of each event over trials ``0..trials-1``.

    The integer sum over chunks is independent of chunking and worker count.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    bounds = [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _count_chunk(g, F, cfg, timescale, events, *b), bounds))
    else:
        parts = [_count_chunk(g, F, cfg, timescale, events, *b) for b in bounds]
    return np.sum(parts, axis=0)


def mc_event_probabilities(g: Graph, F: RateFamily, cfg: SimConfig, events: Sequence, trials: int,
                           timescale: TimeScale | None = None, workers: int = 1) -> list[McEstimate]:
    counts = event_counts(g, F, cfg, events, trials, timescale, workers)
    return [McEstimate.from_counts(int(c), trials) for c in counts]


def mc_event_probability(g: Graph, F: RateFamily, cfg: SimConfig, event, trials: int,
                         timescale: TimeScale | None = None, workers: int = 1) -> McEstimate:
    return mc_event_probabilities(g, F, cfg, [event], trials, timescale, workers)[0]


def first_holding_times(g: Graph, F: RateFamily, cfg: SimConfig, trials: int) -> np.ndarray:
    """First holding time of each trial; trials with no jump before the horizon are dropped."""
    out = []
    for lo in range(0, trials, CHUNK):
        batch = run_kernel(g, F, cfg, np.arange(lo, min(lo + CHUNK, trials)))
        if batch.times.shape[1]:
            t = batch.times[:, 0]
            out.append(t[np.isfinite(t)])
    return np.concatenate(out) if out else np.empty(0)


__all__ = [
    "SimConfig", "McEstimate", "TrajectoryBatch", "SkeletonEvent", "StringEvent",
    "SimulationError", "TrajectoryError", "run_kernel", "simulate", "simulate_many",
    "event_counts", "mc_event_probability", "mc_event_probabilities", "first_holding_times",
]
