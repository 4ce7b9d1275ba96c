"""Piecewise-constant trajectories and the operations on them.

A trajectory is stored as its skeleton ``(i_0, ..., i_n)`` plus one holding
time per visit. Visit ``k`` lasts ``holds[k]``; the last visit runs up to the
horizon. Jump times are the running sums of the holds. Keeping holds as the
primary data means that rearranging visits moves the exact same numbers
around, so per-vertex local times survive a rearrangement bit for bit.

Times may be floats or :class:`fractions.Fraction` (exact fixtures).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import accumulate
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .dynamics import TimeScale
from .graph import Graph

MAX_JUMPS = 10 ** 7
CLOCKS = ("X", "Y")


class TrajectoryError(ValueError):
    pass


def _exact_sum(values: Iterable) -> float | Fraction:
    values = list(values)
    if values and all(isinstance(v, (Fraction, int)) for v in values):
        return sum(values, Fraction(0))
    return math.fsum(values)


@dataclass(frozen=True)
class Trajectory:
    start: int
    targets: tuple[int, ...]
    holds: tuple
    clock: str = "X"

    def __post_init__(self):
        if self.clock not in CLOCKS:
            raise TrajectoryError(f"clock must be 'X' or 'Y', got {self.clock!r}")
        if len(self.holds) != len(self.targets) + 1:
            raise TrajectoryError("need exactly one holding time per visit")
        if len(self.targets) > MAX_JUMPS:
            raise TrajectoryError(f"more than {MAX_JUMPS} jumps")
        prev = self.start
        for k, j in enumerate(self.targets):
            if j == prev:
                raise TrajectoryError(f"self-jump at vertex {j} (jump {k})")
            prev = j
        for k, hold in enumerate(self.holds[:-1]):
            if not hold > 0:
                raise TrajectoryError(f"holding time {k} is not positive: {hold}")
        if not self.holds[-1] >= 0:
            raise TrajectoryError(f"final holding time is negative: {self.holds[-1]}")

    # construction -------------------------------------------------------

    @classmethod
    def from_jumps(cls, start: int, jumps: Sequence[tuple[int, float]], horizon, clock: str = "X"):
        """Build from ``[(target, time), ...]`` with strictly increasing times in ``(0, horizon]``."""
        times = [t for _, t in jumps]
        prev = 0
        holds = []
        for t in times:
            if not t > prev:
                raise TrajectoryError(f"jump times must be strictly increasing and positive: {times}")
            holds.append(t - prev)
            prev = t
        if horizon < prev:
            raise TrajectoryError(f"horizon {horizon} precedes last jump time {prev}")
        holds.append(horizon - prev)
        return cls(int(start), tuple(int(j) for j, _ in jumps), tuple(holds), clock)

    @classmethod
    def from_visits(cls, visits: Sequence[tuple[int, float]], clock: str = "X"):
        """Build from ``[(vertex, hold), ...]``."""
        if not visits:
            raise TrajectoryError("a trajectory has at least one visit")
        return cls(int(visits[0][0]), tuple(int(v) for v, _ in visits[1:]),
                   tuple(h for _, h in visits), clock)

    # derived quantities -------------------------------------------------

    @property
    def n_jumps(self) -> int:
        return len(self.targets)

    @property
    def skeleton(self) -> tuple[int, ...]:
        return (self.start,) + self.targets

    @property
    def visits(self) -> list[tuple[int, object]]:
        return list(zip(self.skeleton, self.holds))

    @property
    def times(self) -> tuple:
        """Jump times ``t_1 < ... < t_n``."""
        return tuple(accumulate(self.holds[:-1]))

    @property
    def jumps(self) -> list[tuple[int, object]]:
        return list(zip(self.targets, self.times))

    @property
    def horizon(self):
        return _exact_sum(self.holds)

    @property
    def end(self) -> int:
        return self.targets[-1] if self.targets else self.start

    def final_local_times(self) -> dict[int, object]:
        per: dict[int, list] = {}
        for v, hold in zip(self.skeleton, self.holds):
            per.setdefault(v, []).append(hold)
        return {v: _exact_sum(hs) for v, hs in sorted(per.items())}

    def check_on(self, g: Graph) -> None:
        """Raise unless every step of the skeleton is an edge of ``g``."""
        sk = self.skeleton
        for v in sk:
            if not 0 <= v < g.vertex_count:
                raise TrajectoryError(f"vertex {v} not in graph")
        for a, b in zip(sk, sk[1:]):
            if not g.adjacent(a, b):
                raise TrajectoryError(f"jump {a}->{b} is not along an edge")

    def state_at(self, t) -> int:
        """Right-continuous state at time ``t``."""
        if t < 0 or t > self.horizon:
            raise TrajectoryError(f"time {t} outside [0, {self.horizon}]")
        state = self.start
        for j, tk in zip(self.targets, self.times):
            if tk <= t:
                state = j
            else:
                break
        return state

    def with_clock(self, clock: str) -> "Trajectory":
        return Trajectory(self.start, self.targets, self.holds, clock)

    # serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "start": self.start,
            "jumps": [[j, float(t)] for j, t in self.jumps],
            "horizon": float(self.horizon),
            "clock": self.clock,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Trajectory":
        try:
            return cls.from_jumps(int(obj["start"]), [(int(j), float(t)) for j, t in obj["jumps"]],
                                  float(obj["horizon"]), obj.get("clock", "X"))
        except (KeyError, TypeError) as exc:
            raise TrajectoryError(f"malformed trajectory record: {exc}") from exc


def write_jsonl(trajectories: Iterable[Trajectory], fh: IO[str]) -> None:
    for tr in trajectories:
        fh.write(json.dumps(tr.to_json()) + "\n")


def read_jsonl(fh: IO[str]) -> Iterator[Trajectory]:
    for lineno, line in enumerate(fh, 1):
        if line.strip():
            try:
                yield Trajectory.from_json(json.loads(line))
            except json.JSONDecodeError as exc:
                raise TrajectoryError(f"line {lineno}: {exc}") from exc


def local_times(tr: Trajectory, t=None) -> dict[int, object]:
    """Occupation time of each visited vertex up to ``t`` (default: horizon)."""
    horizon = tr.horizon
    if t is None or t == horizon:
        return tr.final_local_times()
    if t < 0 or t > horizon:
        raise TrajectoryError(f"time {t} outside [0, {horizon}]")
    out = {v: 0 * hold for v, hold in zip(tr.skeleton, tr.holds)}
    clock = 0
    for v, hold in zip(tr.skeleton, tr.holds):
        if clock + hold >= t:
            out[v] += t - clock
            break
        out[v] += hold
        clock += hold
    return dict(sorted(out.items()))


def transition_counts(tr: Trajectory | Sequence[int]) -> Counter:
    sk = tr.skeleton if isinstance(tr, Trajectory) else tuple(tr)
    return Counter(zip(sk, sk[1:]))


def is_equivalent(a: Trajectory, b: Trajectory, tol: float = 1e-9) -> bool:
    """Same start, same transition counts, same horizon and final local times (within ``tol``)."""
    if a.clock != b.clock:
        raise TrajectoryError(f"cannot compare clocks {a.clock} and {b.clock}")
    if a.start != b.start or transition_counts(a) != transition_counts(b):
        return False
    if abs(a.horizon - b.horizon) > tol:
        return False
    la, lb = a.final_local_times(), b.final_local_times()
    return all(abs(la.get(v, 0) - lb.get(v, 0)) <= tol for v in set(la) | set(lb))


# --------------------------------------------------------------------------
# equivalence-preserving rearrangements


def blocks_at(tr: Trajectory, v: int) -> tuple[list, list[list]]:
    """Split the visit list at each visit to ``v``.

    Returns ``(prefix, blocks)``: ``prefix`` holds the visits before the
    first visit to ``v``; each block starts at a visit to ``v`` and runs up
    to the next one (the last block runs to the end).
    """
    visits = tr.visits
    cuts = [k for k, (u, _) in enumerate(visits) if u == v]
    if not cuts:
        return visits, []
    bounds = cuts + [len(visits)]
    return visits[:cuts[0]], [visits[a:b] for a, b in zip(bounds, bounds[1:])]


def reorder_blocks(tr: Trajectory, v: int, order: Sequence[int]) -> Trajectory:
    """Rearrange the blocks at ``v`` into ``order`` (a permutation of block indices).

    Every block except the last is followed by a visit to ``v``, so any
    reordering keeps the transition counts provided the block placed last
    ends at the same vertex as the original last block.
    """
    prefix, blocks = blocks_at(tr, v)
    if sorted(order) != list(range(len(blocks))):
        raise TrajectoryError(f"order {list(order)} is not a permutation of {len(blocks)} blocks")
    if blocks and blocks[order[-1]][-1][0] != blocks[-1][-1][0]:
        raise TrajectoryError("the block placed last must end where the trajectory ends")
    visits = list(prefix)
    for k in order:
        visits.extend(blocks[k])
    return Trajectory.from_visits(visits, tr.clock)


def _rearrangeable(tr: Trajectory, v: int) -> bool:
    _, blocks = blocks_at(tr, v)
    if len(blocks) >= 3:
        return True
    if len(blocks) == 2:
        return blocks[0][-1][0] == blocks[1][-1][0]
    return False


def excursion_shuffle(tr: Trajectory, rng: np.random.Generator) -> Trajectory:
    """Random equivalent trajectory obtained by permuting the blocks at one vertex.

    A vertex ``v`` is chosen uniformly among those admitting a nontrivial
    rearrangement; the blocks at ``v`` are then permuted uniformly among the
    permutations that keep the trajectory's end vertex. Returns ``tr`` itself
    when no vertex qualifies.
    """
    candidates = [v for v in sorted(set(tr.skeleton)) if _rearrangeable(tr, v)]
    if not candidates:
        return tr
    v = candidates[int(rng.integers(len(candidates)))]
    _, blocks = blocks_at(tr, v)
    end = blocks[-1][-1][0]
    can_close = [k for k, b in enumerate(blocks) if b[-1][0] == end]
    last = can_close[int(rng.integers(len(can_close)))]
    rest = [k for k in range(len(blocks)) if k != last]
    order = [rest[k] for k in rng.permutation(len(rest))] + [last]
    return reorder_blocks(tr, v, order)


# --------------------------------------------------------------------------
# clocks


def time_change(tr: Trajectory, T: TimeScale, direction: str = "X->Y") -> Trajectory:
    """Map between the raw clock and ``D(t) = sum_v h_v(l_v(t))``.

    X->Y: each visit of length ``tau`` at ``v`` with prior local time ``l``
    becomes a visit of length ``h_v(l + tau) - h_v(l)``. Y->X inverts it with
    ``h_v^{-1}``.
    """
    direction = direction.replace("→", "->").replace(" ", "")
    if direction not in ("X->Y", "Y->X"):
        raise TrajectoryError(f"direction must be 'X->Y' or 'Y->X', got {direction!r}")
    source, dest = direction.split("->")
    if tr.clock != source:
        raise TrajectoryError(f"trajectory is on clock {tr.clock}, expected {source}")
    fn = "h" if source == "X" else "h_inv"
    acc: dict[int, object] = {}
    mapped: dict[int, float] = {}
    visits = []
    for k, (v, hold) in enumerate(tr.visits):
        before = acc.get(v, 0.0)
        after = before + hold
        acc[v] = after
        image = float(getattr(T[v], fn)(after))
        new = image - mapped.get(v, 0.0)
        mapped[v] = image
        if k < tr.n_jumps and not new > 0:
            raise TrajectoryError(f"time change produced a non-increasing clock at visit {k}")
        visits.append((v, max(new, 0.0)))
    return Trajectory.from_visits(visits, dest)


def discretize(tr: Trajectory, h: float) -> list[int]:
    """States at ``0, h, 2h, ..., floor(horizon/h) h`` (right-continuous)."""
    if not h > 0:
        raise TrajectoryError(f"grid step must be positive, got {h}")
    steps = math.floor(tr.horizon / h + 1e-9)
    times = tr.times
    out = []
    k = 0
    state = tr.start
    for m in range(steps + 1):
        t = m * h
        while k < len(times) and times[k] <= t:
            state = tr.targets[k]
            k += 1
        out.append(state)
    return out
