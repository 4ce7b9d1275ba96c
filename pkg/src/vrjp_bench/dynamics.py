"""Jump-rate families and per-vertex time scales.

A :class:`RateFamily` gives, for every ordered pair of adjacent vertices
``(i, j)``, the rate ``f_ij(x)`` at which a walker sitting at ``i`` jumps to
``j`` when ``j`` has accumulated local time ``x``. A :class:`TimeScale`
holds one increasing homeomorphism ``h_v`` per vertex together with the
derived objects used by the time-changed densities:

* ``h_prime``  derivative of ``h``
* ``h_inv``    inverse of ``h``
* ``H``        ``s -> h'(h^{-1}(s))``
* ``H_hat``    primitive of ``1/H`` vanishing at 0

Both objects are immutable. The two are kept separate so that any rate
family can be paired with any time scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, optimize

from .graph import Graph, GraphError


class RateError(ValueError):
    pass


class TimeScaleError(ValueError):
    pass


RATE_KINDS = ("vrjp", "linear", "constant", "power", "tabulated")


def _per_edge(g: Graph, value, name: str) -> np.ndarray:
    """Expand a scalar or an ``{(i, j): v}`` mapping to an ordered-edge array."""
    if isinstance(value, Mapping):
        out = np.empty(len(g.ordered_edges))
        for k, (i, j) in enumerate(g.ordered_edges):
            if (i, j) not in value:
                raise RateError(f"{name} missing for ordered edge {(i, j)}")
            out[k] = float(value[(i, j)])
        extra = set(value) - set(g.ordered_edges)
        if extra:
            raise RateError(f"{name} given for non-adjacent pairs {sorted(extra)}")
        return out
    return np.full(len(g.ordered_edges), float(value))


class RateFamily:
    """Parametric rates ``f_ij`` defined on the ordered edges of a graph.

    Use the classmethod constructors; parameters are stored as arrays aligned
    with ``graph.ordered_edges``.

    ============  ======================================
    kind          rate ``f_ij(x)``
    ============  ======================================
    vrjp          ``W_ij * (1 + x)``, ``W`` symmetric
    linear        ``W_ij * x + D_ij``
    constant      ``c_ij``
    power         ``scale_ij * (1 + x ** exponent_ij)``
    tabulated     piecewise-linear interpolation of a table,
                  held constant past the last grid point
    ============  ======================================
    """

    def __init__(self, graph: Graph, kind: str, params: dict[str, np.ndarray], table=None):
        if kind not in RATE_KINDS:
            raise RateError(f"unknown rate kind {kind!r}")
        self.graph = graph
        self.kind = kind
        self.params = {k: np.asarray(v, dtype=float) for k, v in params.items()}
        for v in self.params.values():
            v.setflags(write=False)
        self._table = table
        self._check_positive()

    # constructors -------------------------------------------------------

    @classmethod
    def vrjp(cls, graph: Graph, weights: Mapping | float | None = None) -> "RateFamily":
        """VRJP rates. ``weights`` is keyed by unordered edge; defaults to graph weights."""
        if weights is None:
            w = {e: graph.weights[e] for e in graph.edges}
        elif isinstance(weights, Mapping):
            w = {}
            for (i, j), val in weights.items():
                key = (min(i, j), max(i, j))
                if key in w and w[key] != float(val):
                    raise RateError(f"vrjp weights must be symmetric; edge {key} got two values")
                w[key] = float(val)
        else:
            w = {e: float(weights) for e in graph.edges}
        arr = np.empty(len(graph.ordered_edges))
        for k, (i, j) in enumerate(graph.ordered_edges):
            key = (min(i, j), max(i, j))
            if key not in w:
                raise RateError(f"vrjp weight missing for edge {key}")
            arr[k] = w[key]
        return cls(graph, "vrjp", {"W": arr})

    @classmethod
    def linear(cls, graph: Graph, slopes, offsets) -> "RateFamily":
        return cls(graph, "linear", {
            "W": _per_edge(graph, slopes, "slope"),
            "D": _per_edge(graph, offsets, "offset"),
        })

    @classmethod
    def constant(cls, graph: Graph, rates) -> "RateFamily":
        return cls(graph, "constant", {"c": _per_edge(graph, rates, "rate")})

    @classmethod
    def power(cls, graph: Graph, scale, exponent) -> "RateFamily":
        return cls(graph, "power", {
            "scale": _per_edge(graph, scale, "scale"),
            "exponent": _per_edge(graph, exponent, "exponent"),
        })

    @classmethod
    def tabulated(cls, graph: Graph, grid: Sequence[float], values) -> "RateFamily":
        """``values`` is either one list shared by all edges or ``{(i, j): list}``."""
        grid_arr = np.asarray(grid, dtype=float)
        if grid_arr.ndim != 1 or len(grid_arr) < 2:
            raise RateError("tabulated grid needs at least two points")
        if grid_arr[0] != 0.0 or np.any(np.diff(grid_arr) <= 0):
            raise RateError("tabulated grid must start at 0 and be strictly increasing")
        table = np.empty((len(graph.ordered_edges), len(grid_arr)))
        for k, pair in enumerate(graph.ordered_edges):
            row = values[pair] if isinstance(values, Mapping) else values
            row = np.asarray(row, dtype=float)
            if row.shape != grid_arr.shape:
                raise RateError(f"table for {pair} has {row.size} values, grid has {grid_arr.size}")
            table[k] = row
        table.setflags(write=False)
        return cls(graph, "tabulated", {"grid": grid_arr}, table=table)

    # evaluation ---------------------------------------------------------

    def _check_positive(self) -> None:
        p = self.params
        if self.kind == "vrjp":
            ok = np.all(p["W"] > 0)
        elif self.kind == "linear":
            ok = np.all(p["W"] >= 0) and np.all(p["D"] > 0)
        elif self.kind == "constant":
            ok = np.all(p["c"] > 0)
        elif self.kind == "power":
            ok = np.all(p["scale"] > 0) and np.all(p["exponent"] >= 0)
        else:
            ok = np.all(self._table > 0)
        if not ok:
            raise RateError(f"{self.kind} parameters do not give strictly positive rates")

    def rate_array(self, edge_index: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Vectorized ``f`` for ordered-edge indices ``edge_index`` at local times ``x``."""
        p = self.params
        if self.kind == "vrjp":
            return p["W"][edge_index] * (1.0 + x)
        if self.kind == "linear":
            return p["W"][edge_index] * x + p["D"][edge_index]
        if self.kind == "constant":
            return p["c"][edge_index] + 0.0 * x
        if self.kind == "power":
            return p["scale"][edge_index] * (1.0 + x ** p["exponent"][edge_index])
        edge_index = np.asarray(edge_index)
        x = np.asarray(x, dtype=float)
        edge_index, x = np.broadcast_arrays(edge_index, x)
        out = np.empty(x.shape)
        grid = p["grid"]
        for k in np.unique(edge_index):
            m = edge_index == k
            out[m] = np.interp(x[m], grid, self._table[k])
        return out

    def rate(self, i: int, j: int, x: float) -> float:
        if not self.graph.adjacent(i, j):
            raise RateError(f"no rate for non-adjacent pair {(i, j)}")
        if x < 0:
            raise RateError(f"local time must be nonnegative, got {x}")
        value = float(self.rate_array(np.array(self.graph.ordered_index(i, j)), np.array(float(x))))
        if not value > 0:
            raise RateError(f"rate f_{i},{j}({x}) = {value} is not positive")
        return value

    def to_json(self) -> dict:
        g = self.graph
        if self.kind == "vrjp":
            return {"kind": "vrjp", "weights": [
                [i, j, float(self.params["W"][g.ordered_index(i, j)])] for i, j in g.edges]}
        if self.kind == "tabulated":
            return {"kind": "tabulated", "grid": self.params["grid"].tolist(),
                    "values": [[i, j, self._table[k].tolist()]
                               for k, (i, j) in enumerate(g.ordered_edges)]}
        names = {"linear": ("W", "D"), "constant": ("c",), "power": ("scale", "exponent")}[self.kind]
        return {"kind": self.kind, "edges": [
            [i, j] + [float(self.params[n][k]) for n in names]
            for k, (i, j) in enumerate(g.ordered_edges)]}


def rate_eval(F: RateFamily, i: int, j: int, x: float) -> float:
    return F.rate(i, j, x)


# --------------------------------------------------------------------------
# time scales

_WHICH = ("h", "h_prime", "h_inv", "H", "H_hat")

BISECT_XTOL = 1e-12
QUAD_RTOL = 1e-10


class VertexScale:
    """One vertex's time-scale homeomorphism. Subclasses supply the calculus."""

    vectorized = False

    def h(self, x):
        raise NotImplementedError

    def h_prime(self, x):
        raise NotImplementedError

    def h_inv(self, s):
        raise NotImplementedError

    def H(self, s):
        return self.h_prime(self.h_inv(s))

    def H_hat(self, s):
        raise NotImplementedError

    def h_array(self, x: np.ndarray) -> np.ndarray:
        if self.vectorized:
            return self.h(x)
        return np.array([self.h(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))


@dataclass(frozen=True)
class QuadraticScale(VertexScale):
    """``h(x) = a x^2 + b x`` with ``a >= 0``, ``b > 0``.

    ``(a, b) = (1, 2)`` is the VRJP scale, ``(0, 1)`` the identity.
    Here ``H(s)^2 = b^2 + 4 a s`` is affine in ``s``.
    """

    a: float
    b: float
    vectorized = True

    def __post_init__(self):
        if not (self.a >= 0 and self.b > 0):
            raise TimeScaleError(f"quadratic scale needs a >= 0 and b > 0, got a={self.a}, b={self.b}")

    def h(self, x):
        return (self.a * x + self.b) * x

    def h_prime(self, x):
        return 2.0 * self.a * x + self.b

    def h_inv(self, s):
        if self.a == 0:
            return s / self.b
        # stable root of a x^2 + b x - s = 0
        return 2.0 * s / (self.b + np.sqrt(self.b * self.b + 4.0 * self.a * s))

    def H(self, s):
        return np.sqrt(self.b * self.b + 4.0 * self.a * s)

    def H_hat(self, s):
        if self.a == 0:
            return s / self.b
        return 2.0 * s / (self.b + np.sqrt(self.b * self.b + 4.0 * self.a * s))


class VrjpScale(QuadraticScale):
    """``h(x) = x^2 + 2x``; ``H(s) = 2 sqrt(s + 1)``, ``H_hat(s) = sqrt(s + 1) - 1``."""

    def __init__(self):
        super().__init__(1.0, 2.0)

    def H(self, s):
        return 2.0 * np.sqrt(s + 1.0)

    def h_inv(self, s):
        return s / (np.sqrt(s + 1.0) + 1.0)

    H_hat = h_inv


class IdentityScale(QuadraticScale):
    def __init__(self):
        super().__init__(0.0, 1.0)

    def h(self, x):
        return x + 0.0

    def h_inv(self, s):
        return s + 0.0

    def H(self, s):
        return 1.0 + 0.0 * s

    H_hat = h_inv


def _invert_increasing(h: Callable[[float], float], s: float) -> float:
    if s < 0:
        raise TimeScaleError(f"h_inv undefined at negative argument {s}")
    if s == 0:
        return 0.0
    hi = 1.0
    while h(hi) < s:
        hi *= 2.0
        if hi > 1e300:
            raise TimeScaleError(f"could not bracket h^-1({s})")
    try:
        root, info = optimize.brentq(lambda x: h(x) - s, 0.0, hi, xtol=BISECT_XTOL,
                                     rtol=4 * np.finfo(float).eps, full_output=True)
    except (ValueError, RuntimeError) as exc:
        raise TimeScaleError(f"h^-1({s}) did not converge: {exc}") from exc
    if not info.converged:
        raise TimeScaleError(f"h^-1({s}) did not converge")
    return root


def _quad_inverse_H(scale: VertexScale, s: float) -> float:
    if s < 0:
        raise TimeScaleError(f"H_hat undefined at negative argument {s}")
    if s == 0:
        return 0.0
    value, err = integrate.quad(lambda u: 1.0 / scale.H(u), 0.0, s,
                                epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    if not np.isfinite(value) or err > max(1e-8 * abs(value), 1e-12):
        raise TimeScaleError(f"H_hat({s}) quadrature did not converge (err={err})")
    return value


class GenericScale(VertexScale):
    """User-supplied closed forms. ``H_hat`` falls back to quadrature when omitted."""

    def __init__(self, h, h_prime, h_inv, H_hat=None, vectorized=False):
        self._h, self._hp, self._hi, self._hh = h, h_prime, h_inv, H_hat
        self.vectorized = vectorized

    def h(self, x):
        return self._h(x)

    def h_prime(self, x):
        return self._hp(x)

    def h_inv(self, s):
        return self._hi(s)

    def H_hat(self, s):
        if self._hh is not None:
            return self._hh(s)
        return _quad_inverse_H(self, float(s))


class NumericScale(VertexScale):
    """Only ``h`` is known; everything else is computed numerically.

    ``h_inv`` by bracketed root finding to ``1e-12``, ``h_prime`` by central
    differences (second-order one-sided near 0), ``H_hat`` by adaptive
    quadrature of ``1/H`` to relative ``1e-10``.
    """

    def __init__(self, h, vectorized=False):
        self._h = h
        self.vectorized = vectorized

    def h(self, x):
        return self._h(x)

    def h_prime(self, x):
        x = float(x)
        d = 1e-5 * max(1.0, abs(x))
        if x >= d:
            return (self._h(x + d) - self._h(x - d)) / (2 * d)
        return (-3 * self._h(x) + 4 * self._h(x + d) - self._h(x + 2 * d)) / (2 * d)

    def h_inv(self, s):
        return _invert_increasing(self._h, float(s))

    def H_hat(self, s):
        return _quad_inverse_H(self, float(s))


class TimeScale:
    """Per-vertex time scales; ``D(t) = sum_v h_v(l_v(t))``."""

    def __init__(self, kind: str, scales: Sequence[VertexScale]):
        self.kind = kind
        self.scales = tuple(scales)

    def __len__(self):
        return len(self.scales)

    def __getitem__(self, v: int) -> VertexScale:
        return self.scales[v]

    @classmethod
    def vrjp(cls, n: int) -> "TimeScale":
        return cls("vrjp", [VrjpScale()] * n)

    @classmethod
    def identity(cls, n: int) -> "TimeScale":
        return cls("identity", [IdentityScale()] * n)

    @classmethod
    def quadratic(cls, a: Sequence[float], b: Sequence[float]) -> "TimeScale":
        if len(a) != len(b):
            raise TimeScaleError("quadratic scale needs one (a, b) per vertex")
        return cls("quadratic", [QuadraticScale(float(x), float(y)) for x, y in zip(a, b)])

    @classmethod
    def generic(cls, n: int, h, h_prime, h_inv, H_hat=None, vectorized=False) -> "TimeScale":
        return cls("generic", [GenericScale(h, h_prime, h_inv, H_hat, vectorized)] * n)

    @classmethod
    def numeric(cls, n: int, h, vectorized=False) -> "TimeScale":
        return cls("numeric", [NumericScale(h, vectorized)] * n)

    def eval(self, v: int, which: str, x: float) -> float:
        if which not in _WHICH:
            raise TimeScaleError(f"unknown time-scale quantity {which!r}")
        if not 0 <= v < len(self.scales):
            raise TimeScaleError(f"vertex {v} out of range")
        if not x >= 0:
            raise TimeScaleError(f"{which} evaluated outside the domain at {x}")
        return float(getattr(self.scales[v], which)(x))

    def D(self, local_times: Mapping[int, float] | Sequence[float]) -> float:
        items = local_times.items() if isinstance(local_times, Mapping) else enumerate(local_times)
        return math.fsum(float(self.scales[v].h(x)) for v, x in items)

    def to_json(self) -> dict:
        if self.kind in ("vrjp", "identity"):
            return {"kind": self.kind}
        if self.kind == "quadratic":
            return {"kind": "quadratic", "a": [s.a for s in self.scales], "b": [s.b for s in self.scales]}
        raise TimeScaleError(f"{self.kind} time scales carry Python callables and cannot be serialized")


def timescale_eval(T: TimeScale, v: int, which: str, x: float) -> float:
    return T.eval(v, which, x)


def check_compatible(graph: Graph, F: RateFamily, T: TimeScale | None = None) -> None:
    if F.graph is not graph and F.graph != graph:
        raise GraphError("rate family was built for a different graph")
    if T is not None and len(T) != graph.vertex_count:
        raise TimeScaleError(f"time scale has {len(T)} vertices, graph has {graph.vertex_count}")
