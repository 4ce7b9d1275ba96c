"""JSON configuration: graphs, rate families, time scales and experiments."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .dynamics import NumericScale, RateError, RateFamily, TimeScale, TimeScaleError
from .graph import Graph, GraphError

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _schema() -> dict:
    text = resources.files("vrjp_bench").joinpath("schema/experiment.schema.json").read_text()
    return json.loads(text)


def graph_from_json(obj: dict) -> Graph:
    try:
        return Graph.from_edges(int(obj["vertices"]), [tuple(e) for e in obj["edges"]])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed graph: {exc}") from exc


def _ordered_map(g: Graph, default, rows, width: int, name: str) -> dict:
    """Scalar default per ordered edge, overridden by ``[i, j, v1, ...]`` rows."""
    out = {}
    if default is not None:
        out = {p: default for p in g.ordered_edges}
    for row in rows or []:
        if len(row) != 2 + width:
            raise ConfigError(f"{name} row {row} should have {2 + width} entries")
        i, j = int(row[0]), int(row[1])
        if not g.adjacent(i, j):
            raise ConfigError(f"{name} given for non-adjacent pair {(i, j)}")
        out[(i, j)] = tuple(row[2:]) if width > 1 else row[2]
    missing = [p for p in g.ordered_edges if p not in out]
    if missing:
        raise ConfigError(f"{name} missing for ordered edges {missing}")
    return out


def rates_from_json(obj: dict, g: Graph) -> RateFamily:
    kind = obj.get("kind")
    if kind == "vrjp":
        if "weights" in obj:
            w = {}
            for row in obj["weights"]:
                i, j, val = int(row[0]), int(row[1]), float(row[2])
                w[(i, j)] = val
            return RateFamily.vrjp(g, w)
        return RateFamily.vrjp(g, obj.get("weight"))
    if kind == "linear":
        default = (obj["slope"], obj["offset"]) if "slope" in obj and "offset" in obj else None
        m = _ordered_map(g, default, obj.get("edges"), 2, "linear rate")
        return RateFamily.linear(g, {p: v[0] for p, v in m.items()}, {p: v[1] for p, v in m.items()})
    if kind == "constant":
        return RateFamily.constant(g, _ordered_map(g, obj.get("c"), obj.get("edges"), 1, "constant rate"))
    if kind == "power":
        default = (obj["scale"], obj["exponent"]) if "scale" in obj and "exponent" in obj else None
        m = _ordered_map(g, default, obj.get("edges"), 2, "power rate")
        return RateFamily.power(g, {p: v[0] for p, v in m.items()}, {p: v[1] for p, v in m.items()})
    if kind == "tabulated":
        values = obj.get("values")
        if values and isinstance(values[0], list) and len(values[0]) == 3 and isinstance(values[0][2], list):
            values = _ordered_map(g, None, values, 1, "tabulated rate")
        return RateFamily.tabulated(g, obj["grid"], values)
    raise ConfigError(f"unknown rate kind {kind!r}")


def _per_vertex(value, n: int, name: str) -> list[float]:
    if isinstance(value, list):
        if len(value) != n:
            raise ConfigError(f"{name} needs {n} entries, got {len(value)}")
        return [float(v) for v in value]
    return [float(value)] * n


def timescale_from_json(obj: dict | None, n: int) -> TimeScale:
    if obj is None:
        return TimeScale.vrjp(n)
    kind = obj.get("kind")
    if kind == "vrjp":
        return TimeScale.vrjp(n)
    if kind == "identity":
        return TimeScale.identity(n)
    if kind == "quadratic":
        return TimeScale.quadratic(_per_vertex(obj.get("a", 1.0), n, "a"), _per_vertex(obj.get("b", 2.0), n, "b"))
    if kind == "numeric":
        inner = timescale_from_json(obj.get("h", {"kind": "vrjp"}), n)
        return TimeScale("numeric", [_numeric_from(s) for s in inner.scales])
    raise ConfigError(f"unknown time-scale kind {kind!r}")


def _numeric_from(scale):
    return NumericScale(scale.h, vectorized=scale.vectorized)


@dataclass
class Model:
    graph: Graph
    rates: RateFamily
    timescale: TimeScale

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "graph": self.graph.to_json(),
            "rates": self.rates.to_json(),
            "timescale": self.timescale.to_json(),
        }


def validate(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def load_config(path: str | Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    validate(cfg)
    return cfg


def model_from_config(cfg: dict) -> Model:
    try:
        g = graph_from_json(cfg["graph"])
        F = rates_from_json(cfg["rates"], g)
        T = timescale_from_json(cfg.get("timescale"), g.vertex_count)
    except (GraphError, RateError, TimeScaleError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return Model(g, F, T)
