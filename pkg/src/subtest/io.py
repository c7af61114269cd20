"""JSON encoding of instances, properties and mass functions."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from .core import EdgeDistribution, to_number
from .generators import TestInstance
from .graphs import Graph, norm_edge
from .testers import PropertySpec

FORMAT_VERSION = 1


def encode_number(x) -> Any:
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else x.numerator
    return x


def to_jsonable(obj) -> Any:
    """Recursively turn Fractions into ``"num/den"`` strings and sets into sorted lists."""
    if isinstance(obj, Fraction):
        return encode_number(obj)
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return sorted((to_jsonable(v) for v in obj), key=repr)
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def property_to_json(prop: PropertySpec) -> dict:
    out = {"kind": prop.kind, "name": prop.name}
    if prop.H is not None:
        out["H"] = [list(e) for e in prop.H.edges]
    return out


def property_from_json(data) -> PropertySpec:
    if isinstance(data, str):
        return parse_property(data)
    H = Graph.from_edges([tuple(e) for e in data["H"]]) if data.get("H") else None
    return PropertySpec(data["kind"], H)


def parse_property(name: str) -> PropertySpec:
    """``bip``, ``clique``, ``free:triangle``, ``free:square`` or ``hom:<edges json>``."""
    fixed = {"bip": PropertySpec.bipartite, "clique": PropertySpec.clique,
             "free:triangle": PropertySpec.triangle_free, "free:square": PropertySpec.square_free}
    if name in fixed:
        return fixed[name]()
    kind, _, rest = name.partition(":")
    if kind in ("hom", "free") and rest:
        return PropertySpec(kind, Graph.from_edges([tuple(e) for e in json.loads(rest)]))
    raise ValueError(f"unknown property {name!r}")


def instance_to_json(inst: TestInstance) -> dict:
    """Edges are the union of the mu-support and E, listed with weight and label."""
    edges = sorted(set(inst.mu.support()) | set(inst.edges))
    weights = inst.mu.weights
    return {
        "format": FORMAT_VERSION,
        "n": inst.n,
        "edges": [list(e) for e in edges],
        "weights": [encode_number(weights.get(e, Fraction(0))) for e in edges],
        "labels": [inst.label(e) for e in edges],
        "meta": {
            "ground_truth": inst.ground_truth,
            "certified_distance": encode_number(inst.certified_distance),
            "property": property_to_json(inst.property),
            "provenance": to_jsonable(dict(inst.provenance)),
        },
    }


def instance_from_json(data: Mapping) -> TestInstance:
    n = int(data["n"])
    edges = [norm_edge(*e) for e in data["edges"]]
    weights = [to_number(w) for w in data["weights"]]
    labels = data.get("labels") or [1] * len(edges)
    if not len(edges) == len(weights) == len(labels):
        raise ValueError("edges, weights and labels must have equal length")
    meta = data.get("meta", {})
    mu = EdgeDistribution(n, {e: w for e, w in zip(edges, weights) if w != 0})
    E = frozenset(e for e, lab in zip(edges, labels) if lab)
    cert = meta.get("certified_distance")
    prop = property_from_json(meta.get("property", "bip"))
    return TestInstance(n, E, mu, meta.get("ground_truth", "unknown"),
                        None if cert is None else to_number(cert), prop,
                        dict(meta.get("provenance", {})))


def load_instance(path) -> TestInstance:
    return instance_from_json(json.loads(Path(path).read_text()))


def save_instance(path, inst: TestInstance) -> None:
    write_json(path, instance_to_json(inst))
