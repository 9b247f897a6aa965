"""Graph description files and deterministic table output.

Graph file (JSON)::

    {"vertices": [{"id": 0}],
     "edges": [{"id": 0, "from": 0, "to": 0, "length": 1.0, "a": 0.0, "q": 0.0},
               {"id": 1, "from": 0, "to": null, "length": "inf"}],
     "l0": 0.5, "d0": 3}

``a`` and ``q`` are scalars or lists of values on equal subintervals.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .fields import EdgeFields, FieldError
from .graph import MetricGraph


class GraphFileError(ValueError):
    pass


def _number(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise GraphFileError(f"{what} must be a number, got {x!r}")
    return float(x)


def parse_graph(doc: dict) -> tuple[MetricGraph, EdgeFields]:
    if not isinstance(doc, dict):
        raise GraphFileError("top level must be an object")
    try:
        vertices = [int(v["id"]) for v in doc["vertices"]]
        raw_edges = doc["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFileError(f"missing or malformed vertices/edges: {exc}") from exc
    edges, a, q = [], {}, {}
    for e in raw_edges:
        try:
            eid, src, dst = int(e["id"]), int(e["from"]), e.get("to")
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphFileError(f"malformed edge {e!r}") from exc
        length = e.get("length")
        if (dst is None) != (length == "inf"):
            raise GraphFileError(f"edge {eid}: 'to': null and 'length': 'inf' must co-occur")
        if dst is None:
            edges.append((eid, src, None, math.inf))
        else:
            edges.append((eid, src, int(dst), _number(length, f"edge {eid} length")))
        for key, store in (("a", a), ("q", q)):
            if key in e:
                val = e[key]
                if isinstance(val, list):
                    if not val:
                        raise GraphFileError(f"edge {eid}: empty '{key}' list")
                    store[eid] = [_number(x, f"edge {eid} {key}") for x in val]
                else:
                    store[eid] = _number(val, f"edge {eid} {key}")
    l0 = doc.get("l0")
    d0 = doc.get("d0")
    graph = MetricGraph.build(vertices, edges, l0=None if l0 is None else _number(l0, "l0"),
                              d0=None if d0 is None else int(d0))
    try:
        fields = EdgeFields.from_values(graph, a, q)
    except FieldError as exc:
        raise GraphFileError(str(exc)) from exc
    return graph, fields


def load_graph(path) -> tuple[MetricGraph, EdgeFields]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise GraphFileError(f"cannot read graph file {path}: {exc}") from exc
    return parse_graph(doc)


def graph_document(graph: MetricGraph, fields: Optional[EdgeFields] = None) -> dict:
    edges = []
    for e in graph.edges:
        d = {"id": e.id, "from": e.src, "to": e.dst,
             "length": "inf" if e.external else e.length}
        if fields is not None and fields.has_edge(e.id):
            for key, pc in (("a", fields.a[e.id]), ("q", fields.q[e.id])):
                vals = list(pc.values)
                d[key] = vals[0] if len(vals) == 1 else vals
        edges.append(d)
    doc = {"vertices": [{"id": v} for v in graph.vertices], "edges": edges}
    if graph.l0 is not None:
        doc["l0"] = graph.l0
    if graph.d0 is not None:
        doc["d0"] = graph.d0
    return doc


def save_graph(path, graph: MetricGraph, fields: Optional[EdgeFields] = None):
    path = Path(path)
    path.write_text(json.dumps(graph_document(graph, fields), indent=2) + "\n")
    return path


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _cell(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return "%.17g" % x
    if x is None:
        return ""
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], config: dict, seed: int,
              summary: Optional[Sequence[str]] = None):
    """Header, rows with round-trip floats, optional comment lines, provenance trailer."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])
        for line in summary or ():
            fh.write(f"# {line}\n")
        fh.write(f"# config_sha256={config_hash(config)} seed={seed}\n")
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and data rows, comment lines dropped."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if hasattr(x, "tolist"):
        return x.tolist()
    return str(x)
