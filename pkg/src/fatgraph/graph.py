"""Metric graphs, assumption checks and the interior/exterior split.

A metric graph is a finite combinatorial graph whose edges carry lengths.
External edges have infinite length and only an initial vertex.  Loops are
allowed; a loop contributes two slots to the adjacency of its vertex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence


class GraphError(ValueError):
    pass


class NotValidated(GraphError):
    """Raised when an operation needs a graph satisfying the standing assumptions."""


@dataclass(frozen=True)
class Edge:
    id: int
    src: int
    dst: Optional[int]
    length: float

    @property
    def external(self) -> bool:
        return self.dst is None

    @property
    def is_loop(self) -> bool:
        return self.dst is not None and self.dst == self.src


@dataclass(frozen=True)
class Slot:
    """One end of an edge seen from a vertex.

    ``end`` is 0 for the initial point (x = 0) and 1 for the terminal point
    (x = length).
    """

    edge: int
    end: int


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple[int, ...]
    edges: tuple[Edge, ...]
    l0: Optional[float] = None
    d0: Optional[int] = None
    artificial: frozenset[int] = frozenset()

    @classmethod
    def build(cls, vertices: Iterable[int], edges: Iterable[tuple], l0=None, d0=None,
              artificial: Iterable[int] = ()) -> "MetricGraph":
        """Build from ``(id, src, dst, length)`` tuples; ``dst=None`` marks a lead."""
        es = []
        for e in edges:
            if isinstance(e, Edge):
                es.append(e)
                continue
            eid, src, dst, length = e
            if dst is None:
                length = math.inf
            es.append(Edge(int(eid), int(src), None if dst is None else int(dst), float(length)))
        return cls(tuple(int(v) for v in vertices), tuple(es), l0, d0, frozenset(artificial))

    # -- basic queries -------------------------------------------------
    def edge(self, eid: int) -> Edge:
        for e in self.edges:
            if e.id == eid:
                return e
        raise KeyError(eid)

    @property
    def internal_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if not e.external)

    @property
    def external_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.external)

    def slots(self, v: int) -> list[Slot]:
        """Adjacency of ``v`` as a disjoint union: loops appear twice."""
        out = []
        for e in self.edges:
            if e.src == v:
                out.append(Slot(e.id, 0))
            if e.dst == v:
                out.append(Slot(e.id, 1))
        return out

    def degree(self, v: int) -> int:
        return len(self.slots(v))

    @property
    def effective_l0(self) -> float:
        if self.l0 is not None:
            return float(self.l0)
        finite = [e.length for e in self.edges if not e.external]
        return min([1.0] + finite)

    @property
    def effective_d0(self) -> int:
        if self.d0 is not None:
            return int(self.d0)
        return max((self.degree(v) for v in self.vertices), default=0)

    @property
    def total_length(self) -> float:
        return sum(e.length for e in self.edges if not e.external)

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        adj = {v: set() for v in self.vertices}
        for e in self.edges:
            if e.dst is not None and e.src in adj and e.dst in adj:
                adj[e.src].add(e.dst)
                adj[e.dst].add(e.src)
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.vertices)


@dataclass
class ValidationReport:
    violations: list[tuple[str, object]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"{name}: {who}" for name, who in self.violations)


def validate(graph: MetricGraph) -> ValidationReport:
    """Check connectivity, unique ids, degree and length bounds, finitely many leads."""
    rep = ValidationReport()
    vs = set(graph.vertices)
    if len(vs) != len(graph.vertices):
        rep.violations.append(("unique vertex ids", sorted(graph.vertices)))
    ids = [e.id for e in graph.edges]
    if len(set(ids)) != len(ids):
        rep.violations.append(("unique edge ids", ids))
    l0 = graph.effective_l0
    if graph.l0 is not None and not (0.0 < graph.l0 <= 1.0):
        rep.violations.append(("0 < l0 <= 1", graph.l0))
    for e in graph.edges:
        if e.src not in vs or (e.dst is not None and e.dst not in vs):
            rep.violations.append(("edge endpoints exist", e.id))
        if e.external != math.isinf(e.length):
            rep.violations.append(("length = inf <=> to absent", e.id))
        if not e.external and not (e.length >= l0 and e.length > 0.0):
            rep.violations.append(("length >= l0", e.id))
    d0 = graph.effective_d0
    for v in graph.vertices:
        if graph.degree(v) > d0:
            rep.violations.append(("deg <= d0", v))
    if not graph.is_connected():
        rep.violations.append(("connected", None))
    return rep


@dataclass(frozen=True)
class Cut:
    """Where an external edge was cut: the lead started at ``vertex`` and the
    boundary vertex sits at arc distance ``distance`` from it."""

    vertex: int
    distance: float
    stub: Optional[int]
    boundary: int


@dataclass(frozen=True)
class GraphDecomposition:
    """Normalized graph with every lead starting at a degree-2 boundary vertex."""

    graph: MetricGraph
    boundary_vertices: tuple[int, ...]
    cut_map: dict
    original: MetricGraph

    @property
    def internal(self) -> MetricGraph:
        return replace(self.graph, edges=self.graph.internal_edges)

    @property
    def external(self) -> tuple[Edge, ...]:
        return self.graph.external_edges

    def boundary_of(self, ext_edge: int) -> int:
        return self.graph.edge(ext_edge).src

    def stub_of(self, ext_edge: int) -> Edge:
        b = self.boundary_of(ext_edge)
        (s,) = [self.graph.edge(sl.edge) for sl in self.graph.slots(b)
                if not self.graph.edge(sl.edge).external]
        return s


def normalize_and_decompose(graph: MetricGraph, cut_distance: Optional[float] = None
                            ) -> GraphDecomposition:
    """Insert a degree-2 boundary vertex on every lead.

    The new vertex sits at ``cut_distance`` (default l0) from the lead's
    initial vertex; the piece in between becomes an internal stub edge.
    Leads that already start at an artificial degree-2 vertex are left alone,
    which makes the operation idempotent.
    """
    rep = validate(graph)
    if not rep.ok:
        raise NotValidated(str(rep))
    l0 = graph.effective_l0
    dist = l0 if cut_distance is None else float(cut_distance)
    if dist <= 0:
        raise GraphError("cut distance must be positive")

    vertices = list(graph.vertices)
    edges = [e for e in graph.edges if not e.external]
    artificial = set(graph.artificial)
    next_v = max(vertices, default=-1) + 1
    next_e = max((e.id for e in graph.edges), default=-1) + 1
    boundary = []
    cut_map = {}
    for e in graph.external_edges:
        v = e.src
        if v in graph.artificial and graph.degree(v) == 2:
            # already clean; recover the coordinate from the stub
            (stub,) = [graph.edge(s.edge) for s in graph.slots(v) if s.edge != e.id]
            origin = stub.src if stub.dst == v else stub.dst
            edges.append(e)
            boundary.append(v)
            cut_map[e.id] = Cut(origin, stub.length, stub.id, v)
            continue
        b = next_v
        next_v += 1
        vertices.append(b)
        artificial.add(b)
        stub = Edge(next_e, v, b, dist)
        next_e += 1
        edges.append(stub)
        edges.append(Edge(e.id, b, None, math.inf))
        boundary.append(b)
        cut_map[e.id] = Cut(v, dist, stub.id, b)
    g = MetricGraph(tuple(vertices), tuple(edges), graph.l0 if graph.l0 is not None else l0,
                    graph.d0 if graph.d0 is not None else max(2, graph.effective_d0),
                    frozenset(artificial))
    return GraphDecomposition(g, tuple(boundary), cut_map, graph)


def cycle_basis(graph: MetricGraph) -> list[list[tuple[int, int]]]:
    """Independent cycles of the internal graph as ``(edge id, sign)`` lists.

    ``sign`` is +1 when the loop traverses the edge along its orientation.
    A spanning forest is grown by BFS; each non-tree edge closes one cycle.
    """
    internal = graph.internal_edges
    parent: dict[int, Optional[tuple[int, int, int]]] = {}
    tree_edges = set()
    adj: dict[int, list[tuple[Edge, int]]] = {v: [] for v in graph.vertices}
    for e in internal:
        adj[e.src].append((e, e.dst))
        if not e.is_loop:
            adj[e.dst].append((e, e.src))
    depth = {}
    for root in graph.vertices:
        if root in parent:
            continue
        parent[root] = None
        depth[root] = 0
        queue = [root]
        while queue:
            u = queue.pop(0)
            for e, w in adj[u]:
                if w in parent or e.is_loop:
                    continue
                parent[w] = (u, e.id, +1 if e.src == u else -1)
                depth[w] = depth[u] + 1
                tree_edges.add(e.id)
                queue.append(w)

    def path_to_root(v):
        out = []
        while parent[v] is not None:
            u, eid, sgn = parent[v]
            out.append((v, u, eid, sgn))
            v = u
        return out

    cycles = []
    for e in internal:
        if e.id in tree_edges:
            continue
        if e.is_loop:
            cycles.append([(e.id, +1)])
            continue
        # cycle: e from src to dst, then tree path dst -> lca -> src
        pu = path_to_root(e.dst)
        pv = path_to_root(e.src)
        up = [x[0] for x in pu] + [pu[-1][1] if pu else e.dst]
        vp = [x[0] for x in pv] + [pv[-1][1] if pv else e.src]
        common = set(up) & set(vp)
        cyc = [(e.id, +1)]
        # walk dst up to the lca: each step goes child -> parent, i.e. against
        # the tree edge's parent->child sign
        for (child, par, eid, sgn) in pu:
            if child in common:
                break
            cyc.append((eid, -sgn))
        down = []
        for (child, par, eid, sgn) in pv:
            if child in common:
                break
            down.append((eid, sgn))
        cyc.extend(reversed(down))
        cycles.append(cyc)
    return cycles


def components(graph: MetricGraph, edges: Sequence[Edge]) -> int:
    adj = {v: set() for v in graph.vertices}
    for e in edges:
        if e.dst is not None:
            adj[e.src].add(e.dst)
            adj[e.dst].add(e.src)
    seen, n = set(), 0
    for v in graph.vertices:
        if v in seen:
            continue
        n += 1
        stack = [v]
        seen.add(v)
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
    return n


# -- a few standard graphs -----------------------------------------------

def lasso(ell: float = 1.0, l0: Optional[float] = None) -> MetricGraph:
    """One loop of length ``ell`` with one lead, both at vertex 0."""
    return MetricGraph.build([0], [(0, 0, 0, ell), (1, 0, None, math.inf)], l0=l0)


def interval(ell: float = 1.0, l0: Optional[float] = None) -> MetricGraph:
    return MetricGraph.build([0, 1], [(0, 0, 1, ell)], l0=l0)


def half_line(l0: Optional[float] = None) -> MetricGraph:
    return MetricGraph.build([0], [(0, 0, None, math.inf)], l0=l0)


def star(n_leads: int, d0: Optional[int] = None) -> MetricGraph:
    return MetricGraph.build([0], [(i, 0, None, math.inf) for i in range(n_leads)], d0=d0)


def theta_graph(lengths=(1.0, 1.5, 2.0)) -> MetricGraph:
    return MetricGraph.build([0, 1], [(i, 0, 1, l) for i, l in enumerate(lengths)])
