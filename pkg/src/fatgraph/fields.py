"""Piecewise-constant magnetic and electric edge potentials, phases and gauge.

Each internal edge carries a_e (magnetic) and q_e (electric, q >= 0) as
constants on consecutive subintervals of (0, l_e).  External edges carry
nothing.  Gauging away a_e multiplies f_e by exp(-i Phi_e(x)) and moves the
phase into the vertex conditions, slot by slot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .graph import MetricGraph, Slot, cycle_basis

Number = Union[float, int]


class FieldError(ValueError):
    pass


class OutOfRange(FieldError):
    pass


@dataclass(frozen=True)
class PiecewiseConstant:
    """Values ``values[i]`` on ``(breaks[i], breaks[i+1])``."""

    breaks: tuple[float, ...]
    values: tuple[float, ...]

    @classmethod
    def uniform(cls, length: float, values: Union[Number, Sequence[Number]]) -> "PiecewiseConstant":
        vals = [float(values)] if np.isscalar(values) else [float(v) for v in values]
        if not vals:
            raise FieldError("empty coefficient list")
        br = tuple(float(x) for x in np.linspace(0.0, length, len(vals) + 1))
        return cls(br, tuple(vals))

    @property
    def length(self) -> float:
        return self.breaks[-1]

    @property
    def pieces(self):
        """Yield (start, length, value) for each subinterval."""
        for i, v in enumerate(self.values):
            yield self.breaks[i], self.breaks[i + 1] - self.breaks[i], v

    def integral(self, x: float) -> float:
        if x < -1e-12 * max(1.0, self.length) or x > self.length * (1 + 1e-12) + 1e-15:
            raise OutOfRange(f"x={x} outside (0, {self.length})")
        s = 0.0
        for x0, L, v in self.pieces:
            if x <= x0:
                break
            s += v * (min(x, x0 + L) - x0)
        return s

    def __call__(self, x):
        idx = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, len(self.values) - 1)
        return np.asarray(self.values)[idx]

    @property
    def sup(self) -> float:
        return max(abs(v) for v in self.values)

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)


@dataclass(frozen=True)
class EdgeFields:
    a: Mapping[int, PiecewiseConstant]
    q: Mapping[int, PiecewiseConstant]

    @classmethod
    def zero(cls, graph: MetricGraph) -> "EdgeFields":
        return cls.from_values(graph)

    @classmethod
    def from_values(cls, graph: MetricGraph, a: Optional[Mapping] = None,
                    q: Optional[Mapping] = None) -> "EdgeFields":
        """Build from per-edge scalars or equal-subinterval lists."""
        a = dict(a or {})
        q = dict(q or {})
        aa, qq = {}, {}
        for e in graph.edges:
            if e.external:
                if _nonzero(a.get(e.id, 0)) or _nonzero(q.get(e.id, 0)):
                    raise FieldError(f"potentials must vanish on external edge {e.id}")
                continue
            aa[e.id] = PiecewiseConstant.uniform(e.length, a.get(e.id, 0.0))
            qq[e.id] = PiecewiseConstant.uniform(e.length, q.get(e.id, 0.0))
            if min(qq[e.id].values) < 0:
                raise FieldError(f"q must be non-negative on edge {e.id}")
        unknown = (set(a) | set(q)) - {e.id for e in graph.edges}
        if unknown:
            raise FieldError(f"fields given for unknown edges {sorted(unknown)}")
        return cls(aa, qq)

    def a_of(self, eid: int) -> PiecewiseConstant:
        return self.a[eid]

    def q_of(self, eid: int) -> PiecewiseConstant:
        return self.q[eid]

    def has_edge(self, eid: int) -> bool:
        return eid in self.a

    def with_edges(self, extra: Mapping[int, float]) -> "EdgeFields":
        """Add zero fields for new internal edges (e.g. stubs created by a cut)."""
        aa, qq = dict(self.a), dict(self.q)
        for eid, length in extra.items():
            if eid not in aa:
                aa[eid] = PiecewiseConstant.uniform(length, 0.0)
                qq[eid] = PiecewiseConstant.uniform(length, 0.0)
        return EdgeFields(aa, qq)

    def magnetic_free(self) -> bool:
        return all(p.is_zero() for p in self.a.values())


def _nonzero(v) -> bool:
    return bool(np.any(np.asarray(v, dtype=float) != 0))


def fields_for(graph: MetricGraph, fields: Optional[EdgeFields]) -> EdgeFields:
    """Fields covering every internal edge of ``graph`` (missing edges get zero)."""
    if fields is None:
        return EdgeFields.zero(graph)
    missing = {e.id: e.length for e in graph.internal_edges if not fields.has_edge(e.id)}
    return fields.with_edges(missing) if missing else fields


def phase_integral(fields: EdgeFields, edge: int, x: float) -> float:
    """Phi_e(x) = integral of a_e over (0, x)."""
    if not fields.has_edge(edge):
        if x != 0:
            raise OutOfRange(f"edge {edge} carries no field data")
        return 0.0
    return fields.a[edge].integral(x)


def loop_fluxes(graph: MetricGraph, fields: EdgeFields) -> list[float]:
    """Flux through each basis loop of ``cycle_basis``, reduced to [0, 2 pi)."""
    out = []
    for cyc in cycle_basis(graph):
        s = sum(sgn * phase_integral(fields, eid, graph.edge(eid).length) for eid, sgn in cyc)
        r = math.fmod(s, 2 * math.pi)
        if r < 0:
            r += 2 * math.pi
        if abs(r - 2 * math.pi) < 1e-13:
            r = 0.0
        out.append(r)
    return out


@dataclass(frozen=True)
class GaugedSystem:
    """Field-free system with phase-twisted vertex conditions.

    ``slot_phase[Slot(e, end)]`` is the factor p in ``p * f_e(v)`` (continuity)
    and ``p * Df_e(v)`` (current).  Original solutions are recovered as
    ``f_e(x) = exp(i (Phi_e(x) + offset[e])) * u_e(x)``, up to one global phase
    per connected component.
    """

    fields: EdgeFields
    slot_phase: Mapping[Slot, complex]
    offset: Mapping[int, float] = field(default_factory=dict)

    def phase(self, slot: Slot) -> complex:
        return self.slot_phase.get(slot, 1.0 + 0j)


def gauge_away(graph: MetricGraph, fields: EdgeFields, reduce: bool = True) -> GaugedSystem:
    """Remove a_e by the edgewise gauge exp(-i Phi_e(x)).

    With ``reduce`` the phases are further normalised along a spanning tree,
    so only the terminal slots of non-tree edges keep a nontrivial factor,
    each equal to exp(i * flux) of the loop that edge closes.
    """
    fields = fields_for(graph, fields)
    total = {e.id: phase_integral(fields, e.id, e.length) for e in graph.internal_edges}
    offset = {e.id: 0.0 for e in graph.edges}
    if reduce:
        pot = _tree_potential(graph, total)
        offset = {e.id: pot[e.src] for e in graph.edges}
    phases = {}
    for e in graph.edges:
        phases[Slot(e.id, 0)] = 1.0 + 0j
        if not e.external:
            twist = total[e.id]
            if reduce:
                twist += pot[e.src] - pot[e.dst]
            phases[Slot(e.id, 1)] = _snap(np.exp(1j * twist))
    zero_a = {eid: PiecewiseConstant(p.breaks, tuple(0.0 for _ in p.values)) for eid, p in fields.a.items()}
    return GaugedSystem(EdgeFields(zero_a, dict(fields.q)), phases, offset)


def _snap(p) -> complex:
    p = complex(p)
    if abs(p - 1) < 1e-14:
        return 1.0 + 0j
    return p


def _tree_potential(graph: MetricGraph, total: Mapping[int, float]) -> dict[int, float]:
    """Vertex potentials with pot[dst] - pot[src] = Phi_e(l_e) on a BFS forest."""
    pot: dict[int, float] = {}
    adj = {v: [] for v in graph.vertices}
    for e in graph.internal_edges:
        if e.is_loop:
            continue
        adj[e.src].append((e, e.dst, +1))
        adj[e.dst].append((e, e.src, -1))
    for root in graph.vertices:
        if root in pot:
            continue
        pot[root] = 0.0
        queue = [root]
        while queue:
            u = queue.pop(0)
            for e, w, sgn in adj[u]:
                if w not in pot:
                    pot[w] = pot[u] + sgn * total[e.id]
                    queue.append(w)
    return pot
