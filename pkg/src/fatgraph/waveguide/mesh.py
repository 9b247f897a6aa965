"""Fat-graph model and its mesh in epsilon-independent reference coordinates.

Every edge becomes a strip (0, l) x (-1/2, 1/2) with transverse metric
eps^2 dy^2, leads are truncated at ``L_ext``.  Every non-boundary vertex of
degree d gets a patch: a regular d-gon with unit sides (empty for d <= 2)
and one rectangular arm of length l0/2 and width 1 per slot.  The patch
carries the Euclidean metric times eps^2.

Strips are meshed with bilinear quads, patch cores with a structured
barycentric triangulation of the centre fan, arms with quads.  A strip
leaving a vertex glues y = -1/2 to the first endpoint of its patch side;
a strip arriving glues it to the second, which keeps the surface oriented.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..fields import EdgeFields, fields_for
from ..graph import GraphDecomposition

EDGE, EXTERIOR, PATCH = 0, 1, 2
MAX_DEGREE = 12


class WaveguideError(ValueError):
    pass


class UnsupportedDegree(WaveguideError):
    pass


class MeshConformityError(WaveguideError):
    pass


@dataclass
class FatGraphModel:
    decomp: GraphDecomposition
    fields: EdgeFields
    eps: float
    L_ext: float
    l0: float
    patch_vertices: tuple
    max_degree: int = MAX_DEGREE

    @property
    def graph(self):
        return self.decomp.graph

    def strips(self):
        """(edge, length, kind) for every strip; kind is EDGE or EXTERIOR."""
        for e in self.graph.edges:
            yield e, (self.L_ext if e.external else e.length), (EXTERIOR if e.external else EDGE)


def build_model(decomp: GraphDecomposition, fields: Optional[EdgeFields], eps: float,
                L_ext: float = 4.0, patch_l0: Optional[float] = None,
                max_degree: int = MAX_DEGREE, end_patches: bool = True) -> FatGraphModel:
    """Strips for all edges, patches for all vertices except boundary ones.

    With ``end_patches=False`` degree-1 vertices get no patch either; the
    strip then simply ends there with its Neumann side.
    """
    if not (0 < eps <= 1):
        raise WaveguideError("eps must lie in (0, 1]")
    if L_ext <= 0:
        raise WaveguideError("L_ext must be positive")
    g = decomp.graph
    bset = set(decomp.boundary_vertices)
    pv = []
    for v in g.vertices:
        if v in bset:
            continue
        d = g.degree(v)
        if d > max_degree:
            raise UnsupportedDegree(f"vertex {v} has degree {d} > {max_degree}")
        if d > 1 or (d == 1 and end_patches):
            pv.append(v)
    l0 = g.effective_l0 if patch_l0 is None else float(patch_l0)
    return FatGraphModel(decomp, fields_for(g, fields), float(eps), float(L_ext), l0, tuple(pv),
                         max_degree)


@dataclass
class StripGrid:
    edge: int
    kind: int
    x: np.ndarray
    y: np.ndarray
    nodes: np.ndarray  # (nx+1, ny+1) global node ids

    @property
    def length(self) -> float:
        return float(self.x[-1])


@dataclass
class PatchGrid:
    vertex: int
    slots: list
    nodes: np.ndarray          # all node ids of the patch
    coords: np.ndarray         # their coordinates in the patch frame
    outer: list                # per slot: node ids along the arm's outer side
    core_area: float
    area: float


@dataclass
class Mesh:
    model: FatGraphModel
    n_nodes: int
    quad_conn: np.ndarray
    quad_hx: np.ndarray
    quad_hy: np.ndarray
    quad_a: np.ndarray
    quad_q: np.ndarray
    quad_region: np.ndarray
    quad_tag: np.ndarray
    tri_conn: np.ndarray
    tri_xy: np.ndarray
    tri_region: np.ndarray
    tri_tag: np.ndarray
    strips: dict
    patches: dict
    dirichlet: np.ndarray
    ny: int
    h: float
    duplicated: bool = False
    interfaces: list = field(default_factory=list)  # (stub-end ids, exterior-start ids)

    @property
    def max_side(self) -> float:
        s = [0.0]
        if len(self.quad_hx):
            s.append(float(max(self.quad_hx.max(), self.quad_hy.max())))
        if len(self.tri_xy):
            e = np.linalg.norm(self.tri_xy - np.roll(self.tri_xy, 1, axis=1), axis=2)
            s.append(float(e.max()))
        return max(s)

    def min_triangle_angle(self) -> float:
        """Smallest interior angle over all triangles, in degrees."""
        if not len(self.tri_xy):
            return 90.0
        P = self.tri_xy
        ang = []
        for i in range(3):
            u = P[:, (i + 1) % 3] - P[:, i]
            w = P[:, (i + 2) % 3] - P[:, i]
            c = np.sum(u * w, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
            ang.append(np.degrees(np.arccos(np.clip(c, -1, 1))))
        return float(np.min(ang))

    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, bool)
        mask[self.dirichlet] = False
        return np.flatnonzero(mask)


def _grid(length: float, h: float, breaks=()) -> np.ndarray:
    """Uniform-per-piece grid on [0, length] containing every breakpoint."""
    cuts = sorted(set([0.0, float(length)] + [b for b in breaks if 0 < b < length]))
    pts = [0.0]
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-12))
        pts.extend(np.linspace(a, b, n + 1)[1:])
    return np.array(pts)


def patch_sides(d: int):
    """Endpoints (A_i, B_i) and outward normals of the d attachment sides."""
    if d == 1:
        A = [np.array([0.0, -0.5])]
        B = [np.array([0.0, 0.5])]
    elif d == 2:
        A = [np.array([0.0, -0.5]), np.array([0.0, 0.5])]
        B = [np.array([0.0, 0.5]), np.array([0.0, -0.5])]
    else:
        R = 0.5 / math.sin(math.pi / d)
        ang = [2 * math.pi * i / d - math.pi / 2 - math.pi / d for i in range(d)]
        P = [np.array([R * math.cos(t), R * math.sin(t)]) for t in ang]
        A = P
        B = P[1:] + P[:1]
    normals = []
    for a, b in zip(A, B):
        t = b - a
        normals.append(np.array([t[1], -t[0]]) / np.linalg.norm(t))
    return A, B, normals


def circumradius(d: int) -> float:
    return 0.5 / math.sin(math.pi / d) if d >= 3 else 0.5


class _Nodes:
    def __init__(self):
        self.n = 0

    def new(self, count: int) -> np.ndarray:
        ids = np.arange(self.n, self.n + count)
        self.n += count
        return ids


def generate_mesh(model: FatGraphModel, h_target: float, duplicate_interfaces: bool = False) -> Mesh:
    """Conforming mesh with maximum element side <= h_target.

    ``duplicate_interfaces`` gives the exterior strips their own first node
    column, to be tied to the stub end by an explicit jump constraint.
    """
    if h_target <= 0:
        raise WaveguideError("h_target must be positive")
    g = model.graph
    h = float(h_target)
    degs = [g.degree(v) for v in model.patch_vertices]
    rmax = max([circumradius(d) for d in degs if d >= 3] + [1.0])
    ny = max(1, math.ceil(rmax / h - 1e-12))
    m = ny
    alloc = _Nodes()
    Q = {k: [] for k in ("conn", "hx", "hy", "a", "q", "region", "tag")}
    T = {k: [] for k in ("conn", "xy", "region", "tag")}

    def add_quads(ids, xs, ys, region, tag, a=None, q=None):
        # ids: (len(xs), len(ys)); quads are axis aligned in their local frame
        nx, nyy = len(xs) - 1, len(ys) - 1
        ii, jj = np.meshgrid(np.arange(nx), np.arange(nyy), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        conn = np.stack([ids[ii, jj], ids[ii + 1, jj], ids[ii, jj + 1], ids[ii + 1, jj + 1]], 1)
        Q["conn"].append(conn)
        Q["hx"].append(np.diff(xs)[ii])
        Q["hy"].append(np.diff(ys)[jj])
        xm = 0.5 * (xs[ii] + xs[ii + 1])
        Q["a"].append(np.zeros(len(ii)) if a is None else np.asarray(a(xm), float))
        Q["q"].append(np.zeros(len(ii)) if q is None else np.asarray(q(xm), float))
        Q["region"].append(np.full(len(ii), region))
        Q["tag"].append(np.full(len(ii), tag))

    # -- patches -----------------------------------------------------
    patches = {}
    for v in model.patch_vertices:
        slots = g.slots(v)
        d = len(slots)
        A, B, N = patch_sides(d)
        s_arm = _grid(0.5 * model.l0, h)
        coords = []
        key = {}

        def node(p):
            kk = (round(float(p[0]), 9), round(float(p[1]), 9))
            if kk not in key:
                key[kk] = len(coords)
                coords.append(np.array(p, float))
            return key[kk]

        tris = []
        if d >= 3:
            C = np.zeros(2)
            for i in range(d):
                P0, P1 = A[i], B[i]
                lid = {}
                # level a_ lies at distance a_/m from C; it has a_ + 1 nodes
                for a_ in range(m + 1):
                    for b_ in range(a_ + 1):
                        lid[a_, b_] = node(C + (a_ / m) * (P0 - C) + (b_ / m) * (P1 - P0))
                for a_ in range(m):
                    for b_ in range(a_ + 1):
                        tris.append((lid[a_, b_], lid[a_ + 1, b_], lid[a_ + 1, b_ + 1]))
                        if b_ < a_:
                            tris.append((lid[a_, b_], lid[a_ + 1, b_ + 1], lid[a_, b_ + 1]))
        arm_ids = []
        for i in range(d):
            ids = np.empty((len(s_arm), m + 1), dtype=np.int64)
            for a_, s in enumerate(s_arm):
                for j in range(m + 1):
                    ids[a_, j] = node(A[i] + (j / m) * (B[i] - A[i]) + s * N[i])
            arm_ids.append(ids)
        gid = alloc.new(len(coords))
        coords = np.array(coords)
        outer = []
        for i in range(d):
            ids = gid[arm_ids[i]]
            add_quads(ids, s_arm, np.linspace(-0.5, 0.5, m + 1), PATCH, v)
            outer.append(ids[-1])
        for t in tris:
            T["conn"].append(gid[list(t)])
            T["xy"].append(coords[list(t)])
            T["region"].append(PATCH)
            T["tag"].append(v)
        core = d * 0.25 / math.tan(math.pi / d) if d >= 3 else 0.0
        patches[v] = PatchGrid(v, slots, gid, coords, outer, core, core + d * 0.5 * model.l0)

    # -- strips ------------------------------------------------------
    y = np.linspace(-0.5, 0.5, ny + 1)
    strips = {}
    slot_index = {v: {(s.edge, s.end): i for i, s in enumerate(patches[v].slots)}
                  for v in patches}
    flds = model.fields
    bset = set(model.decomp.boundary_vertices)
    order = [e for e in g.edges if not e.external] + [e for e in g.edges if e.external]
    interfaces = []
    dirichlet = []
    for e in order:
        if e.external:
            x = _grid(model.L_ext, h)
            kind = EXTERIOR
        else:
            br = set(flds.a[e.id].breaks) | set(flds.q[e.id].breaks)
            x = _grid(e.length, h, br)
            kind = EDGE
        ids = np.full((len(x), ny + 1), -1, dtype=np.int64)
        for end, v in ((0, e.src), (1, e.dst)):
            if v is None:
                continue
            col = 0 if end == 0 else len(x) - 1
            if v in patches:
                i = slot_index[v][(e.id, end)]
                o = patches[v].outer[i]
                ids[col] = o if end == 0 else o[::-1]
            elif v in bset and e.external:
                stub = model.decomp.stub_of(e.id)
                sg = strips[stub.id]
                scol = sg.nodes[-1] if stub.dst == v else sg.nodes[0][::-1]
                if duplicate_interfaces:
                    fresh = alloc.new(ny + 1)
                    interfaces.append((e.id, scol.copy(), fresh.copy()))
                    ids[col] = fresh
                else:
                    ids[col] = scol
        missing = ids < 0
        ids[missing] = alloc.new(int(missing.sum()))
        if kind == EXTERIOR:
            dirichlet.append(ids[-1])
            add_quads(ids, x, y, EXTERIOR, e.id)
        else:
            add_quads(ids, x, y, EDGE, e.id, flds.a[e.id], flds.q[e.id])
        strips[e.id] = StripGrid(e.id, kind, x, y, ids)

    cat = lambda L, shape, dt: np.concatenate(L).astype(dt) if L else np.zeros(shape, dt)
    mesh = Mesh(
        model=model, n_nodes=alloc.n,
        quad_conn=cat(Q["conn"], (0, 4), np.int64), quad_hx=cat(Q["hx"], (0,), float),
        quad_hy=cat(Q["hy"], (0,), float), quad_a=cat(Q["a"], (0,), float),
        quad_q=cat(Q["q"], (0,), float), quad_region=cat(Q["region"], (0,), np.int64),
        quad_tag=cat(Q["tag"], (0,), np.int64),
        tri_conn=np.array(T["conn"], dtype=np.int64).reshape(-1, 3),
        tri_xy=np.array(T["xy"], dtype=float).reshape(-1, 3, 2),
        tri_region=np.array(T["region"], dtype=np.int64), tri_tag=np.array(T["tag"], dtype=np.int64),
        strips=strips, patches=patches,
        dirichlet=np.unique(np.concatenate(dirichlet)) if dirichlet else np.zeros(0, np.int64),
        ny=ny, h=h, duplicated=duplicate_interfaces, interfaces=interfaces)
    _check_conformity(mesh)
    return mesh


def _check_conformity(mesh: Mesh):
    used = np.zeros(mesh.n_nodes, bool)
    used[mesh.quad_conn.ravel()] = True
    if len(mesh.tri_conn):
        used[mesh.tri_conn.ravel()] = True
    if not used.all():
        raise MeshConformityError(f"{(~used).sum()} orphan nodes")
    # every glued column must be shared, i.e. the node count matches the
    # count implied by the region sizes minus shared interface columns
    for sg in mesh.strips.values():
        if sg.nodes.shape[1] != mesh.ny + 1:
            raise MeshConformityError(f"strip {sg.edge} has mismatched transverse grid")
        if len(np.unique(sg.nodes)) != sg.nodes.size:
            raise MeshConformityError(f"strip {sg.edge} repeats nodes")
    if mesh.max_side > mesh.h * (1 + 1e-9):
        raise MeshConformityError(f"element side {mesh.max_side} exceeds h = {mesh.h}")
