"""Identification maps between graph and waveguide spaces and their defects.

Maps (m = 1 transverse dimension, F = (-1/2, 1/2)):

    J    graph -> waveguide   eps^{-1/2} f_e(x) on strips, 0 on vertex patches
    J'   waveguide -> graph   eps^{1/2} N_e u, N_e the transverse average
    J1   order-1 version of J, constant eps^{-1/2} f(v) on the patch of v
    J'1  order-1 version of J', corrected near each patch vertex by
         rho_{v,e} (C_v u - N_e u(v)) so that its value at v is eps^{1/2} C_v u

J and J' act between the broken spaces (every strip, patch and edge owns
its nodes), where both are represented exactly.  J1 and J'1 act between the
conforming spaces.  Every operator norm is the largest eigenvalue of a
Hermitian pencil built from the Grams, never a sampled estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graphfem import GraphDiscretization, graph_for_mesh
from .kernels import assemble_quads, assemble_tris
from .secular import Dilation
from .waveguide.assembly import FatGraphOperator
from .waveguide.mesh import EXTERIOR, PATCH, Mesh
from .waveguide.solve import solve_eigs


class IncompatibleDecomposition(ValueError):
    pass


class SingularGram(np.linalg.LinAlgError):
    pass


PIVOT_TOL = 1e-12  # relative LU pivot below which a shift counts as an eigenvalue


class ShiftOnSpectrum(ValueError):
    pass


class ContourOnSpectrum(ValueError):
    pass


@dataclass
class BrokenWaveguide:
    n: int
    strip_ids: dict           # edge id -> (nx+1, ny+1) broken indices aligned with strip nodes
    patch_ids: dict           # vertex -> broken indices aligned with PatchGrid.nodes
    gram0: sp.csr_matrix      # eps-weighted L2 Gram
    embed: sp.csr_matrix      # conforming free dofs -> broken, e^{theta/2} on leads
    embed_abs: sp.csr_matrix


@dataclass
class IdentificationMaps:
    graph: GraphDiscretization
    op: FatGraphOperator
    broken: BrokenWaveguide
    eps: float
    J: sp.csr_matrix          # graph broken -> waveguide broken
    Jp: sp.csr_matrix         # waveguide broken -> graph broken
    J1: sp.csr_matrix         # graph continuous -> waveguide free dofs
    Jp1: sp.csr_matrix        # waveguide free dofs -> graph continuous
    gram1_w: sp.csr_matrix    # order-1 Gram on the waveguide free dofs
    patch_average: dict = field(default_factory=dict)  # vertex -> sparse row C_v

    @property
    def mesh(self) -> Mesh:
        return self.op.mesh


@dataclass
class ClosenessReport:
    delta_adj: float
    delta_inv1: float
    delta_inv2: float
    delta_form: float
    norm_J: float
    norm_Jp: float
    eps: float
    theta: complex
    h: float
    n_graph: int
    n_waveguide: int

    def components(self) -> dict:
        return {"delta_adj": self.delta_adj, "delta_inv1": self.delta_inv1,
                "delta_inv2": self.delta_inv2, "delta_form": self.delta_form}


# -- construction -----------------------------------------------------

def _free_position(op: FatGraphOperator) -> np.ndarray:
    pos = np.full(op.mesh.n_nodes, -1, np.int64)
    pos[op.free] = np.arange(len(op.free))
    return pos


def broken_waveguide(op: FatGraphOperator) -> BrokenWaveguide:
    mesh = op.mesh
    if mesh.duplicated:
        raise IncompatibleDecomposition("maps need a mesh with shared interface nodes")
    eps = op.eps
    half = complex(np.exp(complex(op.dilation.theta) / 2))
    pos = _free_position(op)
    nb = 0
    strip_ids, patch_ids, lut = {}, {}, {}
    for eid, sg in mesh.strips.items():
        ids = np.arange(nb, nb + sg.nodes.size).reshape(sg.nodes.shape)
        nb += sg.nodes.size
        strip_ids[eid] = ids
        t = np.full(mesh.n_nodes, -1, np.int64)
        t[sg.nodes.ravel()] = ids.ravel()
        lut[("s", eid)] = t
    for v, pg in mesh.patches.items():
        ids = np.arange(nb, nb + len(pg.nodes))
        nb += len(pg.nodes)
        patch_ids[v] = ids
        t = np.full(mesh.n_nodes, -1, np.int64)
        t[pg.nodes] = ids
        lut[("p", v)] = t

    conn = np.empty_like(mesh.quad_conn)
    kind = np.where(mesh.quad_region == PATCH, "p", "s")
    for key, t in lut.items():
        sel = (kind == key[0]) & (mesh.quad_tag == key[1])
        conn[sel] = t[mesh.quad_conn[sel]]
    dens = np.where(mesh.quad_region == PATCH, eps * eps, eps)
    zero = np.zeros(len(conn))
    r, c, _, b = assemble_quads(conn, mesh.quad_hx, mesh.quad_hy, zero, zero, zero, zero, dens)
    rows, cols, vals = [r], [c], [b]
    if len(mesh.tri_conn):
        tconn = np.empty_like(mesh.tri_conn)
        for v in mesh.patches:
            sel = mesh.tri_tag == v
            tconn[sel] = lut[("p", v)][mesh.tri_conn[sel]]
        nt = len(tconn)
        r, c, _, b = assemble_tris(tconn, mesh.tri_xy, np.zeros(nt), np.full(nt, eps * eps))
        rows.append(r); cols.append(c); vals.append(b)
    W0 = sp.coo_matrix((np.concatenate(vals).real, (np.concatenate(rows), np.concatenate(cols))),
                       shape=(nb, nb)).tocsr()

    er, ec, ev = [], [], []
    for eid, sg in mesh.strips.items():
        p = pos[sg.nodes.ravel()]
        ok = p >= 0
        er.append(strip_ids[eid].ravel()[ok]); ec.append(p[ok])
        ev.append(np.full(ok.sum(), half if sg.kind == EXTERIOR else 1.0, complex))
    for v, pg in mesh.patches.items():
        p = pos[pg.nodes]
        ok = p >= 0
        er.append(patch_ids[v][ok]); ec.append(p[ok]); ev.append(np.ones(ok.sum(), complex))
    er, ec, ev = np.concatenate(er), np.concatenate(ec), np.concatenate(ev)
    E = sp.csr_matrix((ev, (er, ec)), shape=(nb, len(op.free)))
    Eabs = sp.csr_matrix((np.abs(ev), (er, ec)), shape=(nb, len(op.free)))
    return BrokenWaveguide(nb, strip_ids, patch_ids, W0, E, Eabs)


def _transverse_weights(y: np.ndarray) -> np.ndarray:
    """Trapezoid weights on the y-grid: exact average of a piecewise-linear profile."""
    hy = np.diff(y)
    w = np.zeros(len(y))
    w[:-1] += 0.5 * hy
    w[1:] += 0.5 * hy
    return w / (y[-1] - y[0])


def smoothstep_cutoff(s, radius: float):
    """1 at s = 0, 0 for s >= radius, cubic smoothstep in between."""
    t = np.clip(np.asarray(s, float) / radius, 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


def _patch_integrals(mesh: Mesh, v: int) -> np.ndarray:
    """Integral of every nodal basis function over the reference patch of v."""
    w = np.zeros(mesh.n_nodes)
    sel = (mesh.quad_region == PATCH) & (mesh.quad_tag == v)
    np.add.at(w, mesh.quad_conn[sel], (mesh.quad_hx[sel] * mesh.quad_hy[sel] / 4)[:, None])
    tsel = mesh.tri_tag == v
    if np.any(tsel):
        P = mesh.tri_xy[tsel]
        d1 = P[:, 1] - P[:, 0]
        d2 = P[:, 2] - P[:, 0]
        area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        np.add.at(w, mesh.tri_conn[tsel], (area / 3)[:, None])
    return w


def _gram1_waveguide(op: FatGraphOperator) -> sp.csr_matrix:
    """Mass plus free form, in the lead variable w (the moduli of the dilation cancel)."""
    mesh = op.mesh
    eps = op.eps
    patch = mesh.quad_region == PATCH
    cx = np.where(patch, 1.0, eps)
    cy = np.where(patch, 1.0, 1.0 / eps)
    cm = np.where(patch, eps * eps, eps)
    zero = np.zeros(len(cx))
    r, c, a, b = assemble_quads(mesh.quad_conn, mesh.quad_hx, mesh.quad_hy, zero, cx, cy, zero, cm)
    rows, cols, vals = [r], [c], [(a + b).real]
    if len(mesh.tri_conn):
        nt = len(mesh.tri_conn)
        r, c, a, b = assemble_tris(mesh.tri_conn, mesh.tri_xy, np.ones(nt), np.full(nt, eps * eps))
        rows.append(r); cols.append(c); vals.append((a + b).real)
    N = mesh.n_nodes
    G = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N)).tocsr()
    return G[op.free][:, op.free].tocsr()


def build_maps(gd: Optional[GraphDiscretization], op: FatGraphOperator,
               eps: Optional[float] = None, dilation: Optional[Dilation] = None) -> IdentificationMaps:
    """J, J', J1, J'1 for a graph discretization on the strip grids of ``op.mesh``."""
    mesh = op.mesh
    eps = op.eps if eps is None else float(eps)
    if abs(eps - op.eps) > 1e-15:
        raise IncompatibleDecomposition("eps differs from the assembled operator")
    dilation = op.dilation if dilation is None else dilation
    if gd is None:
        gd = graph_for_mesh(mesh, dilation)
    if gd.decomp is not mesh.model.decomp and set(gd.decomp.boundary_vertices) != set(mesh.model.decomp.boundary_vertices):
        raise IncompatibleDecomposition("graph and waveguide use different cuts")
    for eid, sg in mesh.strips.items():
        x = gd.grids.get(eid)
        if x is None or len(x) != len(sg.x) or not np.allclose(x, sg.x, atol=1e-12):
            raise IncompatibleDecomposition(f"edge {eid}: graph grid and strip grid differ")
    if complex(gd.dilation.theta) != complex(dilation.theta):
        raise IncompatibleDecomposition("graph and waveguide use different dilations")

    bw = broken_waveguide(op)
    pos = _free_position(op)
    g = gd.graph
    se, sq = eps ** -0.5, eps ** 0.5

    # J and J' on the broken spaces
    jr, jc, pr, pc, pv = [], [], [], [], []
    for eid, sg in mesh.strips.items():
        ids = bw.strip_ids[eid]
        gb = gd.broken[eid]
        wy = _transverse_weights(sg.y)
        jr.append(ids.ravel()); jc.append(np.repeat(gb, ids.shape[1]))
        pr.append(np.repeat(gb, ids.shape[1])); pc.append(ids.ravel())
        pv.append(np.tile(wy, ids.shape[0]))
    jr, jc = np.concatenate(jr), np.concatenate(jc)
    J = sp.csr_matrix((np.full(len(jr), se), (jr, jc)), shape=(bw.n, gd.n_broken))
    Jp = sp.csr_matrix((sq * np.concatenate(pv), (np.concatenate(pr), np.concatenate(pc))),
                       shape=(gd.n_broken, bw.n))

    # J1: nodal values of the constant-in-y extension
    val = np.full(mesh.n_nodes, -1, np.int64)
    for eid, sg in mesh.strips.items():
        d = gd.dof[eid]
        val[sg.nodes] = d[:, None]
    vdof = {v: i for i, v in enumerate(g.vertices)}
    for v, pg in mesh.patches.items():
        val[pg.nodes] = vdof[v]
    free = op.free
    ok = val[free] >= 0
    J1 = sp.csr_matrix((np.full(ok.sum(), se), (np.flatnonzero(ok), val[free][ok])),
                       shape=(len(free), gd.n))

    # J'1: transverse averages with the vertex correction
    C = {}
    for v, pg in mesh.patches.items():
        w = _patch_integrals(mesh, v)
        nodes = np.flatnonzero(w)
        p = pos[nodes]
        keep = p >= 0
        C[v] = sp.csr_matrix((w[nodes][keep] / w.sum(), (np.zeros(keep.sum(), int), p[keep])),
                             shape=(1, len(free)))
    rows = {}
    l0 = mesh.model.l0
    for eid, sg in mesh.strips.items():
        e = g.edge(eid)
        wy = _transverse_weights(sg.y)
        nx = len(sg.x)
        # N_e as an (nx, n_free) matrix
        p = pos[sg.nodes]
        r_, c_ = np.nonzero(p >= 0)
        N = sp.csr_matrix((wy[c_], (r_, p[r_, c_])), shape=(nx, len(free)))
        L = float(sg.x[-1])
        radius = min(0.5 * L, l0)
        corr = sp.csr_matrix((nx, len(free)))
        for end, v in ((0, e.src), (1, e.dst)):
            if v is None or v not in mesh.patches:
                continue
            s = sg.x if end == 0 else L - sg.x
            rho = smoothstep_cutoff(s, radius)
            iv = 0 if end == 0 else nx - 1
            delta = C[v] - N[iv]
            corr = corr + sp.csr_matrix(rho[:, None]) @ delta
        Mrow = (N + corr).tocsr()
        d = gd.dof[eid]
        for i in range(nx):
            if d[i] < 0 or d[i] in rows:
                continue
            rows[d[i]] = Mrow[i]
    Jp1 = sq * sp.vstack([rows[i] for i in range(gd.n)]).tocsr()
    return IdentificationMaps(gd, op, bw, eps, J, Jp, J1, Jp1, _gram1_waveguide(op), C)


# -- norms ------------------------------------------------------------

def _gen_max(S: np.ndarray, G) -> float:
    """Largest eigenvalue of the Hermitian pencil (S, G), G positive definite."""
    G = G.toarray() if sp.issparse(G) else np.asarray(G)
    S = 0.5 * (S + S.conj().T)
    try:
        w = la.eigh(S, G, eigvals_only=True, driver="gvd")
    except la.LinAlgError as exc:
        raise SingularGram(str(exc)) from exc
    return max(float(w[-1]), 0.0)


def _gen_max_sparse(Kop, G: sp.spmatrix, dense_below: int = 1500) -> float:
    """Largest eigenvalue of (K^H W K, G) for a sparse, possibly large pencil."""
    n = G.shape[0]
    if n <= dense_below:
        return _gen_max(Kop.toarray() if sp.issparse(Kop) else Kop, G)
    try:
        lu = spla.splu(G.tocsc())
    except RuntimeError as exc:
        raise SingularGram(str(exc)) from exc
    Minv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    w = spla.eigsh(Kop, k=1, M=G, Minv=Minv, which="LA", tol=1e-10,
                   v0=np.ones(n), return_eigenvectors=False)
    return max(float(w[-1]), 0.0)


def _norm_broken(D: np.ndarray, W, G) -> float:
    """||D||_{0 -> 0} for D: graph broken -> waveguide broken."""
    S = D.conj().T @ (W @ D)
    return math.sqrt(_gen_max(S, G))


def delta_report(maps: IdentificationMaps) -> ClosenessReport:
    """All closeness defects plus the norms of J and J'."""
    gd, bw, op = maps.graph, maps.broken, maps.op
    W0, G0 = bw.gram0, gd.gram0_broken
    try:
        luW = spla.splu(W0.tocsc())
    except RuntimeError as exc:
        raise SingularGram("waveguide Gram is singular") from exc
    G0d = G0.toarray()
    JpT = maps.Jp.T.toarray()
    Jp_star = luW.solve(JpT @ G0d)
    Jd = maps.J.toarray()
    delta_adj = _norm_broken(Jd - Jp_star, W0, G0d)
    norm_J = _norm_broken(Jd, W0, G0d)
    norm_Jp = _norm_broken(Jp_star, W0, G0d)

    Ka = gd.embed_abs - maps.Jp @ (maps.J @ gd.embed_abs)
    Ka = Ka.toarray()
    delta_inv1 = math.sqrt(_gen_max(Ka.T @ (G0 @ Ka), gd.gram1))

    Kw = (bw.embed_abs - maps.J @ (maps.Jp @ bw.embed_abs)).tocsr()
    S = (Kw.T @ W0 @ Kw).tocsr()
    delta_inv2 = math.sqrt(_gen_max_sparse(S, maps.gram1_w))

    Mx = (gd.A @ maps.Jp1 - maps.J1.T @ op.A).tocsc()
    try:
        luG1 = spla.splu(maps.gram1_w.tocsc().astype(complex))
    except RuntimeError as exc:
        raise SingularGram("order-1 waveguide Gram is singular") from exc
    Y = luG1.solve(Mx.conj().T.toarray())
    delta_form = math.sqrt(_gen_max(Mx @ Y, gd.gram1))
    mesh = op.mesh
    return ClosenessReport(delta_adj, delta_inv1, delta_inv2, delta_form, norm_J, norm_Jp,
                           maps.eps, complex(op.dilation.theta), mesh.h, gd.n, op.n)


# -- resolvents and projections ---------------------------------------

def _factor(M, what: str):
    try:
        lu = spla.splu(M.tocsc().astype(complex))
    except RuntimeError as exc:
        raise ShiftOnSpectrum(f"{what} is singular at this shift") from exc
    piv = np.abs(lu.U.diagonal())
    if piv.min() <= PIVOT_TOL * piv.max():
        raise ShiftOnSpectrum(f"{what} is numerically singular at this shift")
    return lu


def _resolvent_blocks(maps: IdentificationMaps, z: complex):
    """Dense J R(z) - R~(z) J on the graph broken space, plus the factors."""
    gd, bw, op = maps.graph, maps.broken, maps.op
    luG = _factor(gd.A - z * gd.B, "graph pencil")
    luW = _factor(op.A - z * op.B, "waveguide pencil")
    G0 = gd.gram0_broken.toarray()
    Eg = gd.embed
    rg = Eg @ luG.solve((Eg.T @ G0).astype(complex))
    load = (bw.embed.T @ (bw.gram0 @ maps.J)).toarray()
    rw = bw.embed @ luW.solve(load.astype(complex))
    D = maps.J @ rg - rw
    if not (np.all(np.isfinite(D))):
        raise ShiftOnSpectrum(f"non-finite resolvent at z = {z}")
    return D, luG, luW


def resolvent_diff_norm(z: complex, maps: IdentificationMaps, both: bool = True):
    """(||J R(z) - R~(z) J||, ||J R(z) J' - R~(z)||) in L2 operator norm.

    The second norm is computed iteratively and skipped when ``both`` is False.
    """
    z = complex(z)
    gd, bw = maps.graph, maps.broken
    D, luG, luW = _resolvent_blocks(maps, z)
    first = _norm_broken(D, bw.gram0, gd.gram0_broken.toarray())
    if not both:
        return first, None
    W0 = bw.gram0
    G0 = gd.gram0_broken
    Eg, Ew, J, Jp = gd.embed, bw.embed, maps.J, maps.Jp
    n = bw.n

    def T(u):
        a = J @ (Eg @ luG.solve(Eg.T @ (G0 @ (Jp @ u))))
        b = Ew @ luW.solve(Ew.T @ (W0 @ u))
        return a - b

    def TH(u):
        a = Jp.T @ (G0 @ (Eg.conj() @ luG.solve(Eg.conj().T @ (J.T @ u), trans="H")))
        b = W0 @ (Ew.conj() @ luW.solve(Ew.conj().T @ u, trans="H"))
        return a - b

    S = spla.LinearOperator((n, n), matvec=lambda u: TH(W0 @ T(u.astype(complex))), dtype=complex)
    luM = spla.splu(W0.tocsc())
    Minv = spla.LinearOperator((n, n), matvec=lambda u: luM.solve(np.real(u)) + 1j * luM.solve(np.imag(u)),
                               dtype=complex)
    w = spla.eigsh(S, k=1, M=W0.astype(complex), Minv=Minv, which="LA", tol=1e-8,
                   v0=np.ones(n, complex), return_eigenvectors=False)
    return first, math.sqrt(max(float(np.real(w[-1])), 0.0))


@dataclass
class ProjectionReport:
    norm: float
    rank_graph: int
    rank_waveguide: int
    graph_eigenvalues: np.ndarray
    waveguide_eigenvalues: np.ndarray

    @property
    def ranks_match(self) -> bool:
        return self.rank_graph == self.rank_waveguide


def _inside(values, center, radius, clearance):
    d = np.abs(np.asarray(values) - center)
    if np.any(np.abs(d - radius) < clearance * radius):
        bad = np.asarray(values)[np.abs(d - radius) < clearance * radius]
        raise ContourOnSpectrum(f"eigenvalues {bad} lie on the contour")
    return np.asarray(values)[d < radius]


def projection_diff(lambda0: complex, radius: float, maps: IdentificationMaps,
                    nodes: int = 48, clearance: float = 0.05, max_count: int = 64) -> ProjectionReport:
    """||J P - P~ J|| for the spectral projections of the disc |z - lambda0| < radius.

    Trapezoid quadrature with ``nodes`` points on the circle; the circle must
    keep a relative ``clearance`` from both discrete spectra.
    """
    c = complex(lambda0)
    gd, bw, op = maps.graph, maps.broken, maps.op
    gw = la.eigvals(la.solve(gd.B.toarray(), gd.A.toarray()))
    g_in = _inside(gw, c, radius, clearance)
    count = 8
    while True:
        pairs = solve_eigs(op, c, count=min(count, op.n - 2), dense_below=0)
        far = np.max(np.abs(pairs.values - c))
        if far > radius * (1 + clearance) or count >= max_count:
            break
        count *= 2
    w_in = _inside(pairs.values, c, radius, clearance)
    P = np.zeros((bw.n, gd.n_broken), complex)
    for k in range(nodes):
        phase = np.exp(2j * np.pi * (k + 0.5) / nodes)
        D, _, _ = _resolvent_blocks(maps, c + radius * phase)
        P -= (radius * phase / nodes) * D
    norm = _norm_broken(P, bw.gram0, gd.gram0_broken.toarray())
    return ProjectionReport(norm, len(g_in), len(w_in), g_in, w_in)


def eigenvector_match(psi0: np.ndarray, psieps: np.ndarray, maps: IdentificationMaps,
                      broken: bool = False):
    """(||J psi0 - c psi_eps||, ||J' c psi_eps - psi0||) with the best unit scalar c.

    Vectors live on the continuous graph space and the free waveguide dofs,
    or on the broken spaces when ``broken`` is set.  Both are normalised in L2.
    """
    gd, bw = maps.graph, maps.broken
    f = np.asarray(psi0, complex) if broken else gd.embed @ np.asarray(psi0, complex)
    u = np.asarray(psieps, complex) if broken else bw.embed @ np.asarray(psieps, complex)
    G0, W0 = gd.gram0_broken, bw.gram0
    f = f / math.sqrt(abs(np.vdot(f, G0 @ f)))
    u = u / math.sqrt(abs(np.vdot(u, W0 @ u)))
    Jf = maps.J @ f
    s = np.vdot(u, W0 @ Jf)
    c = s / abs(s) if abs(s) > 0 else 1.0
    r1 = Jf - c * u
    r2 = maps.Jp @ (c * u) - f
    return (math.sqrt(abs(np.vdot(r1, W0 @ r1))), math.sqrt(abs(np.vdot(r2, G0 @ r2))))
