"""Piecewise-linear finite elements on the metric graph.

The grid of every edge is the x-grid of the corresponding waveguide strip,
so the identification maps act node by node.  Leads are truncated at
``L_ext`` with a Dirichlet end and written in w = e^{-theta/2} f, which is
continuous at the boundary vertex (the value jump e^{theta/2} becomes a
change of variables, the derivative jump the natural condition).

Two spaces are kept:

    continuous space   one value per vertex plus interior edge nodes;
                       this carries the pencil (A, B) and the order-1 Gram
    broken space       every edge owns all its nodes, values are f itself;
                       this carries the L2 Gram and the maps to the waveguide

``embed`` (continuous -> broken) multiplies lead values by e^{theta/2}.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .fields import EdgeFields, fields_for
from .graph import GraphDecomposition
from .secular import Dilation
from .waveguide.mesh import Mesh, _grid

_K1 = np.array([[1.0, -1.0], [-1.0, 1.0]])
_M1 = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
_R1 = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass
class GraphDiscretization:
    decomp: GraphDecomposition
    fields: EdgeFields
    dilation: Dilation
    L_ext: float
    h: float
    grids: dict               # edge id -> node coordinates along the edge
    dof: dict                 # edge id -> continuous dof per node (-1 on the Dirichlet end)
    broken: dict              # edge id -> broken index per node
    n: int                    # continuous dofs
    n_broken: int
    A: sp.csr_matrix          # pencil on the continuous space
    B: sp.csr_matrix
    embed: sp.csr_matrix      # continuous -> broken, complex
    embed_abs: sp.csr_matrix  # same with moduli, for norms
    gram0_broken: sp.csr_matrix
    gram0: sp.csr_matrix      # L2 Gram on the continuous space
    gram1: sp.csr_matrix      # order-1 Gram (mass + free form)
    stiff_free: sp.csr_matrix

    @property
    def graph(self):
        return self.decomp.graph

    def external(self, eid: int) -> bool:
        return self.graph.edge(eid).external


def _edge_blocks(x, a_vals, q_vals, cx, cm):
    """Element triplets for one edge: cx (K + a^2 M + i a R) + cq M, mass cm M."""
    hx = np.diff(x)[:, None, None]
    a = np.asarray(a_vals, float)[:, None, None]
    q = np.asarray(q_vals, float)[:, None, None]
    A = cx * (_K1 / hx + a * a * _M1 * hx + 1j * a * _R1) + q * _M1 * hx
    B = cm * _M1 * hx
    K = _K1 / hx
    M = _M1 * hx
    return A, B, K, M


def discretize_graph(decomp: GraphDecomposition, fields: Optional[EdgeFields], h: float,
                     dilation: Dilation = Dilation(), L_ext: float = 4.0) -> GraphDiscretization:
    """P1 discretization with maximum element length ``h``."""
    g = decomp.graph
    flds = fields_for(g, fields)
    et = complex(np.exp(complex(dilation.theta)))
    half = complex(np.exp(complex(dilation.theta) / 2))
    vdof = {v: i for i, v in enumerate(g.vertices)}
    n = len(vdof)
    grids, dof, broken = {}, {}, {}
    nb = 0
    for e in g.edges:
        if e.external:
            x = _grid(L_ext, h)
        else:
            br = set(flds.a[e.id].breaks) | set(flds.q[e.id].breaks)
            x = _grid(e.length, h, br)
        ids = np.empty(len(x), np.int64)
        ids[0] = vdof[e.src]
        ids[-1] = -1 if e.external else vdof[e.dst]
        ids[1:-1] = np.arange(n, n + len(x) - 2)
        n += len(x) - 2
        grids[e.id], dof[e.id] = x, ids
        broken[e.id] = np.arange(nb, nb + len(x))
        nb += len(x)

    rows, cols, av, bv, kv = [], [], [], [], []
    brows, bcols, mv = [], [], []
    er, ec, ev, eabs = [], [], [], []
    for e in g.edges:
        x = grids[e.id]
        xm = 0.5 * (x[:-1] + x[1:])
        if e.external:
            A, B, K, M = _edge_blocks(x, np.zeros(len(xm)), np.zeros(len(xm)), 1 / et, et)
            s = half
        else:
            A, B, K, M = _edge_blocks(x, flds.a[e.id](xm), flds.q[e.id](xm), 1.0, 1.0)
            s = 1.0
        ids = dof[e.id]
        loc = np.stack([ids[:-1], ids[1:]], 1)
        r = np.repeat(loc, 2, axis=1).ravel()
        c = np.tile(loc, (1, 2)).ravel()
        ok = (r >= 0) & (c >= 0)
        rows.append(r[ok]); cols.append(c[ok])
        av.append(A.ravel()[ok]); bv.append(B.ravel()[ok]); kv.append(K.ravel()[ok])
        bl = np.stack([broken[e.id][:-1], broken[e.id][1:]], 1)
        brows.append(np.repeat(bl, 2, axis=1).ravel())
        bcols.append(np.tile(bl, (1, 2)).ravel())
        mv.append(M.ravel())
        keep = ids >= 0
        er.append(broken[e.id][keep]); ec.append(ids[keep])
        ev.append(np.full(keep.sum(), s, complex)); eabs.append(np.full(keep.sum(), abs(s)))

    cat = np.concatenate
    mk = lambda v, r, c, N, M_: sp.coo_matrix((cat(v), (cat(r), cat(c))), shape=(N, M_)).tocsr()
    A = mk(av, rows, cols, n, n)
    B = mk(bv, rows, cols, n, n)
    K = mk(kv, rows, cols, n, n).real
    G0b = mk(mv, brows, bcols, nb, nb).real
    E = mk(ev, er, ec, nb, n)
    Eabs = mk(eabs, er, ec, nb, n)
    G0 = (Eabs.T @ G0b @ Eabs).tocsr()
    # order-1 norm: lead dofs carry the modulus |e^{-theta/2}| of the
    # dilation, which cancels the |e^{theta/2}| of the embedding
    scaled = sp.diags(np.where(_lead_mask(g, broken, nb), 1.0 / abs(half), 1.0)) @ Eabs
    G1 = (scaled.T @ G0b @ scaled + K).tocsr()
    return GraphDiscretization(decomp, flds, dilation, float(L_ext), float(h), grids, dof, broken,
                               n, nb, A, B, E.tocsr(), Eabs.tocsr(), G0b, G0, G1, K)


def _lead_mask(g, broken, nb):
    m = np.zeros(nb, bool)
    for e in g.external_edges:
        m[broken[e.id]] = True
    return m


def graph_for_mesh(mesh: Mesh, dilation: Dilation) -> GraphDiscretization:
    """Graph discretization on exactly the strip grids of ``mesh``."""
    model = mesh.model
    gd = discretize_graph(model.decomp, model.fields, mesh.h, dilation, model.L_ext)
    for eid, sg in mesh.strips.items():
        if len(sg.x) != len(gd.grids[eid]) or not np.allclose(sg.x, gd.grids[eid], atol=1e-12):
            raise ValueError(f"grid of edge {eid} differs from its strip")
    return gd


def graph_eigs(gd: GraphDiscretization, shift: complex, count: int = 6):
    """Eigenpairs of the graph pencil nearest ``shift`` (dense; graphs are small)."""
    A = gd.A.toarray()
    B = gd.B.toarray()
    w, V = la.eig(la.solve(B, A))
    idx = np.argsort(np.abs(w - shift), kind="stable")[:count]
    return w[idx], V[:, idx]
