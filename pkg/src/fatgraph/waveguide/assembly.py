"""Assembly of the eps-weighted, exterior-dilated pencil (A, B).

Weights per region (reference coordinates):

    edge strip   stiffness eps |(d_x - i a) u|^2 + |d_y u|^2 / eps + eps q |u|^2,  mass eps
    patch        stiffness |grad u|^2,                                         mass eps^2
    exterior     stiffness eps e^{-theta} |d_x w|^2 + e^{theta} |d_y w|^2 / eps, mass eps e^{theta}

The exterior is written in w = e^{-theta/2} u_ext, which is continuous
across the boundary vertex.  Entries are bilinear in real basis functions,
so A is complex symmetric whenever a = 0 and Hermitian on the interior
part when theta = 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..kernels import assemble_quads, assemble_tris
from ..secular import Dilation
from .mesh import EDGE, EXTERIOR, PATCH, Mesh


@dataclass
class FatGraphOperator:
    A: sp.csr_matrix
    B: sp.csr_matrix
    free: np.ndarray          # global node ids of the unknowns
    mesh: Mesh
    dilation: Dilation
    eps: float
    region: np.ndarray        # per free dof: EDGE, EXTERIOR or PATCH
    tag: np.ndarray           # per free dof: edge or vertex id

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def expand(self, u: np.ndarray) -> np.ndarray:
        """Nodal vector over all mesh nodes (zero on Dirichlet nodes)."""
        full = np.zeros(self.mesh.n_nodes, dtype=np.result_type(u, complex))
        full[self.free] = u
        return full


def _weights(mesh: Mesh, dilation: Dilation, eps: float, exterior_substituted: bool = True):
    et = complex(np.exp(complex(dilation.theta)))
    n = len(mesh.quad_conn)
    cx = np.empty(n, complex); cy = np.empty(n, complex)
    cq = np.empty(n, complex); cm = np.empty(n, complex)
    r = mesh.quad_region
    e_ = r == EDGE
    cx[e_] = eps; cy[e_] = 1 / eps; cq[e_] = eps * mesh.quad_q[e_]; cm[e_] = eps
    p_ = r == PATCH
    cx[p_] = 1.0; cy[p_] = 1.0; cq[p_] = 0.0; cm[p_] = eps * eps
    x_ = r == EXTERIOR
    if exterior_substituted:
        cx[x_] = eps / et; cy[x_] = et / eps; cm[x_] = eps * et
    else:
        cx[x_] = eps / et ** 2; cy[x_] = 1 / eps; cm[x_] = eps
    cq[x_] = 0.0
    return cx, cy, cq, cm


def assemble_full(mesh: Mesh, dilation: Dilation, eps: float, exterior_substituted: bool = True,
                  magnetic: bool = True):
    """Pencil over all mesh nodes, Dirichlet nodes included."""
    cx, cy, cq, cm = _weights(mesh, dilation, eps, exterior_substituted)
    a = mesh.quad_a if magnetic else np.zeros_like(mesh.quad_a)
    rq, cq_, aq, bq = assemble_quads(mesh.quad_conn, mesh.quad_hx, mesh.quad_hy, a, cx, cy, cq, cm)
    rows, cols, av, bv = [rq], [cq_], [aq], [bq]
    if len(mesh.tri_conn):
        nt = len(mesh.tri_conn)
        cs = np.ones(nt, complex)
        ctm = np.full(nt, eps * eps, complex)
        rt, ct, at, bt = assemble_tris(mesh.tri_conn, mesh.tri_xy, cs, ctm)
        rows.append(rt); cols.append(ct); av.append(at); bv.append(bt)
    rows = np.concatenate(rows); cols = np.concatenate(cols)
    N = mesh.n_nodes
    A = sp.coo_matrix((np.concatenate(av), (rows, cols)), shape=(N, N)).tocsr()
    B = sp.coo_matrix((np.concatenate(bv), (rows, cols)), shape=(N, N)).tocsr()
    A.sum_duplicates(); B.sum_duplicates()
    return A, B


def _dof_tags(mesh: Mesh):
    region = np.full(mesh.n_nodes, -1, np.int64)
    tag = np.full(mesh.n_nodes, -1, np.int64)
    # later assignments win: exterior < edge < patch, so interface nodes
    # belong to the region closer to the graph's core
    for kind in (EXTERIOR, EDGE):
        for sg in mesh.strips.values():
            if sg.kind == kind:
                region[sg.nodes.ravel()] = kind
                tag[sg.nodes.ravel()] = sg.edge
    for v, pg in mesh.patches.items():
        region[pg.nodes] = PATCH
        tag[pg.nodes] = v
    return region, tag


def assemble(mesh: Mesh, dilation: Dilation, eps: Optional[float] = None) -> FatGraphOperator:
    """Reduced pencil on the free dofs (Dirichlet rows/columns removed)."""
    eps = mesh.model.eps if eps is None else float(eps)
    if mesh.duplicated:
        return assemble_constrained(mesh, dilation, eps)
    A, B = assemble_full(mesh, dilation, eps)
    free = mesh.free_dofs()
    region, tag = _dof_tags(mesh)
    return FatGraphOperator(A[free][:, free].tocsr(), B[free][:, free].tocsr(), free, mesh,
                            dilation, eps, region[free], tag[free])


def assemble_constrained(mesh: Mesh, dilation: Dilation, eps: Optional[float] = None) -> FatGraphOperator:
    """Pencil with separate exterior interface nodes and explicit jump constraints.

    The exterior unknown is u_ext itself (unsubstituted weights) and its
    first node column is tied to the stub end by u_ext = e^{theta/2} u_int.
    The derivative jump u'_ext = e^{3 theta/2} u'_int is then the natural
    condition of the constrained form.  The reduced pencil is P^T A P,
    P^T B P with the bilinear transpose.
    """
    eps = mesh.model.eps if eps is None else float(eps)
    if not mesh.duplicated:
        raise ValueError("mesh has no duplicated interface nodes")
    A, B = assemble_full(mesh, dilation, eps, exterior_substituted=False)
    jv = complex(np.exp(complex(dilation.theta) / 2))
    N = mesh.n_nodes
    slave = {}
    for _, master_ids, slave_ids in mesh.interfaces:
        for m_, s_ in zip(master_ids, slave_ids):
            slave[int(s_)] = int(m_)
    dirich = set(int(i) for i in mesh.dirichlet)
    keep = [i for i in range(N) if i not in slave and i not in dirich]
    col = {g: j for j, g in enumerate(keep)}
    rows, cols, vals = [], [], []
    for g in keep:
        rows.append(g); cols.append(col[g]); vals.append(1.0)
    for s_, m_ in slave.items():
        if s_ in dirich:
            continue
        rows.append(s_); cols.append(col[m_]); vals.append(jv)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(N, len(keep)), dtype=complex)
    Ar = (P.T @ A @ P).tocsr()
    Br = (P.T @ B @ P).tocsr()
    region, tag = _dof_tags(mesh)
    keep = np.array(keep)
    return FatGraphOperator(Ar, Br, keep, mesh, dilation, eps, region[keep], tag[keep])
