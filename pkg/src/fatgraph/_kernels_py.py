"""Numpy reference versions of the element assembly kernels."""
import numpy as np


def assemble_quads(conn, hx, hy, a, cx, cy, cq, cm):
    """Triplets for bilinear quads on axis-aligned rectangles hx x hy.

    Local node l = ix + 2 iy.  The stiffness is
    cx * (d_x - i a)(d_x + i a) (x) mass_y + cy * mass_x (x) stiff_y + cq * mass,
    with every 1D integral exact for constant ``a``.
    """
    conn = np.asarray(conn, dtype=np.int64)
    n = conn.shape[0]
    hx = np.asarray(hx, float)[:, None, None]
    hy = np.asarray(hy, float)[:, None, None]
    a = np.asarray(a, float)[:, None, None]
    K1 = np.array([[1.0, -1.0], [-1.0, 1.0]])
    M1 = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    R1 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    X = K1 / hx + a * a * M1 * hx + 1j * a * R1
    Mx = M1 * hx
    Ky = K1 / hy
    My = M1 * hy
    kron = lambda Y, Xm: np.einsum("nab,ncd->nacbd", Y, Xm).reshape(n, 4, 4)
    mass = kron(My, Mx)
    A = (np.asarray(cx)[:, None, None] * kron(My, X)
         + np.asarray(cy)[:, None, None] * kron(Ky, Mx)
         + np.asarray(cq)[:, None, None] * mass)
    B = np.asarray(cm)[:, None, None] * mass
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    return rows, cols, A.astype(complex).ravel(), B.astype(complex).ravel()


def assemble_tris(conn, xy, cs, cm):
    """Triplets for P1 triangles: cs * grad.grad + cm * mass."""
    conn = np.asarray(conn, dtype=np.int64)
    xy = np.asarray(xy, float)
    n = conn.shape[0]
    d1 = xy[:, 1] - xy[:, 0]
    d2 = xy[:, 2] - xy[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * np.abs(det)
    # gradients of barycentric coordinates
    g = np.empty((n, 3, 2))
    g[:, 1, 0] = d2[:, 1] / det
    g[:, 1, 1] = -d2[:, 0] / det
    g[:, 2, 0] = -d1[:, 1] / det
    g[:, 2, 1] = d1[:, 0] / det
    g[:, 0] = -g[:, 1] - g[:, 2]
    K = np.einsum("nid,njd->nij", g, g) * area[:, None, None]
    M = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12.0)[:, None, None]
    A = np.asarray(cs)[:, None, None] * K
    B = np.asarray(cm)[:, None, None] * M
    rows = np.repeat(conn, 3, axis=1).ravel()
    cols = np.tile(conn, (1, 3)).ravel()
    return rows, cols, A.astype(complex).ravel(), B.astype(complex).ravel()
