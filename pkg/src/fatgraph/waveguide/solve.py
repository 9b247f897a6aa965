"""Eigenpairs of the waveguide pencil near a shift, and resonance filtering."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..secular import Dilation, Resonance, essential_spectrum_rays
from .assembly import FatGraphOperator, assemble
from .mesh import EXTERIOR


class FactorizationFailed(RuntimeError):
    pass


class NotConverged(RuntimeError):
    pass


@dataclass
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray       # columns, B-bilinear normalised: u^T B u = 1
    residuals: np.ndarray
    op: Optional[FatGraphOperator] = None
    shift: complex = 0j

    def __len__(self):
        return len(self.values)


def _residuals(A, B, lam, U):
    R = A @ U - (B @ U) * lam[None, :]
    return np.linalg.norm(R, axis=0) / np.maximum(np.linalg.norm(B @ U, axis=0), 1e-300)


def _normalise(B, U):
    # bilinear (complex-symmetric) normalisation; fall back to Hermitian
    for j in range(U.shape[1]):
        u = U[:, j]
        s = u @ (B @ u)
        if abs(s) > 1e-14 * np.vdot(u, B @ u).real:
            U[:, j] = u / np.sqrt(s)
        else:
            U[:, j] = u / np.sqrt(abs(np.vdot(u, B @ u)))
    return U


def solve_eigs(op, shift: complex, count: int = 6, dense_below: int = 2000,
               tol: float = 1e-8, retries: int = 3, seed: int = 0, B=None) -> EigenPairs:
    """The ``count`` eigenpairs of (A, B) closest to ``shift``.

    ``op`` is a FatGraphOperator or a matrix A (then ``B`` defaults to I).
    Uses a dense QZ solve below ``dense_below`` unknowns and sparse
    shift-invert Arnoldi (sparse LU of A - shift B) above.
    """
    if isinstance(op, FatGraphOperator):
        A, B = op.A, op.B
    else:
        A = sp.csr_matrix(op)
        B = sp.identity(A.shape[0], format="csr") if B is None else sp.csr_matrix(B)
        op = None
    n = A.shape[0]
    count = min(count, n)
    sigma = complex(shift)
    rng = np.random.default_rng(seed)
    if n <= dense_below:
        # B is a nonsingular mass matrix, so reduce to the standard problem:
        # LAPACK's generalized complex QZ is an order of magnitude slower
        Bd = B.toarray().astype(complex)
        C = la.lu_solve(la.lu_factor(Bd), A.toarray().astype(complex))
        w, V = la.eig(C)
        ok = np.isfinite(w)
        w, V = w[ok], V[:, ok]
        idx = np.argsort(np.abs(w - sigma), kind="stable")[:count]
        lam, U = w[idx], V[:, idx].astype(complex)
    else:
        last = None
        for attempt in range(retries + 1):
            s = sigma if attempt == 0 else sigma + (rng.normal() + 1j * rng.normal()) * 1e-6 * max(1.0, abs(sigma)) * 10 ** attempt
            try:
                lu = spla.splu((A - s * B).tocsc().astype(complex))
            except RuntimeError as exc:
                last = exc
                continue
            Bc = B.astype(complex)
            opinv = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(Bc @ x), dtype=complex)
            try:
                v0 = rng.normal(size=n) + 0j
                nu, V = spla.eigs(opinv, k=count, which="LM", v0=v0, tol=1e-13,
                                  ncv=max(2 * count + 1, 20))
            except spla.ArpackNoConvergence as exc:
                last = exc
                continue
            lam = s + 1.0 / nu
            idx = np.argsort(np.abs(lam - sigma), kind="stable")
            lam, U = lam[idx], V[:, idx]
            break
        else:
            if isinstance(last, RuntimeError) and not isinstance(last, spla.ArpackNoConvergence):
                raise FactorizationFailed(f"LU of A - shift B failed near {sigma}") from last
            raise NotConverged(f"Arnoldi did not converge near {sigma}") from last
    U = _normalise(B, np.array(U, dtype=complex))
    res = _residuals(A, B, lam, U)
    bad = res >= tol
    if np.any(bad):
        # one step of inverse iteration with the Rayleigh-type quotient
        for j in np.flatnonzero(bad):
            lam[j], U[:, j] = _polish(A, B, lam[j], U[:, j])
        U = _normalise(B, U)
        res = _residuals(A, B, lam, U)
        if np.any(res >= tol):
            raise NotConverged(f"residuals {res[res >= tol]} above {tol}")
    return EigenPairs(np.asarray(lam), U, res, op, sigma)


def _polish(A, B, lam, u, steps: int = 3):
    for _ in range(steps):
        lu = spla.splu((A - lam * (1 + 1e-12) * B).tocsc().astype(complex))
        u = lu.solve(B @ u)
        u = u / np.linalg.norm(u)
        num = u @ (A @ u)
        den = u @ (B @ u)
        if abs(den) < 1e-300:
            break
        lam = num / den
    return lam, u


@dataclass
class Candidate(Resonance):
    tail_mass: float = 0.0
    kept: bool = True
    reason: str = ""
    index: int = -1


def tail_mass(op: FatGraphOperator, u: np.ndarray, cut: Optional[float] = None) -> float:
    """Fraction of |u|^2 (B at theta = 0) beyond ``cut`` (default L_ext / 2) on the leads."""
    mesh = op.mesh
    L = mesh.model.L_ext
    cut = 0.5 * L if cut is None else cut
    full = op.expand(u)
    far = np.zeros(mesh.n_nodes, bool)
    for sg in mesh.strips.values():
        if sg.kind == EXTERIOR:
            far[sg.nodes[sg.x > cut].ravel()] = True
    w = _nodal_weights(mesh)
    tot = float(np.sum(w * np.abs(full) ** 2))
    return float(np.sum((w * np.abs(full) ** 2)[far]) / tot) if tot > 0 else 0.0


def _nodal_weights(mesh):
    """Lumped reference areas times the volume density (eps or eps^2)."""
    eps = mesh.model.eps
    w = np.zeros(mesh.n_nodes)
    area = mesh.quad_hx * mesh.quad_hy
    dens = np.where(mesh.quad_region == 2, eps * eps, eps)
    np.add.at(w, mesh.quad_conn, (area * dens / 4)[:, None])
    if len(mesh.tri_conn):
        P = mesh.tri_xy
        d1 = P[:, 1] - P[:, 0]
        d2 = P[:, 2] - P[:, 0]
        ta = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        np.add.at(w, mesh.tri_conn, (ta * eps * eps / 3)[:, None])
    return w


def theta_companion(op: FatGraphOperator, shift: complex, count: int = 6,
                    dtheta: float = 0.1, **kw) -> EigenPairs:
    """Eigenpairs of the same mesh at a slightly larger rotation angle.

    Dilated eigenvalues do not depend on theta, while a truncated lead's
    discrete continuum turns with it; comparing the two spectra separates them.
    """
    th = complex(op.dilation.theta)
    step = dtheta if th.imag >= 0 else -dtheta
    im = th.imag + step
    bound = 0.5 * math.pi - 1e-3
    im = max(-bound, min(bound, im))
    other = assemble(op.mesh, Dilation(complex(th.real, im), op.dilation.sector_bound), op.eps)
    return solve_eigs(other, shift, count=count, **kw)


def filter_resonances(pairs: EigenPairs, dilation: Dilation, eps: float, region=None,
                      margin: float = 0.05, tail_threshold: float = 0.5, cap: float = 1e5,
                      companion: Optional[EigenPairs] = None, drift_tol: float = 1e-2):
    """Tag every eigenvalue as kept or dropped.

    Dropped are eigenvalues whose argument relative to a threshold
    (n pi / eps)^2 is within ``margin`` of the rotated ray direction
    -2 Im(theta), and eigenvectors with more than ``tail_threshold`` of their
    mass beyond L_ext / 2 on the leads.  With a ``companion`` spectrum (same
    mesh, another theta, see theta_companion) eigenvalues without a partner
    within ``drift_tol * |lambda|`` are dropped as discrete continuum.
    ``margin = 0`` disables filtering.
    ``region`` = (re0, re1, im0, im1) in the lambda-plane drops the rest.
    Returns a list of Candidate.
    """
    rays = essential_spectrum_rays(dilation, eps, cap=max(cap, max(abs(pairs.values), default=0) * 2))
    if pairs.op is not None and not np.any(pairs.op.region == EXTERIOR):
        rays = []  # no leads: the spectrum is purely discrete
    out = []
    for j, lam in enumerate(pairs.values):
        lam = complex(lam)
        u = pairs.vectors[:, j]
        tm = tail_mass(pairs.op, u) if pairs.op is not None else 0.0
        kept, reason = True, ""
        if margin > 0:
            for s, d in rays:
                z = lam - s
                if abs(z) < 1e-12 * max(1.0, abs(s)):
                    kept, reason = False, "threshold"
                    break
                dang = abs(np.angle(z / d))
                if dang < margin:
                    kept, reason = False, "essential ray"
                    break
            if kept and tm > tail_threshold:
                kept, reason = False, "exterior tail"
            if kept and companion is not None and len(companion.values):
                drift = float(np.min(np.abs(np.asarray(companion.values) - lam)))
                if drift > drift_tol * abs(lam):
                    kept, reason = False, "theta drift"
        if kept and region is not None:
            re0, re1, im0, im1 = region
            if not (re0 <= lam.real <= re1 and im0 <= lam.imag <= im1):
                kept, reason = False, "outside region"
        k = complex(np.sqrt(lam))
        if k.real < 0:
            k = -k
        kind = "embedded_eigenvalue" if abs(lam.imag) < 1e-8 * max(1.0, abs(lam)) else "resonance"
        out.append(Candidate(k, lam, float(pairs.residuals[j]), 1, kind, u,
                             dilation.revealed(k), tail_mass=tm, kept=kept, reason=reason, index=j))
    return out
