"""Secular system of the exterior-dilated magnetic Kirchhoff Laplacian.

Unknowns: for every internal edge the pair (f(0), Df(0)) with
Df = f' - i a f; for every lead one amplitude c of the dilated outgoing
solution c * exp(i e^theta k x).  A vertex contributes deg(v) rows:
continuity between its slots and one current row.  At a boundary vertex the
two rows carry the e^{theta/2} value and e^{3 theta/2} derivative jumps.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .fields import EdgeFields, GaugedSystem, fields_for
from .graph import GraphDecomposition, MetricGraph, Slot
from .rootfind import NonConvergent, Rectangle, find_zeros, winding_count


class OutsideAdmissibleSector(ValueError):
    pass


@dataclass(frozen=True)
class Dilation:
    theta: complex = 0j
    sector_bound: float = math.pi

    def __post_init__(self):
        if not (0 <= self.sector_bound <= math.pi):
            raise ValueError("sector bound must lie in [0, pi]")
        if abs(complex(self.theta).imag) >= self.sector_bound / 2:
            raise ValueError(f"|Im theta| must be < {self.sector_bound / 2}")

    @property
    def factor(self) -> complex:
        return complex(np.exp(self.theta))

    def revealed(self, k: complex) -> bool:
        """Whether the outgoing solution at ``k`` decays after dilation."""
        return (self.factor * k).imag > 0

    def conj(self) -> "Dilation":
        return Dilation(complex(self.theta).conjugate(), self.sector_bound)


# -- single edge --------------------------------------------------------

def _cs(u: complex, L: float):
    """cos(sqrt(u) L), sin(sqrt(u) L)/sqrt(u) and their u-derivatives (entire in u)."""
    x = u * L * L
    if abs(x) < 1e-2:
        # Taylor series in x = u L^2; 12 terms are far below rounding
        c = S = dc = dS = 0j
        fc, fs = 1.0, 1.0  # (2n)!, (2n+1)!
        for n in range(12):
            c += (-x) ** n / fc
            S += (-x) ** n / fs
            if n:
                dc += n * (-1) ** n * x ** (n - 1) / fc
                dS += n * (-1) ** n * x ** (n - 1) / fs
            fc *= (2 * n + 1) * (2 * n + 2)
            fs *= (2 * n + 2) * (2 * n + 3)
        return c, L * S, L * L * dc, L ** 3 * dS
    kap = cmath.sqrt(u)
    c = cmath.cos(kap * L)
    S = cmath.sin(kap * L) / kap
    return c, S, -0.5 * L * S, (L * c - S) / (2 * u)


def transfer_matrix(a, q, k: complex, length: Optional[float] = None, deriv: bool = False):
    """Propagator of (f, Df) from x = 0 to x = l for -(d - i a)^2 f + q f = k^2 f.

    ``a`` and ``q`` are PiecewiseConstant on a common edge or plain numbers
    (then ``length`` is required).  Pieces are multiplied in order.  The
    determinant equals exp(2 i Phi_e(l)), which is 1 without magnetic field.
    """
    T, dT = _transfer_pieces(_merge(a, q, length), complex(k))
    T = np.array(T, dtype=complex).reshape(2, 2)
    dT = np.array(dT, dtype=complex).reshape(2, 2)
    return (T, dT) if deriv else T


def _transfer_pieces(pieces, k: complex):
    """Scalar fast path of transfer_matrix: (T, dT/dk) as flat 4-tuples."""
    t00, t01, t10, t11 = 1.0, 0.0, 0.0, 1.0
    d00 = d01 = d10 = d11 = 0.0
    for L, av, qv in pieces:
        u = k * k - qv
        c, S, dc, dS = _cs(u, L)
        ph = cmath.exp(1j * av * L)
        p00, p01, p10, p11 = ph * c, ph * S, -ph * u * S, ph * c
        two_k = 2 * k * ph
        q00, q01, q10, q11 = two_k * dc, two_k * dS, two_k * (-S - u * dS), two_k * dc
        # dT <- P dT + dP T ; T <- P T
        d00, d01, d10, d11 = (p00 * d00 + p01 * d10 + q00 * t00 + q01 * t10,
                              p00 * d01 + p01 * d11 + q00 * t01 + q01 * t11,
                              p10 * d00 + p11 * d10 + q10 * t00 + q11 * t10,
                              p10 * d01 + p11 * d11 + q10 * t01 + q11 * t11)
        t00, t01, t10, t11 = (p00 * t00 + p01 * t10, p00 * t01 + p01 * t11,
                              p10 * t00 + p11 * t10, p10 * t01 + p11 * t11)
    return (t00, t01, t10, t11), (d00, d01, d10, d11)


def _merge(a, q, length):
    if np.isscalar(a) and np.isscalar(q):
        if length is None:
            raise ValueError("length needed with scalar coefficients")
        return [(float(length), float(a), float(q))]
    if np.isscalar(a):
        return [(L, float(a), v) for _, L, v in q.pieces]
    if np.isscalar(q):
        return [(L, v, float(q)) for _, L, v in a.pieces]
    cuts = sorted(set(a.breaks) | set(q.breaks))
    out = []
    for x0, x1 in zip(cuts[:-1], cuts[1:]):
        if x1 - x0 <= 1e-15 * max(1.0, x1):
            continue
        xm = 0.5 * (x0 + x1)
        out.append((x1 - x0, float(a(xm)), float(q(xm))))
    return out


# -- system -------------------------------------------------------------

@dataclass
class SecularSystem:
    k: complex
    M: np.ndarray
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    dM: Optional[np.ndarray] = None

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.M))

    def dlog_det(self) -> complex:
        return complex(np.trace(np.linalg.solve(self.M, self.dM)))


class SecularModel:
    """Precomputed layout for repeated evaluation of M(k).

    ``gauge`` (optional) supplies per-slot phases; its fields replace
    ``fields``.  ``jumps=False`` sets the boundary-vertex jump factors to 1.
    """

    def __init__(self, decomp: GraphDecomposition, fields: Optional[EdgeFields] = None,
                 dilation: Dilation = Dilation(), gauge: Optional[GaugedSystem] = None,
                 jumps: bool = True):
        g = decomp.graph
        self.decomp = decomp
        self.graph = g
        self.dilation = dilation
        self.gauge = gauge
        if gauge is not None:
            fields = gauge.fields
        self.fields = fields_for(g, fields)
        self.jumps = jumps
        self.internal = list(g.internal_edges)
        self.external = list(g.external_edges)
        self.pieces = {e.id: _merge(self.fields.a[e.id], self.fields.q[e.id], None)
                       for e in self.internal}
        col = 0
        self.col_of = {}
        self.columns = []
        for e in self.internal:
            self.col_of[e.id] = col
            self.columns += [("value", e.id), ("derivative", e.id)]
            col += 2
        for e in self.external:
            self.col_of[e.id] = col
            self.columns.append(("amplitude", e.id))
            col += 1
        self.n = col
        self.boundary = set(decomp.boundary_vertices)
        th = complex(dilation.theta)
        jv = complex(np.exp(th / 2)) if jumps else 1.0
        jd = complex(np.exp(1.5 * th)) if jumps else 1.0
        self._ek = dilation.factor if jumps else 1.0
        ext_ids = {e.id for e in self.external}
        # each row is a list of (kind, slot, factor): factor * value(slot) or
        # factor * outward derivative(slot)
        self.rows = []
        self._terms = []
        for v in g.vertices:
            sl = g.slots(v)
            if not sl:
                continue
            xs = [t for t in sl if t.edge in ext_ids]
            ins = [t for t in sl if t.edge not in ext_ids]
            jump = v in self.boundary and len(xs) == 1 and len(ins) == 1
            for s in sl[1:]:
                self.rows.append(("continuity", v, sl[0], s))
                if jump:
                    self._terms.append([("val", xs[0], 1.0), ("val", ins[0], -jv)])
                else:
                    self._terms.append([("val", s, 1.0), ("val", sl[0], -1.0)])
            self.rows.append(("current", v, None, None))
            if jump:
                # the stub's lead-direction derivative is minus its outward one
                self._terms.append([("out", xs[0], 1.0), ("out", ins[0], jd)])
            else:
                self._terms.append([("out", t, 1.0) for t in sl])
        if len(self.rows) != self.n:
            raise ValueError("secular system is not square")
        for terms in self._terms:
            for i, (kind, slot, f) in enumerate(terms):
                terms[i] = (kind, slot, f * self._phase(slot))

    def _phase(self, s: Slot) -> complex:
        return self.gauge.phase(s) if self.gauge is not None else 1.0

    def _slot_entries(self, k: complex):
        """value/outward-derivative of each slot as [(col, coef, dcoef/dk)]."""
        val, out = {}, {}
        for e in self.internal:
            j = self.col_of[e.id]
            T, dT = _transfer_pieces(self.pieces[e.id], k)
            val[(e.id, 0)] = [(j, 1.0, 0.0)]
            out[(e.id, 0)] = [(j + 1, 1.0, 0.0)]
            val[(e.id, 1)] = [(j, T[0], dT[0]), (j + 1, T[1], dT[1])]
            out[(e.id, 1)] = [(j, -T[2], -dT[2]), (j + 1, -T[3], -dT[3])]
        ek = self._ek
        for e in self.external:
            j = self.col_of[e.id]
            val[(e.id, 0)] = [(j, 1.0, 0.0)]
            out[(e.id, 0)] = [(j, 1j * ek * k, 1j * ek)]
        return val, out

    def matrix(self, k: complex, deriv: bool = False, check: bool = False) -> SecularSystem:
        k = complex(k)
        if check and self.external and not self.dilation.revealed(k):
            raise OutsideAdmissibleSector(f"Im(e^theta k) <= 0 at k={k}")
        val, out = self._slot_entries(k)
        n = self.n
        M = np.zeros((n, n), complex)
        dM = np.zeros((n, n), complex)
        for r, terms in enumerate(self._terms):
            for kind, slot, f in terms:
                src = val if kind == "val" else out
                for c, a, da in src[(slot.edge, slot.end)]:
                    M[r, c] += f * a
                    dM[r, c] += f * da
        return SecularSystem(k, M, self.columns, self.rows, dM)

    def det(self, k: complex) -> complex:
        return complex(np.linalg.det(self.matrix(k).M))

    def dlog(self, k: complex) -> complex:
        return self.matrix(k, deriv=True).dlog_det()

    def residual(self, k: complex) -> float:
        """sigma_min / sigma_max of M(k).

        No row or column equilibration: at a loop eigenvalue both a
        continuity row and a derivative column of M vanish together, and
        either normalisation would blow that zero up.
        """
        s = np.linalg.svd(self.matrix(k).M, compute_uv=False)
        return float(s[-1] / s[0])

    def nullvector(self, k: complex) -> np.ndarray:
        """Unit amplitude vector spanning the (numerical) kernel of M(k)."""
        _, _, vh = np.linalg.svd(self.matrix(k).M)
        v = vh[-1].conj()
        return v / np.linalg.norm(v)

    def external_amplitude(self, vec: np.ndarray) -> float:
        if not self.external:
            return 0.0
        return float(max(abs(vec[self.col_of[e.id]]) for e in self.external))


def secular_matrix(decomp: GraphDecomposition, fields: Optional[EdgeFields], k: complex,
                   dilation: Dilation = Dilation(), gauge: Optional[GaugedSystem] = None,
                   check: bool = True) -> SecularSystem:
    return SecularModel(decomp, fields, dilation, gauge).matrix(k, deriv=True, check=check)


# -- resonances ---------------------------------------------------------

@dataclass
class Resonance:
    k: complex
    lam: complex
    residual: float
    multiplicity: int
    kind: str
    nullvector: np.ndarray
    revealed: bool = True

    @property
    def lambda_(self) -> complex:
        return self.lam


@dataclass
class ResonanceOptions:
    tol_k: float = 1e-10
    tol_det: float = 1e-10
    quad_tol: float = 1e-8
    exclude_origin: float = 1e-6
    embedded_tol: float = 1e-8
    workers: int = 1
    require_revealed: bool = False


@dataclass
class ResonanceReport:
    resonances: list
    count: int
    region: Rectangle


def find_resonances(decomp: GraphDecomposition, fields: Optional[EdgeFields], region: Rectangle,
                    dilation: Dilation = Dilation(), opts: Optional[ResonanceOptions] = None,
                    gauge: Optional[GaugedSystem] = None, report: bool = False):
    """Zeros of det M(k) in a k-rectangle, classified and sorted by (Re k, Im k).

    k = 0 is a branch point where det M may vanish spuriously; a region that
    contains it is rejected.  Zeros that the current dilation does not reveal
    (Im(e^theta k) <= 0) are still zeros of the continued determinant and are
    returned with ``revealed=False``; set ``opts.require_revealed`` to drop them.
    """
    opts = opts or ResonanceOptions()
    if region.contains(0j, pad=opts.exclude_origin):
        raise ValueError("search region must exclude k = 0")
    model = SecularModel(decomp, fields, dilation, gauge)
    zr = find_zeros(model.det, region, dlog=model.dlog, tol_k=opts.tol_k,
                    tol_f=opts.tol_det, quad_tol=opts.quad_tol, workers=opts.workers,
                    scale=model.residual)
    out = []
    for r in zr.roots:
        vec = model.nullvector(r.z)
        lam = r.z * r.z
        amp = model.external_amplitude(vec)
        embedded = abs(lam.imag) <= opts.embedded_tol * max(1.0, abs(lam)) and amp <= 1e-8
        if embedded:
            lam = complex(lam.real, 0.0)
        res = Resonance(r.z, lam, model.residual(r.z), r.multiplicity,
                        "embedded_eigenvalue" if embedded else "resonance", vec,
                        dilation.revealed(r.z) or embedded)
        if opts.require_revealed and not res.revealed:
            continue
        out.append(res)
    if report:
        return ResonanceReport(out, zr.count, zr.region)
    return out


def essential_spectrum_rays(dilation: Dilation, eps: float = 0.0, cap: float = 1e4):
    """Rays s + t e^{-2 theta}, t >= 0: one from 0 for eps = 0, else from (n pi / eps)^2."""
    direction = complex(np.exp(-2 * complex(dilation.theta)))
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0:
        return [(0j, direction)]
    rays = []
    n = 0
    while (n * math.pi / eps) ** 2 <= cap:
        rays.append((complex((n * math.pi / eps) ** 2), direction))
        n += 1
    return rays


@dataclass
class LassoClosedForm:
    ell: float
    flux: float
    embedded: list
    resonances: list

    def condition(self, k: complex) -> complex:
        """2 (cos k l - cos flux) - i sin k l."""
        return 2 * (np.cos(k * self.ell) - np.cos(self.flux)) - 1j * np.sin(k * self.ell)

    def parabola(self, lam: complex) -> complex:
        c = math.log(3) / self.ell
        return lam.imag + 2 * c * np.sqrt(lam.real + c * c)


def lasso_closed_form(ell: float = 1.0, flux: float = 0.0, j_range: Sequence[int] = range(0, 3)
                      ) -> LassoClosedForm:
    if ell <= 0:
        raise ValueError("ell must be positive")
    emb, res = [], []
    if math.isclose(math.fmod(flux, 2 * math.pi), 0.0, abs_tol=1e-15):
        for j in j_range:
            if j != 0:
                emb.append((2 * math.pi * j / ell) ** 2)
            res.append(((2 * math.pi * j - 1j * math.log(3)) / ell) ** 2)
    return LassoClosedForm(ell, flux, emb, res)
