"""Zero counting and refinement for holomorphic functions on rectangles.

The count uses the argument principle, integrating f'/f along the sides of
an axis-aligned rectangle with adaptive Gauss-Kronrod (7/15) quadrature.
Cells are split as a quadtree until each holds at most one zero; every zero
is then seeded by the first contour moment and polished by Newton steps,
with a Muller fallback.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Gauss-Kronrod 7/15 nodes and weights on [-1, 1]
_XK = np.array([
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245, 0.405845151377397166906606412076961,
    0.586087235467691130294144845693013, 0.741531185599394439863864773280788,
    0.864864423359769072789712788640926, 0.949107912342758524526189684047851,
    0.991455371120812639206854697526329])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
    0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
    0.129484966168869693270611432679082])


class RootFindError(RuntimeError):
    pass


class ContourThroughZero(RootFindError):
    """f vanishes (numerically) on the contour even after nudging."""


class QuadratureStall(RootFindError):
    """Adaptive quadrature exceeded its refinement budget."""


class NonConvergent(RootFindError):
    """Refinement failed, or the refined roots disagree with the count."""


class _NearZero(Exception):
    pass


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned box [re0, re1] x [im0, im1], traversed counterclockwise."""

    re0: float
    re1: float
    im0: float
    im1: float

    def __post_init__(self):
        if not (self.re1 > self.re0 and self.im1 > self.im0):
            raise ValueError("rectangle must have positive area")

    @property
    def corners(self) -> tuple[complex, complex, complex, complex]:
        return (complex(self.re0, self.im0), complex(self.re1, self.im0),
                complex(self.re1, self.im1), complex(self.re0, self.im1))

    @property
    def diameter(self) -> float:
        return math.hypot(self.re1 - self.re0, self.im1 - self.im0)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.re0 - pad <= z.real <= self.re1 + pad
                and self.im0 - pad <= z.imag <= self.im1 + pad)

    def grown(self, d: float) -> "Rectangle":
        return Rectangle(self.re0 - d, self.re1 + d, self.im0 - d, self.im1 + d)

    def quarters(self, fx: float = 0.5, fy: float = 0.5) -> list["Rectangle"]:
        xm = self.re0 + fx * (self.re1 - self.re0)
        ym = self.im0 + fy * (self.im1 - self.im0)
        return [Rectangle(self.re0, xm, self.im0, ym), Rectangle(xm, self.re1, self.im0, ym),
                Rectangle(xm, self.re1, ym, self.im1), Rectangle(self.re0, xm, ym, self.im1)]


@dataclass
class RefinedRoot:
    z: complex
    multiplicity: int
    residual: float
    iterations: int


@dataclass
class ZeroReport:
    count: int
    roots: list[RefinedRoot] = field(default_factory=list)
    depth: int = 0
    region: Optional[Rectangle] = None


def cauchy_derivative(f: Callable, z: complex, radius: float = 1e-3, n: int = 16) -> complex:
    """f'(z) from the trapezoid rule on a small circle (Lyness-Moler).

    Exact up to O(radius^n) for holomorphic f; works for complex-valued f,
    where the real-axis complex-step trick does not apply.
    """
    r = radius * max(1.0, abs(z))
    w = np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.array([f(z + r * wj) for wj in w])
    return complex(np.sum(vals / w) / (n * r))


def _make_dlog(f, dlog):
    if dlog is not None:
        return dlog

    def g(z):
        fz = f(z)
        if fz == 0:
            raise _NearZero
        return cauchy_derivative(f, z) / fz
    return g


def _segment_rule(g, a: complex, b: complex, moment: int):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    zs = mid + half * _XK
    vals = np.empty(15, dtype=complex)
    for i, z in enumerate(zs):
        v = g(z)
        if not np.isfinite(v):
            raise _NearZero
        vals[i] = v * z**moment if moment else v
    k = half * np.dot(_WK, vals)
    gq = half * np.dot(_WG, vals[1::2])
    # a zero near the segment makes the integrand spike on the segment scale
    if np.max(np.abs(vals)) * abs(half) > 1e4 * max(1, abs(mid)) ** moment:
        raise _NearZero
    return k, abs(k - gq)


def _integrate_side(g, a, b, moment, atol, budget):
    """Adaptive GK15 of g(z) z^moment dz on the segment [a, b]."""
    stack = [(a, b)]
    total = 0j
    used = 0
    while stack:
        p, q = stack.pop()
        val, err = _segment_rule(g, p, q, moment)
        used += 1
        if used > budget:
            raise QuadratureStall(f"more than {budget} panels on side {a}->{b}")
        if err <= atol * abs(q - p):
            total += val
        elif abs(q - p) < 1e-9 * abs(b - a):
            # refinement piles up at one point: a zero sits on the contour
            raise _NearZero
        else:
            m = 0.5 * (p + q)
            stack.append((m, q))
            stack.append((p, m))
    return total


def contour_moments(g, rect: Rectangle, moments=(0,), tol: float = 1e-8, budget: int = 4000):
    """(1/2 pi i) * integral of g(z) z^m dz around rect for each m.

    ``g`` is the logarithmic derivative f'/f.  Raises _NearZero when the
    integrand blows up on the contour.
    """
    c = rect.corners
    sides = [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
    per = 2 * (rect.re1 - rect.re0 + rect.im1 - rect.im0)
    out = []
    for m in moments:
        atol = tol * 2 * np.pi / per * max(1.0, abs(rect.center)) ** m
        s = sum(_integrate_side(g, a, b, m, atol, budget) for a, b in sides)
        out.append(s / (2j * np.pi))
    return out


def _count_on(g, rect, tol, round_tol, budget):
    (n,) = contour_moments(g, rect, (0,), tol=tol, budget=budget)
    tight = tol
    while abs(n - round(n.real)) > round_tol or abs(n.imag) > round_tol:
        tight *= 0.01
        if tight < 1e-15:
            raise QuadratureStall(f"winding number {n} does not settle near an integer")
        (n,) = contour_moments(g, rect, (0,), tol=tight, budget=budget)
    return int(round(n.real))


def _nudge(rect: Rectangle, attempt: int) -> Rectangle:
    sign = -1 if attempt % 2 else 1
    return rect.grown(sign * ((attempt + 1) // 2) * 1e-3 * rect.diameter)


def winding_count(f: Callable, rect: Rectangle, tol: float = 1e-3, dlog: Optional[Callable] = None,
                  quad_tol: float = 1e-8, max_nudges: int = 8, budget: int = 4000,
                  return_rect: bool = False):
    """Number of zeros of holomorphic ``f`` inside ``rect`` (argument principle).

    If the contour passes too close to a zero the rectangle is grown or shrunk
    by multiples of 1e-3 of its diameter, up to ``max_nudges`` times.
    """
    g = _make_dlog(f, dlog)
    r = rect
    for attempt in range(max_nudges + 1):
        try:
            n = _count_on(g, r, quad_tol, tol, budget)
            return (n, r) if return_rect else n
        except _NearZero:
            r = _nudge(rect, attempt + 1)
    raise ContourThroughZero(f"contour of {rect} hits a zero after {max_nudges} nudges")


def _muller(f, z0, z1, z2, tol_k, max_iter):
    f0, f1, f2 = f(z0), f(z1), f(z2)
    for it in range(max_iter):
        h1, h2 = z1 - z0, z2 - z1
        if h1 == 0 or h2 == 0 or h1 + h2 == 0:
            break
        d1, d2 = (f1 - f0) / h1, (f2 - f1) / h2
        a = (d2 - d1) / (h2 + h1)
        b = a * h2 + d2
        disc = np.sqrt(b * b - 4 * f2 * a + 0j)
        den = b + disc if abs(b + disc) >= abs(b - disc) else b - disc
        if den == 0:
            break
        dz = -2 * f2 / den
        z0, z1, z2 = z1, z2, z2 + dz
        f0, f1, f2 = f1, f2, f(z2)
        if abs(dz) < tol_k or f2 == 0:
            return complex(z2), it + 1, True
    return complex(z2), max_iter, False


def refine_root(f: Callable, k0: complex, tol_k: float = 1e-10, tol_f: Optional[float] = 1e-10,
                dlog: Optional[Callable] = None, df: Optional[Callable] = None,
                multiplicity: int = 1, max_iter: int = 50, cell: Optional[Rectangle] = None,
                scale: Optional[Callable] = None) -> RefinedRoot:
    """Polish a root of ``f`` near ``k0``.

    Newton steps use ``dlog`` (= f'/f) when given, then ``df``, then a Cauchy
    derivative.  After three steps that fail to reduce |f| the iteration
    switches to Muller's method.  ``scale(z)`` optionally maps |f| to a
    dimensionless residual for the ``tol_f`` test.
    """
    m = max(1, int(multiplicity))
    z = complex(k0)
    if dlog is None:
        if df is not None:
            dlog = lambda w: df(w) / f(w)
        else:
            dlog = _make_dlog(f, None)
    resid = scale if scale is not None else (lambda w: abs(f(w)))
    fails = 0
    last = abs(f(z))
    step = math.inf
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        try:
            d = dlog(z)
        except _NearZero:
            converged = True
            step = 0.0
            break
        if d == 0 or not np.isfinite(d):
            fails += 1
        else:
            step = -m / d
            znew = z + step
            fnew = abs(f(znew))
            if fnew > last and abs(step) > tol_k:
                fails += 1
            z, last = znew, fnew
            if abs(step) < tol_k:
                converged = True
                break
        if fails >= 3:
            h = max(1e-4, 10 * abs(step) if np.isfinite(step) else 1e-3)
            z, extra, ok = _muller(f, z - h, z + h, z, tol_k, max_iter - it)
            it += extra
            if ok:
                # one closing Newton step when possible, so the step test is honest
                try:
                    d = dlog(z)
                    if d != 0 and np.isfinite(d) and abs(m / d) < 10 * tol_k:
                        z = z - m / d
                        step = abs(m / d)
                    else:
                        step = 0.0
                except _NearZero:
                    step = 0.0
                converged = True
            break
    r = resid(z)
    if not converged or (tol_f is not None and r > tol_f and multiplicity == 1):
        raise NonConvergent(f"no convergence from {k0}: z={z}, residual={r:.3e}, step={step}")
    if cell is not None and not cell.contains(z, pad=1e-6 * cell.diameter + tol_k):
        raise NonConvergent(f"root {z} left its seeding cell {cell}")
    return RefinedRoot(z, m, float(r), it)


def find_zeros(f: Callable, rect: Rectangle, dlog: Optional[Callable] = None,
               tol_k: float = 1e-10, tol_f: Optional[float] = 1e-10, quad_tol: float = 1e-8,
               cluster_diameter: float = 1e-7, max_depth: int = 40, workers: int = 1,
               scale: Optional[Callable] = None) -> ZeroReport:
    """All zeros of ``f`` in ``rect`` with multiplicities.

    Raises NonConvergent unless the refined multiplicities add up to the
    winding count of the (possibly nudged) outer contour.
    """
    g = _make_dlog(f, dlog)
    total, outer = winding_count(f, rect, dlog=g, quad_tol=quad_tol, return_rect=True)
    leaves: list[tuple[Rectangle, int]] = []
    depth = 0

    def split(cell, n, d):
        nonlocal depth
        depth = max(depth, d)
        if n == 0:
            return
        if n == 1 or cell.diameter < cluster_diameter or d >= max_depth:
            leaves.append((cell, n))
            return
        # off-centre splits keep the cut lines off symmetry axes (e.g. Im k = 0)
        for fx, fy in ((0.5037, 0.4969), (0.5113, 0.4907), (0.4871, 0.5173), (0.5291, 0.4733)):
            try:
                kids = cell.quarters(fx, fy)
                counts = [_count_on(g, c, quad_tol, 1e-3, 4000) for c in kids]
            except (_NearZero, QuadratureStall):
                continue
            if sum(counts) != n:
                continue
            for c, cn in zip(kids, counts):
                split(c, cn, d + 1)
            return
        raise ContourThroughZero(f"cannot split {cell} cleanly")

    split(outer, total, 0)

    def polish(item):
        cell, n = item
        mom = contour_moments(g, cell, (0, 1), tol=quad_tol)
        seed = mom[1] / mom[0] if abs(mom[0]) > 0.5 else cell.center
        if not cell.contains(seed):
            seed = cell.center
        return refine_root(f, seed, tol_k=tol_k, tol_f=tol_f, dlog=g, multiplicity=n,
                           cell=cell, scale=scale)

    if workers > 1 and len(leaves) > 1:
        with ThreadPoolExecutor(workers) as ex:
            roots = list(ex.map(polish, leaves))
    else:
        roots = [polish(x) for x in leaves]
    roots.sort(key=lambda r: (round(r.z.real, 12), round(r.z.imag, 12)))
    if sum(r.multiplicity for r in roots) != total:
        raise NonConvergent(f"count {total} but refined {len(roots)} roots")
    return ZeroReport(total, roots, depth, outer)
