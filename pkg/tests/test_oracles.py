"""Reference values computed independently of the package code paths.

Each oracle is a small brute-force or textbook computation; the package
results are compared against it.
"""
import itertools
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from fatgraph.fields import EdgeFields
from fatgraph.graph import MetricGraph, cycle_basis, interval, lasso, normalize_and_decompose, theta_graph
from fatgraph.rootfind import Rectangle, winding_count
from fatgraph.secular import Dilation, find_resonances, transfer_matrix
from fatgraph.waveguide import assemble, build_model, generate_mesh, solve_eigs

from conftest import LN3, flux_lasso


# -- flux pi/3 lasso: quadratic in z = e^{ik} ------------------------------

def quadratic_oracle(kmax: float = 14.0):
    """Roots of 2 (cos k - 1/2) = i sin k via z = e^{ik}: z^2 - 2 z + 3 = 0."""
    zs = np.roots([1.0, -2.0, 3.0])
    out = []
    for z in zs:
        base = -1j * np.log(z)
        for n in range(-3, 4):
            k = base + 2 * math.pi * n
            if 0 < k.real < kmax:
                out.append(complex(k))
    return sorted(out, key=lambda k: k.real)


def test_quadratic_oracle_is_self_consistent():
    ks = quadratic_oracle()
    assert len(ks) == 5
    for k in ks:
        assert abs(2 * (np.cos(k) - 0.5) - 1j * np.sin(k)) < 1e-12
        assert abs(k.imag + LN3 / 2) < 1e-14
        r = math.fmod(k.real, 2 * math.pi)
        assert min(abs(r - math.atan(math.sqrt(2))), abs(r - (2 * math.pi - math.atan(math.sqrt(2))))) < 1e-12


def test_flux_lasso_matches_quadratic_oracle():
    g, f = flux_lasso(math.pi / 3)
    d = normalize_and_decompose(g)
    found = find_resonances(d, f, Rectangle(0.3, 14.0, -1.5, -0.2), Dilation(0.8j))
    ks = [r.k for r in found]
    oracle = quadratic_oracle()
    assert len(ks) == len(oracle)
    for k, ko in zip(ks, oracle):
        assert abs(k - ko) <= 1e-8 * abs(ko)


# -- transfer matrix against adaptive integration -----------------------------

def ode_transfer(a_pieces, q_pieces, k, length):
    """(f, Df) propagator from integrating f' = Df + i a f, (Df)' = i a Df + (q - k^2) f."""
    def coeff(pieces, x):
        n = len(pieces)
        return pieces[min(int(x / length * n), n - 1)]

    breaks = sorted(set(np.linspace(0, length, len(a_pieces) + 1)) | set(np.linspace(0, length, len(q_pieces) + 1)))
    cols = []
    for y0 in (np.array([1, 0], complex), np.array([0, 1], complex)):
        y = y0
        for x0, x1 in zip(breaks[:-1], breaks[1:]):
            xm = 0.5 * (x0 + x1)
            a, q = coeff(a_pieces, xm), coeff(q_pieces, xm)
            rhs = lambda x, u, a=a, q=q: np.array([u[1] + 1j * a * u[0], 1j * a * u[1] + (q - k * k) * u[0]])
            y = solve_ivp(rhs, (x0, x1), y, method="DOP853", rtol=1e-13, atol=1e-14).y[:, -1]
        cols.append(y)
    return np.array(cols).T


@pytest.mark.parametrize("a,q,k", [((1.3,), (0.0,), 2.1 - 0.4j), ((0.7, -0.4), (0.0, 2.0), 3.3 - 1.1j),
                                    ((0.0,), (5.0, 0.5, 1.0), 0.9 + 0.2j)])
def test_transfer_matrix_against_ode(a, q, k):
    from fatgraph.fields import PiecewiseConstant
    L = 1.7
    T = transfer_matrix(PiecewiseConstant.uniform(L, a), PiecewiseConstant.uniform(L, q), k)
    ref = ode_transfer(a, q, k, L)
    assert np.max(np.abs(T - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))


# -- cycle space by enumeration of edge subsets --------------------------------

def brute_force_cycle_rank(graph: MetricGraph) -> int:
    """log2 of the number of even-degree edge subsets (the GF(2) cycle space)."""
    edges = graph.internal_edges
    count = 0
    for mask in itertools.product((0, 1), repeat=len(edges)):
        deg = {v: 0 for v in graph.vertices}
        for m, e in zip(mask, edges):
            if m:
                deg[e.src] += 1
                deg[e.dst] += 1
        count += all(d % 2 == 0 for d in deg.values())
    return int(round(math.log2(count)))


@pytest.mark.parametrize("graph", [theta_graph(), lasso(), interval(),
                                   MetricGraph.build([0, 1, 2], [(0, 0, 1, 1), (1, 1, 2, 1), (2, 2, 0, 1),
                                                                 (3, 0, 0, 1), (4, 1, 2, 2), (5, 2, None, 0)])])
def test_cycle_basis_matches_enumeration(graph):
    assert len(cycle_basis(graph)) == brute_force_cycle_rank(graph)


# -- polynomial roots against companion eigenvalues ----------------------------

def test_winding_count_matches_companion_roots(rng):
    for deg in range(1, 7):
        c = rng.standard_normal(deg + 1) + 1j * rng.standard_normal(deg + 1)
        roots = np.roots(c)
        R = 1.0 + np.max(np.abs(roots))
        box = Rectangle(-R, R, -R, R)
        assert winding_count(lambda z: np.polyval(c, z), box) == deg
        inner = Rectangle(-0.5, 0.5, -0.5, 0.5)
        if np.all(np.abs(np.abs(roots.real) - 0.5) > 1e-3) and np.all(np.abs(np.abs(roots.imag) - 0.5) > 1e-3):
            expect = int(np.sum((np.abs(roots.real) < 0.5) & (np.abs(roots.imag) < 0.5)))
            assert winding_count(lambda z: np.polyval(c, z), inner) == expect


# -- Neumann interval spectrum ---------------------------------------------------

def test_thin_interval_spectrum_near_neumann_closed_form():
    d = normalize_and_decompose(interval(1.0, 0.02))
    op = assemble(generate_mesh(build_model(d, None, 0.1), 0.02), Dilation())
    w = np.sort(solve_eigs(op, 0.0, count=4).values.real)
    assert abs(w[0]) < 1e-8
    for j in (1, 2, 3):
        assert abs(w[j] - (j * math.pi) ** 2) < 0.01 * (j * math.pi) ** 2


def test_richardson_second_order_on_interval():
    d = normalize_and_decompose(interval(1.0, 0.1))
    model = build_model(d, None, 0.1)
    lam = []
    for h in (0.1, 0.05, 0.025):
        op = assemble(generate_mesh(model, h), Dilation())
        lam.append(np.sort(solve_eigs(op, 10.0, count=1).values.real)[0])
    ratio = (lam[0] - lam[1]) / (lam[1] - lam[2])
    assert 3.0 < ratio < 5.0


# -- triangle angles -------------------------------------------------------------

def test_lasso_patch_angles_by_direct_audit():
    d = normalize_and_decompose(lasso(1.0, 0.5))
    mesh = generate_mesh(build_model(d, None, 0.1), 0.05)
    P = mesh.tri_xy
    smallest = 180.0
    for tri in P:
        for i in range(3):
            u, w = tri[(i + 1) % 3] - tri[i], tri[(i + 2) % 3] - tri[i]
            ang = math.degrees(math.acos(np.dot(u, w) / (np.linalg.norm(u) * np.linalg.norm(w))))
            smallest = min(smallest, ang)
    assert smallest >= 20.0
