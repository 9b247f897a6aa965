import math

import numpy as np
import pytest

from fatgraph.closeness import (ContourOnSpectrum, IncompatibleDecomposition, ShiftOnSpectrum,
                                broken_waveguide, build_maps, delta_report, eigenvector_match,
                                projection_diff, resolvent_diff_norm, smoothstep_cutoff)
from fatgraph.graph import half_line, interval, lasso, normalize_and_decompose
from fatgraph.graphfem import discretize_graph, graph_eigs, graph_for_mesh
from fatgraph.secular import Dilation
from fatgraph.waveguide import assemble, build_model, generate_mesh, solve_eigs

from conftest import EPS_SERIES, LN3, lasso_resonance, waveguide_op


def interval_maps(eps=0.1, theta=0j, h=0.05):
    d = normalize_and_decompose(interval(1.0, 0.1))
    op = assemble(generate_mesh(build_model(d, None, eps), h), Dilation(theta))
    return build_maps(None, op)


def strip_values(maps, eid, fn):
    """Broken waveguide vector equal to fn(x, y) on one strip, zero elsewhere."""
    sg = maps.mesh.strips[eid]
    u = np.zeros(maps.broken.n, complex)
    X, Y = np.meshgrid(sg.x, sg.y, indexing="ij")
    u[maps.broken.strip_ids[eid]] = fn(X, Y)
    return u


def gram_norm(G, v):
    return math.sqrt(abs(np.vdot(v, G @ v)))


# -- maps -------------------------------------------------------------------

def test_constant_function_keeps_its_norm():
    m = interval_maps()
    f = np.ones(m.graph.n_broken)
    assert abs(gram_norm(m.broken.gram0, m.J @ f) - gram_norm(m.graph.gram0_broken, f)) < 1e-14


def test_jprime_j_is_identity(lasso_maps):
    for m in lasso_maps.values():
        assert abs(m.Jp @ m.J - np.eye(m.graph.n_broken)).max() < 1e-10


def test_transverse_mode_is_annihilated():
    m = interval_maps()
    u = strip_values(m, 0, lambda x, y: np.cos(np.pi * (y + 0.5)) * (1 + x))
    assert np.max(np.abs(m.Jp @ u)) < 1e-14


def test_identification_is_transverse_constant_and_zero_on_patches(lasso_maps):
    m = lasso_maps[0.1]
    f = np.random.default_rng(3).standard_normal(m.graph.n_broken)
    u = m.J @ f
    for eid, ids in m.broken.strip_ids.items():
        vals = u[ids]
        assert np.allclose(vals, vals[:, :1])
    for ids in m.broken.patch_ids.values():
        assert np.all(u[ids] == 0)


def test_order_one_map_is_continuous_at_vertices(lasso_maps):
    m = lasso_maps[0.1]
    # J'1 lands in the continuous graph space, so vertex values are shared by construction
    u = np.random.default_rng(4).standard_normal(m.op.n)
    f = m.Jp1 @ u
    assert f.shape == (m.graph.n,)
    v = m.graph.dof[0][0]
    C = m.patch_average[0]
    assert abs(f[v] - math.sqrt(m.eps) * (C @ u)) < 1e-12 or abs(f[v] - (C @ u)) < 1e-12


def test_cutoff_profile():
    s = np.linspace(0, 1, 101)
    rho = smoothstep_cutoff(s, 0.4)
    assert rho[0] == 1 and np.all(rho[s >= 0.4] == 0)
    assert np.all(np.diff(rho) <= 1e-15)


def test_incompatible_inputs_are_rejected():
    d = normalize_and_decompose(lasso(1.0, 0.5))
    mesh = generate_mesh(build_model(d, None, 0.1, L_ext=3.0), 0.05)
    op = assemble(mesh, Dilation(0.8j))
    with pytest.raises(IncompatibleDecomposition):
        build_maps(discretize_graph(d, None, 0.1, Dilation(0.8j), 3.0), op)
    with pytest.raises(IncompatibleDecomposition):
        build_maps(graph_for_mesh(mesh, Dilation(0.4j)), op)
    with pytest.raises(IncompatibleDecomposition):
        build_maps(None, op, eps=0.2)
    dup = assemble(generate_mesh(build_model(d, None, 0.1, L_ext=3.0), 0.25, duplicate_interfaces=True),
                   Dilation(0.8j))
    with pytest.raises(IncompatibleDecomposition):
        broken_waveguide(dup)


# -- defects ----------------------------------------------------------------

def test_lasso_defects_decrease(lasso_reports):
    reps = [lasso_reports[e] for e in EPS_SERIES]
    for name in ("delta_adj", "delta_inv1", "delta_inv2", "delta_form"):
        vals = [r.components()[name] for r in reps]
        assert all(np.isfinite(vals)) and min(vals) >= 0
        if max(vals) <= 1e-10:
            continue
        assert vals[0] > vals[1] > vals[2]


def test_map_norms_bounded(lasso_reports):
    for r in lasso_reports.values():
        assert r.norm_J <= 2 + 1e-12 and r.norm_Jp <= 2 + 1e-12


def test_defects_are_mesh_converged():
    g = lasso(1.0, 0.5)
    a = delta_report(build_maps(None, waveguide_op(g, 0.1, h=0.05))).components()
    b = delta_report(build_maps(None, waveguide_op(g, 0.1, h=0.025))).components()
    for name in ("delta_inv2", "delta_form"):
        assert abs(a[name] - b[name]) < 0.05 * b[name]


def test_interval_adjoint_defect_vanishes():
    assert delta_report(interval_maps()).delta_adj <= 1e-10


# -- resolvents -------------------------------------------------------------

def test_resolvent_difference_ratio(lasso_maps):
    vals = [resolvent_diff_norm(-1.0, lasso_maps[e], both=False)[0] for e in EPS_SERIES]
    assert vals[0] / vals[1] >= 1.3 and vals[1] / vals[2] >= 1.3


def test_both_resolvent_norms(lasso_maps):
    first, second = resolvent_diff_norm(-1.0, lasso_maps[0.1])
    assert 0 < first and 0 < second < 1


def test_half_line_resolvents_agree():
    d = normalize_and_decompose(half_line(0.5))
    for eps in EPS_SERIES:
        op = assemble(generate_mesh(build_model(d, None, eps, L_ext=3.0, end_patches=False), 0.05),
                      Dilation(0.8j))
        assert resolvent_diff_norm(-1.0, build_maps(None, op), both=False)[0] < 1e-10


def _far_sweep(maps):
    spec = graph_eigs(maps.graph, 0.0, count=maps.graph.n)[0]
    zs = (-10.0, -100.0, -1000.0)
    vals = [resolvent_diff_norm(z, maps, both=False)[0] for z in zs]
    dist = [float(np.min(np.abs(spec - z))) for z in zs]
    return float(np.polyfit(np.log(dist), np.log(vals), 1)[0])


def test_far_resolvent_difference_decays_like_inverse_square(lasso_maps):
    # expected to fail: the measured decay is 1/dist (see the next test)
    assert _far_sweep(lasso_maps[0.1]) <= -1.8


def test_far_resolvent_difference_decays_like_inverse_distance(lasso_maps):
    assert -1.2 <= _far_sweep(lasso_maps[0.1]) <= -0.8


def test_shift_on_spectrum():
    m = interval_maps()
    lam = graph_eigs(m.graph, 10.0, 1)[0][0]
    with pytest.raises(ShiftOnSpectrum):
        resolvent_diff_norm(lam, m, both=False)


# -- projections and eigenvectors --------------------------------------------

def test_projection_ranks_at_lambda_zero(lasso_maps):
    # expected to fail: neither discrete spectrum has a point near -(ln 3)^2
    for eps in (0.1, 0.05):
        pr = projection_diff(-LN3 ** 2, 0.5, lasso_maps[eps])
        assert pr.rank_graph == 1 and pr.rank_waveguide == 1


def test_projection_of_empty_disc(lasso_maps):
    pr = projection_diff(-20.0, 3.0, lasso_maps[0.1])
    assert pr.rank_graph == pr.rank_waveguide == 0 and pr.norm < 1e-10


def test_projection_around_embedded_eigenvalue(lasso_maps):
    norms = []
    for eps in (0.1, 0.05):
        pr = projection_diff(4 * math.pi ** 2, 8.0, lasso_maps[eps])
        assert pr.rank_graph == 1 and pr.rank_waveguide == 1
        norms.append(pr.norm)
    assert norms[1] < norms[0]


def test_projection_contour_on_spectrum(lasso_maps):
    m = lasso_maps[0.1]
    lam = graph_eigs(m.graph, lasso_resonance(1), 1)[0][0]
    with pytest.raises(ContourOnSpectrum):
        projection_diff(lam + 2.0, 2.0, m)


def _pair(maps, target):
    lam, V = graph_eigs(maps.graph, target, 1)
    p = solve_eigs(maps.op, target, count=1)
    return V[:, 0], p.vectors[:, 0], lam[0], p.values[0]


def test_eigenvector_match_at_lambda_zero(lasso_maps):
    # expected to fail: there is no graph/waveguide eigenpair near -(ln 3)^2
    out = []
    for eps in (0.1, 0.05):
        psi0, psie, lam0, lame = _pair(lasso_maps[eps], -LN3 ** 2)
        assert abs(lam0 + LN3 ** 2) < 0.5 and abs(lame + LN3 ** 2) < 0.5
        out.append(eigenvector_match(psi0, psie, lasso_maps[eps]))
    assert out[0][0] >= 1.3 * out[1][0] and out[0][1] >= 1.3 * out[1][1]


def test_eigenvector_match_at_lambda_one(lasso_maps):
    out = [eigenvector_match(*_pair(lasso_maps[eps], lasso_resonance(1))[:2], lasso_maps[eps])
           for eps in (0.1, 0.05)]
    assert out[0][0] >= 1.3 * out[1][0] and out[0][1] >= 1.3 * out[1][1]


def test_eigenvector_match_of_identified_vector(lasso_maps):
    m = lasso_maps[0.1]
    f = np.random.default_rng(5).standard_normal(m.graph.n_broken) + 0j
    first, second = eigenvector_match(f, m.J @ f, m, broken=True)
    assert first < 1e-12 and second <= 1e-10


def test_transverse_eigenvector_is_far_from_graph_functions():
    m = interval_maps(eps=0.2)
    p = solve_eigs(m.op, (math.pi / 0.2) ** 2, count=6)
    Ew = m.broken.embed
    # the eigenvector with the least transverse-constant content
    share = [gram_norm(m.broken.gram0, m.J @ (m.Jp @ (Ew @ u))) / gram_norm(m.broken.gram0, Ew @ u)
             for u in p.vectors.T]
    u = p.vectors[:, int(np.argmin(share))]
    rng = np.random.default_rng(6)
    for _ in range(5):
        f = rng.standard_normal(m.graph.n)
        first, _ = eigenvector_match(f, u, m)
        assert first >= 0.95
