import math

import numpy as np
import pytest

from fatgraph.fields import PiecewiseConstant
from fatgraph.graph import half_line, lasso, normalize_and_decompose
from fatgraph.rootfind import Rectangle
from fatgraph.secular import (Dilation, OutsideAdmissibleSector, ResonanceOptions, SecularModel,
                              essential_spectrum_rays, find_resonances, lasso_closed_form,
                              secular_matrix, transfer_matrix)

from conftest import LASSO_BOXES, LN3, lasso_resonance


def test_free_transfer_matrix():
    k, L = 2.3 - 0.4j, 1.7
    T = transfer_matrix(0.0, 0.0, k, L)
    ref = np.array([[np.cos(k * L), np.sin(k * L) / k], [-k * np.sin(k * L), np.cos(k * L)]])
    assert np.allclose(T, ref, atol=1e-14)


def test_transfer_matrix_at_zero_uses_series():
    assert np.allclose(transfer_matrix(0.0, 0.0, 0.0, 1.3), [[1, 1.3], [0, 1]], atol=1e-15)
    T = transfer_matrix(0.0, 0.0, 1e-9, 1.3)
    assert np.allclose(T, [[1, 1.3], [0, 1]], atol=1e-12)


def test_constant_potential_is_phase_times_free():
    c, L, k = 0.8, 1.4, 3.1 - 0.2j
    T = transfer_matrix(c, 0.0, k, L)
    assert np.allclose(T, np.exp(1j * c * L) * transfer_matrix(0.0, 0.0, k, L), atol=1e-13)


def test_transfer_determinant():
    # the determinant is exp(2 i Phi); it is 1 exactly when the flux vanishes
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = PiecewiseConstant.uniform(1.5, rng.uniform(-2, 2, 3))
        q = PiecewiseConstant.uniform(1.5, rng.uniform(0, 4, 2))
        k = complex(rng.uniform(0, 8), rng.uniform(-2, 1))
        phi = a.integral(1.5)
        assert abs(np.linalg.det(transfer_matrix(a, q, k)) - np.exp(2j * phi)) < 1e-10
        assert abs(np.linalg.det(transfer_matrix(0.0, q, k)) - 1) < 1e-10


def test_transfer_derivative_in_k():
    a = PiecewiseConstant.uniform(1.0, [0.3, -0.5])
    q = PiecewiseConstant.uniform(1.0, [1.0, 0.0])
    k, h = 2.2 - 0.3j, 1e-6
    T, dT = transfer_matrix(a, q, k, deriv=True)
    fd = (transfer_matrix(a, q, k + h) - transfer_matrix(a, q, k - h)) / (2 * h)
    assert np.allclose(dT, fd, atol=1e-7)


def test_lasso_determinant_vanishes_at_closed_form(lasso_decomp):
    model = SecularModel(lasso_decomp, None, Dilation(0.8j))
    for j in (1, 2):
        k = 2 * math.pi * j - 1j * LN3
        assert model.residual(k) < 1e-14
        assert model.residual(k + 0.1) > 1e-4


def test_half_line_secular_matrix_is_nonzero():
    d = normalize_and_decompose(half_line(0.5))
    for k in (1.0 - 0.2j, 3.0 + 0.5j, 0.5 - 0.1j):
        sys = secular_matrix(d, None, k, Dilation(0.8j))
        assert abs(sys.det) > 1e-3
    # no zeros in a box either
    assert find_resonances(d, None, Rectangle(0.2, 8.0, -0.5, 0.5), Dilation(0.8j)) == []


def test_matrix_layout_and_jump_free_reduction(lasso_decomp):
    sys = secular_matrix(lasso_decomp, None, 2.0 + 0.1j, Dilation(0.8j))
    n_int = len(lasso_decomp.graph.internal_edges)
    n_ext = len(lasso_decomp.graph.external_edges)
    assert sys.M.shape == (2 * n_int + n_ext,) * 2
    # theta = 0 with the jump factors set to one: plain Kirchhoff rows
    a = SecularModel(lasso_decomp, None, Dilation(0j)).matrix(2.0 + 0.1j).M
    b = SecularModel(lasso_decomp, None, Dilation(0.5j), jumps=False).matrix(2.0 + 0.1j).M
    assert np.array_equal(a, b)


def test_outside_admissible_sector(lasso_decomp):
    with pytest.raises(OutsideAdmissibleSector):
        secular_matrix(lasso_decomp, None, 1.0 - 2.0j, Dilation(0.8j))


def test_changing_theta_keeps_zero_set(lasso_decomp):
    k = 2 * math.pi - 1j * LN3
    for th in (0.3j, 0.8j, 1.2j):
        assert SecularModel(lasso_decomp, None, Dilation(th)).residual(k) < 1e-14


def test_lasso_resonances_in_spec_box(lasso_decomp):
    found = find_resonances(lasso_decomp, None, Rectangle(0.1, 14.0, -2.0, -0.01), Dilation(0.8j))
    ks = [r.k for r in found]
    assert len(ks) == 2
    assert abs(ks[0] - (2 * math.pi - 1j * LN3)) < 1e-10
    assert abs(ks[1] - (4 * math.pi - 1j * LN3)) < 1e-10
    lam = found[0].lam
    assert abs(lam.real - 38.2715) < 1e-4 and abs(lam.imag + 13.8056) < 1e-4
    assert all(r.kind == "resonance" and r.multiplicity == 1 for r in found)


def test_lasso_embedded_eigenvalues(lasso_decomp):
    found = find_resonances(lasso_decomp, None, LASSO_BOXES[1], Dilation(0.8j))
    assert [r.kind for r in found] == ["embedded_eigenvalue"] * 2
    for j, r in zip((1, 2), found):
        assert abs(r.lam - (2 * math.pi * j) ** 2) < 1e-8 * (2 * math.pi * j) ** 2
        assert r.lam.imag == 0.0


def test_lambda_zero_found_but_not_revealed(lasso_decomp):
    found = find_resonances(lasso_decomp, None, Rectangle(-0.5, 0.5, -1.5, -0.3), Dilation(0.8j))
    assert len(found) == 1 and not found[0].revealed
    assert abs(found[0].lam + LN3 ** 2) < 1e-10
    opts = ResonanceOptions(require_revealed=True)
    assert find_resonances(lasso_decomp, None, Rectangle(-0.5, 0.5, -1.5, -0.3), Dilation(0.8j), opts) == []


def test_search_region_must_avoid_origin(lasso_decomp):
    with pytest.raises(ValueError):
        find_resonances(lasso_decomp, None, Rectangle(-1, 1, -1, 1), Dilation(0.8j))


def test_report_count_equals_roots(lasso_decomp):
    rep = find_resonances(lasso_decomp, None, LASSO_BOXES[0], Dilation(0.8j), report=True)
    assert rep.count == sum(r.multiplicity for r in rep.resonances) == 3


def test_dilation_strip():
    with pytest.raises(ValueError):
        Dilation(1.0j, sector_bound=2.0)
    assert Dilation(0.99j, sector_bound=2.0).conj().theta == -0.99j


def test_essential_spectrum_rays():
    ((s, d),) = essential_spectrum_rays(Dilation(0.5j))
    assert s == 0 and abs(d - np.exp(-1j)) < 1e-15
    rays = essential_spectrum_rays(Dilation(0j), 0.1, cap=2000)
    assert [round(r[0].real, 2) for r in rays] == [0.0, 986.96]
    low = [r for r in essential_spectrum_rays(Dilation(0.8j), 0.1, cap=2000) if abs(r[0]) < 900]
    assert low == essential_spectrum_rays(Dilation(0.8j))


def test_lasso_closed_form_values():
    cf = lasso_closed_form(1.0, 0.0, range(0, 3))
    assert abs(cf.resonances[1] - (4 * math.pi ** 2 - LN3 ** 2 - 4j * math.pi * LN3)) < 1e-12
    assert abs(cf.resonances[1].real - 38.2715) < 1e-4
    assert abs(cf.resonances[1].imag + 13.8056) < 1e-4
    assert abs(cf.resonances[0] + 1.2069) < 1e-4 and cf.resonances[0].imag == 0
    assert cf.embedded == [(2 * math.pi) ** 2, (4 * math.pi) ** 2]
    assert abs(cf.parabola(cf.resonances[1])) < 1e-12
    assert abs(cf.condition(2 * math.pi - 1j * LN3)) < 1e-12
    assert lasso_closed_form(1.0, 0.5).resonances == []
    with pytest.raises(ValueError):
        lasso_closed_form(0.0)


def test_scaled_lasso():
    d = normalize_and_decompose(lasso(2.0, 0.5))
    found = find_resonances(d, None, Rectangle(0.3, 7.0, -1.0, -0.2), Dilation(0.8j))
    cf = lasso_closed_form(2.0, 0.0, range(1, 3))
    assert len(found) == 2
    for r, lam in zip(found, cf.resonances):
        assert abs(r.lam - lam) < 1e-8 * abs(lam)
    assert abs(lasso_resonance(1, 2.0) - cf.resonances[0]) < 1e-12
