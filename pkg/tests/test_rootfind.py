import math

import numpy as np
import pytest

from fatgraph.rootfind import (ContourThroughZero, NonConvergent, Rectangle, cauchy_derivative,
                               find_zeros, refine_root, winding_count)
from fatgraph.secular import Dilation, SecularModel

from conftest import LN3


def test_rectangle_validation():
    with pytest.raises(ValueError):
        Rectangle(1, 0, 0, 1)
    r = Rectangle(0, 2, -1, 1)
    assert r.center == 1 + 0j and math.isclose(r.diameter, math.hypot(2, 2))
    assert sum(q.diameter for q in r.quarters()) == pytest.approx(2 * r.diameter)


def test_winding_examples(lasso_decomp):
    assert winding_count(lambda z: z * z + 1, Rectangle(-0.5, 0.5, 0.5, 1.5)) == 1
    assert winding_count(np.exp, Rectangle(-3, 2, -4, 5)) == 0
    model = SecularModel(lasso_decomp, None, Dilation(0.8j))
    assert winding_count(model.det, Rectangle(5, 8, -2, -0.1)) == 1
    assert winding_count(model.det, Rectangle(5, 8, -2, -0.1), dlog=model.dlog) == 1


def test_contour_through_zero_is_nudged():
    # the zero sits exactly on the left side; the nudged box decides
    n = winding_count(lambda z: z - 1j, Rectangle(0.0, 1.0, 0.5, 1.5))
    assert n in (0, 1)


def test_contour_through_zero_gives_up():
    with pytest.raises(ContourThroughZero):
        winding_count(lambda z: z - 1j, Rectangle(0.0, 1.0, 0.5, 1.5), max_nudges=0)


def test_refine_examples(lasso_decomp):
    assert abs(refine_root(lambda z: z * z + 1, 0.9j).z - 1j) < 1e-12
    assert abs(refine_root(np.sin, 3.0).z - math.pi) < 1e-12
    model = SecularModel(lasso_decomp, None, Dilation(0.8j))
    r = refine_root(model.det, 6.3 - 1.0j, dlog=model.dlog, scale=model.residual)
    assert abs(r.z - (2 * math.pi - 1j * LN3)) < 1e-10


def test_refine_without_convergence():
    with pytest.raises(NonConvergent):
        refine_root(lambda z: np.exp(z), 0.0, max_iter=5)


def test_cauchy_derivative():
    assert abs(cauchy_derivative(np.sin, 0.3 + 0.2j) - np.cos(0.3 + 0.2j)) < 1e-12


def test_find_zeros_with_double_root():
    rep = find_zeros(lambda z: (z - 0.2) ** 2 * (z + 0.3j), Rectangle(-1, 1, -1, 1))
    assert rep.count == 3
    assert sorted(r.multiplicity for r in rep.roots) == [1, 2]
    double = [r for r in rep.roots if r.multiplicity == 2][0]
    assert abs(double.z - 0.2) < 1e-7


def test_find_zeros_sorted_and_inside():
    box = Rectangle(0.1, 10.0, -0.5, 0.5)
    rep = find_zeros(np.sin, box)
    assert [round(r.z.real, 12) for r in rep.roots] == [round(math.pi * j, 12) for j in (1, 2, 3)]
    assert all(box.contains(r.z) for r in rep.roots)


def test_parallel_cells_give_same_roots():
    f = lambda z: np.sin(z) * (z - 2.5 + 0.3j)
    box = Rectangle(0.1, 10.0, -0.5, 0.5)
    a = find_zeros(f, box, workers=1)
    b = find_zeros(f, box, workers=4)
    assert [r.z for r in a.roots] == [r.z for r in b.roots]
