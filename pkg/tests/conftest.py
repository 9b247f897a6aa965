import math

import numpy as np
import pytest

from fatgraph.closeness import build_maps, delta_report
from fatgraph.fields import EdgeFields
from fatgraph.graph import MetricGraph, lasso, normalize_and_decompose
from fatgraph.rootfind import Rectangle
from fatgraph.secular import Dilation
from fatgraph.waveguide import assemble, build_model, generate_mesh

LN3 = math.log(3.0)
THETA = 0.8j
# k = 0 is a spurious zero of the secular determinant, so searches use
# one box below the real axis and one straddling it away from the origin
LASSO_BOXES = (Rectangle(-0.5, 14.0, -1.5, -0.3), Rectangle(0.3, 14.0, -0.3, 0.5))
EPS_SERIES = (0.2, 0.1, 0.05)


def lasso_resonance(j: int, ell: float = 1.0) -> complex:
    return ((2 * math.pi * j - 1j * LN3) / ell) ** 2


def flux_lasso(flux: float, ell: float = 1.0, l0: float = 0.5):
    g = lasso(ell, l0)
    return g, EdgeFields.from_values(g, a={0: flux / ell})


def waveguide_op(graph, eps, h=0.05, L_ext=3.0, theta=THETA, fields=None):
    decomp = normalize_and_decompose(graph)
    mesh = generate_mesh(build_model(decomp, fields, eps, L_ext=L_ext), h)
    return assemble(mesh, Dilation(theta))


@pytest.fixture(scope="session")
def lasso_decomp():
    return normalize_and_decompose(lasso(1.0, 0.5))


@pytest.fixture(scope="session")
def lasso_maps():
    """Identification maps on the lasso, theta = 0.8i, h = 0.05, L_ext = 3, per eps."""
    g = lasso(1.0, 0.5)
    return {eps: build_maps(None, waveguide_op(g, eps)) for eps in EPS_SERIES}


@pytest.fixture(scope="session")
def lasso_reports(lasso_maps):
    return {eps: delta_report(m) for eps, m in lasso_maps.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tree3(l0=0.5):
    """Path 0-1-2-3 with a lead at vertex 1."""
    return MetricGraph.build([0, 1, 2, 3], [(0, 0, 1, 1.0), (1, 1, 2, 1.3), (2, 2, 3, 0.7),
                                            (3, 1, None, math.inf)], l0=l0)
