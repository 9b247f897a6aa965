import os
import subprocess
import sys

import numpy as np
import pytest

from fatgraph import _kernels_py, kernels
from fatgraph.graph import lasso, normalize_and_decompose
from fatgraph.waveguide import build_model, generate_mesh

compiled = pytest.importorskip("fatgraph._kernels")


@pytest.fixture(scope="module")
def mesh_inputs():
    mesh = generate_mesh(build_model(normalize_and_decompose(lasso(1.0, 0.5)), None, 0.1, L_ext=2.0), 0.1)
    rng = np.random.default_rng(0)
    nq, nt = len(mesh.quad_conn), len(mesh.tri_conn)
    quad = (mesh.quad_conn, mesh.quad_hx, mesh.quad_hy, rng.standard_normal(nq),
            *(rng.standard_normal(nq) + 1j * rng.standard_normal(nq) for _ in range(4)))
    tri = (mesh.tri_conn, mesh.tri_xy, rng.standard_normal(nt) + 1j, rng.standard_normal(nt) + 0.5j)
    return quad, tri


def test_compiled_and_numpy_quads_agree(mesh_inputs):
    quad, _ = mesh_inputs
    for x, y in zip(_kernels_py.assemble_quads(*quad), compiled.assemble_quads(*quad)):
        assert np.max(np.abs(np.asarray(x) - np.asarray(y))) < 1e-13


def test_compiled_and_numpy_tris_agree(mesh_inputs):
    _, tri = mesh_inputs
    for x, y in zip(_kernels_py.assemble_tris(*tri), compiled.assemble_tris(*tri)):
        assert np.max(np.abs(np.asarray(x) - np.asarray(y))) < 1e-13


def test_default_backend_is_compiled():
    assert kernels.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, FATGRAPH_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from fatgraph import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
