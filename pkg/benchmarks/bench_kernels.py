"""Compare the compiled and numpy element assembly kernels on lasso meshes.

    python benchmarks/bench_kernels.py [--h 0.05 0.025 0.0125] [--repeat 5]
"""
import argparse
import time

import numpy as np

from fatgraph import _kernels_py, kernels
from fatgraph.graph import lasso, normalize_and_decompose
from fatgraph.waveguide import build_model, generate_mesh

try:
    from fatgraph import _kernels as _compiled
except ImportError:
    _compiled = None


def _inputs(h: float, eps: float = 0.1):
    decomp = normalize_and_decompose(lasso(1.0, 0.5))
    mesh = generate_mesh(build_model(decomp, None, eps, L_ext=4.0), h)
    nq, nt = len(mesh.quad_conn), len(mesh.tri_conn)
    rng = np.random.default_rng(0)
    quad = (mesh.quad_conn, mesh.quad_hx, mesh.quad_hy, mesh.quad_a,
            *(rng.standard_normal(nq) + 1j * rng.standard_normal(nq) for _ in range(4)))
    tri = (mesh.tri_conn, mesh.tri_xy, np.ones(nt, complex), np.full(nt, eps * eps, complex))
    return mesh, quad, tri


def _time(fn, args, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _check(a, b):
    return max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(a, b))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--h", type=float, nargs="+", default=[0.05, 0.025, 0.0125])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    print(f"default backend: {kernels.BACKEND}")
    if _compiled is None:
        print("compiled extension not built; timing the numpy kernels only")
    print(f"{'h':>8} {'nodes':>8} {'quads':>8} {'tris':>6} {'numpy [ms]':>11} "
          f"{'cython [ms]':>12} {'speedup':>8} {'max diff':>9}")
    for h in args.h:
        mesh, quad, tri = _inputs(h)
        t_py = _time(_kernels_py.assemble_quads, quad, args.repeat) + \
            _time(_kernels_py.assemble_tris, tri, args.repeat)
        if _compiled is not None:
            t_cy = _time(_compiled.assemble_quads, quad, args.repeat) + \
                _time(_compiled.assemble_tris, tri, args.repeat)
            diff = max(_check(_kernels_py.assemble_quads(*quad), _compiled.assemble_quads(*quad)),
                       _check(_kernels_py.assemble_tris(*tri), _compiled.assemble_tris(*tri)))
            extra = f"{1e3 * t_cy:12.2f} {t_py / t_cy:8.1f} {diff:9.1e}"
        else:
            extra = f"{'-':>12} {'-':>8} {'-':>9}"
        print(f"{h:8g} {mesh.n_nodes:8d} {len(mesh.quad_conn):8d} {len(mesh.tri_conn):6d} "
              f"{1e3 * t_py:11.2f} {extra}")


if __name__ == "__main__":
    main()
