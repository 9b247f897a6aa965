"""Element assembly kernels: compiled when available, numpy otherwise.

``BACKEND`` names the implementation in use.  Setting FATGRAPH_PURE=1 forces
the numpy fallback.
"""
import os

from . import _kernels_py

if os.environ.get("FATGRAPH_PURE"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

assemble_quads = _impl.assemble_quads
assemble_tris = _impl.assemble_tris
