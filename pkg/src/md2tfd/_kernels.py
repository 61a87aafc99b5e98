"""Backend selection for the hot kernels.

The compiled module is used when it imports; set MD2TFD_PURE=1 to force the
numpy reference implementation.
"""
import os

BACKEND = "python"
if not os.environ.get("MD2TFD_PURE"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = None
if BACKEND == "python":
    from . import _kernels_py as _impl

pair_sums = _impl.pair_sums
pair_sums_sq = _impl.pair_sums_sq
reduced_matrix = _impl.reduced_matrix
