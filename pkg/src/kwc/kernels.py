"""Kernel dispatch: the compiled extension when built, NumPy fallbacks otherwise.

Set ``KWC_PURE_PYTHON=1`` to force the fallbacks.
"""

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("KWC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

directed_hausdorff = _impl.directed_hausdorff
tv_prox_1d = _impl.tv_prox_1d
tv_prox_1d_weighted = _impl.tv_prox_1d_weighted
chain_dp = _impl.chain_dp

__all__ = ["BACKEND", "directed_hausdorff", "tv_prox_1d", "tv_prox_1d_weighted", "chain_dp"]
