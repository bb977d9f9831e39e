"""Hot kernels for the welfare optimizer.

The compiled extension is used when it imports; otherwise the numpy
implementation is selected. Set ``RISKAUDIT_PURE_PYTHON=1`` to force the
fallback.
"""

import importlib
import os

_NAMES = ("marginals", "welfare", "welfare_and_grad", "project_columns", "ascend")


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    mod = {"cython": "._ckernels", "python": "._pykernels"}[name]
    return importlib.import_module(mod, __name__)


def available_backends():
    out = []
    for name in ("cython", "python"):
        try:
            load_backend(name)
        except ImportError:
            continue
        out.append(name)
    return out


if os.environ.get("RISKAUDIT_PURE_PYTHON"):
    BACKEND = "python"
else:
    try:
        load_backend("cython")
        BACKEND = "cython"
    except ImportError:
        BACKEND = "python"

_impl = load_backend(BACKEND)
marginals = _impl.marginals
welfare = _impl.welfare
welfare_and_grad = _impl.welfare_and_grad
project_columns = _impl.project_columns
ascend = _impl.ascend

__all__ = ["BACKEND", "available_backends", "load_backend", *_NAMES]
