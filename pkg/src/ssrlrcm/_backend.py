"""Pick the compiled inner loops when available, else the numpy fallback.

Set ``SSRLRCM_BACKEND=python`` to force the fallback, ``=cython`` to
require the extension (import fails loudly if it is missing).
"""

import os

from . import _pykernels

_choice = os.environ.get("SSRLRCM_BACKEND", "auto").lower()

if _choice == "python":
    kernels = _pykernels
    NAME = "python"
else:
    try:
        from . import _ckernels as kernels

        NAME = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        kernels = _pykernels
        NAME = "python"


def available():
    """Names of the backends importable in this environment."""
    names = ["python"]
    try:
        from . import _ckernels  # noqa: F401

        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def get(name):
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
