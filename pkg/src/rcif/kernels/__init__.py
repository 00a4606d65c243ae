"""Kernel backend selection.

Two interchangeable backends implement the hot numeric kernels: `_numba`
(JIT compiled, the default when numba imports cleanly) and `_numpy`
(vectorized fallback). The environment variable RCIF_BACKEND picks one:

    RCIF_BACKEND=numpy   force the fallback
    RCIF_BACKEND=numba   require the JIT backend (ImportError if missing)
    RCIF_BACKEND=auto    prefer numba, fall back to numpy (default)

Callers access kernels through the module attribute `active` (for example
``kernels.active.chol_spd``) so that `set_backend` takes effect everywhere
at once; `bench/benchmark_backends.py` compares the two.
"""

import os

_CHOICES = ("auto", "numba", "numpy")


def _load(choice):
    if choice == "numpy":
        from . import _numpy
        return _numpy, "numpy"
    try:
        from . import _numba
        return _numba, "numba"
    except ImportError:
        if choice == "numba":
            raise
        from . import _numpy
        return _numpy, "numpy"


def set_backend(name):
    """Switch the active backend at runtime (used by tests and benchmarks).

    Returns the name actually selected.
    """
    choice = name.strip().lower()
    if choice not in _CHOICES:
        raise ValueError(
            f"unknown backend {name!r}, expected one of {_CHOICES}")
    global active, backend_name
    active, backend_name = _load(choice)
    return backend_name


_env = os.environ.get("RCIF_BACKEND", "auto").strip().lower()
if _env not in _CHOICES:
    raise ValueError(
        f"RCIF_BACKEND={_env!r} is not valid, expected one of {_CHOICES}")
active, backend_name = _load(_env)
