"""Backend selection for the hot kernels.

The compiled Cython module is preferred. Set ``LATEREVERB_BACKEND`` to
``python`` to force the numpy fallback, or to ``cython`` to fail loudly
when the extension is missing.
"""
import importlib
import os

import numpy as np

_MODULES = {"cython": "latereverb._ckernels", "python": "latereverb._pykernels"}


def _load(name):
    return importlib.import_module(_MODULES[name])


def available_backends():
    """Names of the backends importable in this environment."""
    names = []
    for name in _MODULES:
        try:
            _load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select():
    requested = os.environ.get("LATEREVERB_BACKEND", "").strip().lower()
    if requested and requested not in _MODULES:
        raise ImportError(f"unknown LATEREVERB_BACKEND {requested!r}; use 'cython' or 'python'")
    if requested:
        return requested, _load(requested)
    try:
        return "cython", _load("cython")
    except ImportError:
        return "python", _load("python")


BACKEND, _impl = _select()


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return _impl
    return _load(name)


def conv2d_strided(x, kernel, stride, backend=None):
    impl = get_backend(backend)
    x = np.ascontiguousarray(x, dtype=np.float64)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    return impl.conv2d_strided(x, kernel, int(stride))


def backward_energy(x, backend=None):
    impl = get_backend(backend)
    return impl.backward_energy(np.ascontiguousarray(x, dtype=np.float64))


def row_sq_error(a, b, backend=None):
    impl = get_backend(backend)
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return impl.row_sq_error(a, b)
