"""Kernel backend selection.

Two implementations of the batched jet kernels exist: a Cython extension
(_batchjet, BLAS calls plus fused elementwise loops) and a NumPy fallback
(_jet_np).  Both expose JetWorkspace / jet_forward / jet_backward with
identical semantics; tests assert agreement to near machine precision.

The extension is used when importable.  Set DSPINN_KERNEL=numpy or
DSPINN_KERNEL=cython to force a choice (forcing cython raises if the
extension was not built).
"""

import os

from . import _jet_np

try:
    from . import _batchjet
except ImportError:
    _batchjet = None

_BACKENDS = {"numpy": _jet_np}
if _batchjet is not None:
    _BACKENDS["cython"] = _batchjet


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Resolve a backend module by name, env override, or default."""
    if name is None:
        name = os.environ.get("DSPINN_KERNEL")
    if name is None:
        return _batchjet if _batchjet is not None else _jet_np
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown kernel backend {name!r}, available: {available_backends()}"
        ) from None


_default = get_backend()

backend_name = _default.BACKEND_NAME
JetWorkspace = _default.JetWorkspace
jet_forward = _default.jet_forward
jet_backward = _default.jet_backward
param_layout = _jet_np.param_layout
