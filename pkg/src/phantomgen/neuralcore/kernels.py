"""Kernel backend selection.

The compiled extension is used when importable; set
``PHANTOMGEN_PURE_PYTHON=1`` to force the numpy fallback (used by the
backend-comparison benchmark and as a safety net on platforms without a
compiler).
"""

from __future__ import annotations

import os

from phantomgen.neuralcore import kernels_py

if os.environ.get("PHANTOMGEN_PURE_PYTHON", "0") not in ("0", ""):
    _impl = kernels_py
    BACKEND = "python"
else:
    try:
        from phantomgen.neuralcore import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = kernels_py
        BACKEND = "python"

conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward
maxpool1d_forward = _impl.maxpool1d_forward
maxpool1d_backward = _impl.maxpool1d_backward
upsample1d_forward = _impl.upsample1d_forward
upsample1d_backward = _impl.upsample1d_backward
dropout_forward = _impl.dropout_forward


def backend_name() -> str:
    return BACKEND
