"""Backend selection for the search kernels.

The compiled extension is preferred; the pure-numpy fallback is selected at
import when the extension is unavailable (or when MOTIONWEAVER_FORCE_FALLBACK
is set). Both produce bit-identical results; only throughput differs.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("MOTIONWEAVER_FORCE_FALLBACK"):
    _impl = _kernels_py
    BACKEND = "fallback"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:  # pragma: no cover - exercised via env override
        _impl = _kernels_py
        BACKEND = "fallback"

brute_query = _impl.brute_query
kd_query = _impl.kd_query


def get_backend(name: str):
    """Explicit backend access (used by the benchmark and cross-checks)."""
    if name == "fallback":
        return _kernels_py
    if name == "native":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
