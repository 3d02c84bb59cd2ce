"""Backend selection for the hot inner loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``WMBENCH_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy fallback is used. ``BACKEND`` names the choice.
"""

import os

from . import _kernels_py

_force_py = os.environ.get("WMBENCH_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

envelope_follower = _impl.envelope_follower
sos_filter = _impl.sos_filter
sinc_resample = _impl.sinc_resample
phase_vocoder = _impl.phase_vocoder

__all__ = [
    "BACKEND",
    "envelope_follower",
    "sos_filter",
    "sinc_resample",
    "phase_vocoder",
]
