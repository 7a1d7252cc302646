"""Enumeration kernel selection.

The compiled extension is optional: when it failed to build, or when
DXPLAIN_PURE_KERNEL is set to a non-empty value other than 0, the
pure-Python enumerator takes over with identical semantics.
"""

import os

from ._ballenum_py import BallEnumerator as PureBallEnumerator

try:
    from ._ballenum import BallEnumerator as CompiledBallEnumerator
except ImportError:
    CompiledBallEnumerator = None

_force_pure = os.environ.get("DXPLAIN_PURE_KERNEL", "") not in ("", "0")

if CompiledBallEnumerator is not None and not _force_pure:
    BallEnumerator = CompiledBallEnumerator
    KERNEL_BACKEND = "compiled"
else:
    BallEnumerator = PureBallEnumerator
    KERNEL_BACKEND = "pure-python"


def kernel_backend():
    """Name of the active enumerator implementation."""
    return KERNEL_BACKEND
