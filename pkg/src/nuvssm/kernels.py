"""Backend selection for the hot smoothing kernel.

At import time this module tries the compiled extension and falls back to
the pure-numpy twin.  ``COMPILED`` reports which one is active; ``mbf_scalar``
is the selected callable.  Both implementations have identical signatures
and agree to round-off, so callers never need to care which one they got.
"""

from __future__ import annotations

try:
    from ._mbf import mbf_scalar  # type: ignore[attr-defined]

    COMPILED = True
except ImportError:
    from ._kernel_py import mbf_scalar

    COMPILED = False

__all__ = ["mbf_scalar", "COMPILED"]
