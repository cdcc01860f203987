"""Package-wide guard constants and backend selection.

All hard limits live here so callers can loosen them deliberately instead of
discovering silent truncation.
"""

from __future__ import annotations

import os

# Subset-enumeration operations (reachable sets, intrinsic sets) refuse to run
# on graphs larger than this many vertices unless the caller raises the limit.
SUBSET_ENUM_GUARD = 16

# The exact oracle enumerates joint response-function configurations.  The
# product of per-variable support sizes must stay below this.
ERROR_SPACE_GUARD = 10_000_000

# Oracle backend: "numba" (jit-compiled loop) or "numpy" (chunked vectorized).
_BACKEND_ENV = "SWIGID_ORACLE_BACKEND"


def oracle_backend() -> str:
    """Resolve the oracle enumeration backend.

    Honors the SWIGID_ORACLE_BACKEND environment variable ("numba" or
    "numpy").  Defaults to numba when importable, else numpy.
    """
    choice = os.environ.get(_BACKEND_ENV, "").strip().lower()
    if choice in ("numba", "numpy"):
        return choice
    if choice:
        raise ValueError(f"unknown oracle backend {choice!r} (want numba or numpy)")
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"
