"""Pivot-kernel selection: compiled extension when importable, numpy else.

Set CHSVI_KERNEL=py (or =c) to force a backend; the default prefers the
compiled one.  Both implement the identical pivot contract, so a run is
deterministic within a backend.
"""

import os

from ._kernel_py import pivot_loop as py_pivot_loop

_choice = os.environ.get("CHSVI_KERNEL", "auto").lower()

compiled_pivot_loop = None
if _choice in ("auto", "c"):
    try:
        from ._kernel import pivot_loop as compiled_pivot_loop
    except ImportError:
        if _choice == "c":
            raise

if compiled_pivot_loop is not None:
    pivot_loop = compiled_pivot_loop
    BACKEND = "c"
else:
    pivot_loop = py_pivot_loop
    BACKEND = "py"
