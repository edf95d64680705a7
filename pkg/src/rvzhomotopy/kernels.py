"""Backend selection for the shooting kernel.

The compiled extension is used when it imports; otherwise the numpy
implementation is used.  Setting ``RVZ_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _kernel_py

if os.environ.get("RVZ_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernel as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
evaluate = _compiled.evaluate if _compiled is not None else _kernel_py.evaluate
evaluate_python = _kernel_py.evaluate
evaluate_compiled = _compiled.evaluate if _compiled is not None else None
