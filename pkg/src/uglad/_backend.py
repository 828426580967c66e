"""Select the compiled kernels when available, the pure-Python ones otherwise.

Set ``UGLAD_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
by the parity tests).
"""

import os

from . import _kernels_py as pure

compiled = None
if not os.environ.get("UGLAD_PURE_PYTHON"):
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

kernels = compiled if compiled is not None else pure
NAME = "compiled" if compiled is not None else "python"
