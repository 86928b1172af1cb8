"""Kernel backend selection.

The compiled module is used when it imports; set ``MEDIANLAB_PURE_PYTHON=1``
to force the numpy fallback (the test-suite runs both).
"""

import os

from medianlab import _pykernels

kernels = _pykernels
BACKEND = "python"

if not os.environ.get("MEDIANLAB_PURE_PYTHON"):
    try:
        from medianlab import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        kernels = _ckernels
        BACKEND = "cython"
