"""Hot kernels, compiled when available.

The Cython extension ``mixspec._kernels`` is used if it was built and
``MIXSPEC_PURE_PYTHON`` is unset; otherwise the NumPy/pure-Python versions
in ``mixspec._pure`` are used.  ``BACKEND`` names the active choice.
"""

import logging
import os

from . import _pure

log = logging.getLogger(__name__)

CONVERGED = _pure.CONVERGED
MAX_ITER = _pure.MAX_ITER


def _load():
    if os.environ.get("MIXSPEC_PURE_PYTHON", "").strip() not in ("", "0"):
        return _pure, "python"
    try:
        from . import _kernels
    except ImportError as exc:  # extension not built
        log.debug("compiled kernels unavailable (%s); using pure Python", exc)
        return _pure, "python"
    return _kernels, "cython"


_impl, BACKEND = _load()

harris_path = _impl.harris_path
doubling_windows = _impl.doubling_windows
solve_points = _impl.solve_points

# Single-point solver with residual tracing, used for error reports.
solve_one_traced = _pure.solve_one
continuation_heights = _pure.continuation_heights
