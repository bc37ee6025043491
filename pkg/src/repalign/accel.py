"""Backend selection for the numeric hot spots.

The compiled extension is preferred; if it was not built (no compiler at
install time, or a source checkout run in place), the pure-Python module
with the identical interface is used instead.
"""

try:
    from ._accel import average_ranks, kernel_posterior, svr_smo
    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on the build
    from ._accel_py import average_ranks, kernel_posterior, svr_smo
    BACKEND = "python"

__all__ = ["BACKEND", "average_ranks", "kernel_posterior", "svr_smo"]
