"""Periodic solutions of (phi(u'))' = f(t, u) + h(t) by variational methods.

The energy is minimized on a uniform periodic grid; when no minimizer is
available a mountain-pass critical point is located with a string method.
"""

__version__ = "0.1.0"

from .grid import PeriodicGrid, PeriodicPath  # noqa: E402
from .problem import ProblemSpec, preset  # noqa: E402

__all__ = ["PeriodicGrid", "PeriodicPath", "ProblemSpec", "preset", "__version__"]
