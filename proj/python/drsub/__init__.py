"""DR-submodular maximization over bodies written as (N + D) intersected with the unit cube."""

from ._drsub import *  # noqa: F401,F403
from ._drsub import __doc__  # noqa: F401

__version__ = "0.1.0"
