"""PSD matrix recovery from rank-one projections by feasibility projection."""

from ._feasrop import *  # noqa: F401,F403
from ._feasrop import __doc__  # noqa: F401

__version__ = "0.1.0"
