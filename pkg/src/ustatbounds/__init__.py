"""U-statistics: exact Hoeffding decomposition, explicit moment and tail bounds, and empirical checks."""

from .errors import UStatError

__all__ = ["UStatError"]
__version__ = "0.1.0"
