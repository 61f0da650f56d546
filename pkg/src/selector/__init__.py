"""Representative benchmark-instance selection with statistical robustness checks."""

__version__ = "0.1.0"
