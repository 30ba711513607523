"""Sparse superposition codes over memoryless channels: GAMP decoding, state evolution and potential-function thresholds."""
__version__ = "0.1.0"
