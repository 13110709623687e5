"""Sediment pollution labelling, imputation benchmarking and classification."""

__version__ = "0.1.0"
