"""Score-driven (GAS) INAR(1) models for count time series."""

__version__ = "0.1.0"
