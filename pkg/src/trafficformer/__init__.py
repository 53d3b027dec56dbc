"""Traffic forecasting with frequency-domain decomposition and a learned spatial mask."""

__version__ = "0.1.0"
