"""Day-ahead electricity price forecasting and benchmarking for the Norwegian bidding zones."""

__version__ = "0.1.0"
