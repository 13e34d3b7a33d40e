"""Self-adaptive SDN congestion resolution via evolved link-weight formulas."""

__version__ = "0.1.0"
