"""Real-time anomaly detection for Ethereum account transaction streams."""

__version__ = "0.1.0"
