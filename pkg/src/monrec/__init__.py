"""Monitor configuration recommendation for cloud services."""

__version__ = "0.1.0"
