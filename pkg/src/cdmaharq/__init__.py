"""Collaborative CDMA hybrid-ARQ simulation for underwater acoustic networks."""

__version__ = "0.1.0"
