"""Post-FEC performance prediction for nonbinary LDPC coded modulation."""

__version__ = "0.1.0"
