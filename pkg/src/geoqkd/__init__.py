"""Simulator of AO-corrected OGS-to-GEO uplinks and twin-field / mode-pairing QKD key rates."""

__version__ = "0.1.0"
