"""Photon correlations of light scattered by chains of trapped ions."""

__version__ = "0.1.0"
