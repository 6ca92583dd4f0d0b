"""Geodesic X-ray transform and reconstruction of piecewise constant functions."""

__version__ = "0.1.0"
