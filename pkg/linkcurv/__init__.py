"""Topology-and-quadrature toolkit for quantized curvature of time-like hyperlinks."""

__version__ = "0.1.0"
