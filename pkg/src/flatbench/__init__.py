"""Cloth flattening benchmark: perception, policies, simulator, benchmark loop, service."""

__version__ = "0.1.0"
