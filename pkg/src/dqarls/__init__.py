"""Distributed quantization-aware RLS over diffusion networks."""

__version__ = "0.1.0"
