"""Pinning control of network-coupled nonlinear dynamics with Lyapunov certificates."""

__version__ = "0.1.0"
