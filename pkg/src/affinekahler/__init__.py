"""Parallel (1,1)-tensors on affine surfaces and their Riemannian extensions."""

__version__ = "0.1.0"
