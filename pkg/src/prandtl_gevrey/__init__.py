"""Regularized Prandtl boundary-layer solver with Gevrey-energy diagnostics."""

__version__ = "0.1.0"
