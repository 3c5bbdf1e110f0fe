"""Exact Dirac spectra and spectral action of flat Bieberbach three-manifolds."""

__version__ = "0.1.0"
