"""Nonlinear PBDW state estimation with coarse-mesh surrogate model selection."""

__version__ = "0.1.0"
