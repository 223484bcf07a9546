"""Collocation isogeometric BEM for 3-D elasticity with elastic inclusions."""

__version__ = "0.1.0"
