"""Learning minimal CTL/ATL formulas from positive and negative game structures."""

__version__ = "0.1.0"
