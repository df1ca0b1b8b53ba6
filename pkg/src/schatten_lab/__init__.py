"""Dyadic-Haar toolbox for weighted Schatten-Lorentz spectra of Riesz commutators."""

__version__ = "0.1.0"
