"""Variational upper bounds for radial Schrodinger spectra with power-law potentials."""

__version__ = "0.1.0"
