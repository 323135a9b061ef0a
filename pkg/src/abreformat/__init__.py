"""Developability prediction for IgG-to-scFv reformatting from sequence, structure and biophysics."""

__version__ = "0.1.0"
