"""Fermi-Hubbard thermodynamics from drifted matrix-valued SDEs."""

__version__ = "0.1.0"
