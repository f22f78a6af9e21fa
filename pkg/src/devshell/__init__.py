"""Developable surfaces, their infinitesimal isometries and thin-shell limit energies."""

__version__ = "0.1.0"
