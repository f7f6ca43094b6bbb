"""Shifted NLS states on star graphs: construction, spectra and dynamics."""

__version__ = "0.1.0"
