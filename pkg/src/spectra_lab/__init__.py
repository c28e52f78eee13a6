"""Program-spectra fault diagnosis laboratory."""

__version__ = "0.1.0"
