"""Strip wetting model: spectral free energy, renewal structure, exact sampling."""

__version__ = "0.1.0"
