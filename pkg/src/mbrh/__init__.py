"""Maxwell-Bloch mixed-problem solver via matrix Riemann-Hilbert problems."""

__version__ = "0.1.0"
