"""High-precision Eulerian Laplacian pseudoinverses and random-walk probabilities."""

__version__ = "0.1.0"
