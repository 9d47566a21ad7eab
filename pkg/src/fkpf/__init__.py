"""Monte Carlo Feynman-Kac engine for a particle in an open domain coupled
to a finite-mode quantized field, with an exact-diagonalization oracle."""

__version__ = "0.1.0"
