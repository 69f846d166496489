"""Numerical verification toolkit for a Fock-space interaction operator.

The package represents sector functions symbolically, applies the creation
and annihilation parts of the interaction exactly where possible, and checks
identities and norm bounds by quadrature and importance-sampled Monte Carlo.
"""

__version__ = "0.1.0"
