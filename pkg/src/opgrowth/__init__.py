"""opgrowth: path counting and growth-rate estimation for supercritical
oriented percolation on Z^d x N.

The environment is a seeded pure function of edge addresses (config),
fronts and coupled zones evolve over finite windows (dynamics), open paths
are counted exactly or in the log domain (counting), essential hitting
times drive regenerating chains (hitting), and Monte Carlo estimators turn
those primitives into growth constants with uncertainty (estimators).
A brute-force oracle backs the tests at desk scale (oracle).
"""

__version__ = "0.1.0"

from .config import Box, EdgeAddress, LatticeParams, Site, TranslationVector

__all__ = [
    "Box",
    "EdgeAddress",
    "LatticeParams",
    "Site",
    "TranslationVector",
    "__version__",
]
