"""qqlab: gate- and pulse-level simulation of a single-ququart parity algorithm.

The package decides whether a cyclic permutation of d objects is a shift or
a reflection with one oracle query on a single d-level system, and simulates
the full NMR realization on a spin-3/2 nucleus: pseudo-pure state
preparation, strong-modulating-pulse gate synthesis, and state tomography.
"""

__version__ = "0.1.0"

from . import figures, parity, qudit, smp, spins, tomography  # noqa: F401
