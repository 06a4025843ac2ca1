"""Lattice approximation of reflected stochastic elliptic PDEs on (0,1)^d.

Subpackages cover the grid and its sine eigenbasis (:mod:`respde.lattice`),
the Green kernels of the continuous and discrete operators
(:mod:`respde.greens`), Brownian-sheet cell increments with refinement
coupling (:mod:`respde.noise`), the discrete obstacle problem
(:mod:`respde.obstacle`), the Picard construction of the reflected solution
(:mod:`respde.spde`) and the experiment harness (:mod:`respde.harness`).
"""

from respde.lattice import GridField, GridSpec

__all__ = ["GridSpec", "GridField"]
__version__ = "0.1.0"
