"""High-order direct solver for variable-coefficient elliptic PDEs on a square.

The domain is split into a quadtree of boxes; boundary fluxes tabulated at
Gauss nodes on the leaf edges are the unknowns. Leaf flux-to-potential
operators are built by patch sampling, merged pairwise up the tree by Schur
complements, and the stored merge maps recover all interior fluxes from the
given boundary data in a single downward sweep.
"""

from .errors import (
    AccuracyError,
    DegenerateProblemError,
    InsufficientSamplingError,
    InvalidArgumentError,
    MergeSingularityError,
    N2DError,
)
from .geometry import BoxNode, EdgeGeom, QuadTree, Square, build_tree
from .operators import N2DOperator
from .problem import ProblemSpec, make_spec
from .quadrature import GaussRule, gauss_legendre, interp_matrix, map_to_segment

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "BoxNode",
    "DegenerateProblemError",
    "EdgeGeom",
    "GaussRule",
    "InsufficientSamplingError",
    "InvalidArgumentError",
    "MergeSingularityError",
    "N2DError",
    "N2DOperator",
    "ProblemSpec",
    "QuadTree",
    "Square",
    "build_tree",
    "gauss_legendre",
    "interp_matrix",
    "make_spec",
    "map_to_segment",
    "__version__",
]
