"""ritzgeo: geodesic boundary-value problems by direct energy minimization.

Paths between fixed endpoints are represented by a neural correction on top
of the straight line, the geodesic energy is evaluated by trapezoid
quadrature under a Riemannian metric, and the parameters are trained by
gradient descent. An independent Christoffel/shooting arm cross-checks the
variational solutions.
"""

__version__ = "0.1.0"

from .engine import backend_name

__all__ = ["__version__", "backend_name"]
