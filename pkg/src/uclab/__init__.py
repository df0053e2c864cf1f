"""uclab: numerical lab for quantitative unique continuation.

Explicit eigenfunction counterexamples (annulus constructions and radial
Laurent-induction), the recursive exponent iteration with its lower-bound
envelopes, and numerical probes of the weighted inequality driving it all.
"""

from . import carleman, engine, meshkov, radial, report, scalar
from ._kernels import backend_name

__version__ = "0.1.0"

__all__ = ["carleman", "engine", "meshkov", "radial", "report", "scalar",
           "backend_name", "__version__"]
