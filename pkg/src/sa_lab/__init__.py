"""Selfadjoint extensions of semibounded operators with finite deficiency indices.

Submodules
----------
green        finite-dimensional Green-space machinery on E
realization  interval Laplacians, secular eigensolvers, synthetic eigen-data
oracle       finite-difference cross-checks
series       delta coefficients, Sobolev profiles, F_D(lambda)
instability  instability verdicts, kernel flow, curves, certificates, audits
cli          batch driver
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .green import (  # noqa: F401
    ExtensionSpace,
    GraphChart,
    LagrangianDomain,
    Subspace,
    validate_space,
)
from .realization import FullLaplacian, PinnedLaplacian, SyntheticRealization  # noqa: F401
