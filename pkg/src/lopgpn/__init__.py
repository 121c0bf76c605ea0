"""Second-order uncertainty for graph node classification.

Subpackages and modules:

* ``sparse``, ``kernels``  CSR matrices with a compiled or numpy backend
* ``propagation``          personalized-PageRank operators and powers
* ``secondorder``          Dirichlet and mixture uncertainty measures
* ``diffmath``             reverse-mode autodiff, special functions, Adam
* ``models``               PostNet, APPNP, GPN and LOP-GPN, checkpoints
* ``datasets``             dataset format, splits, SBM graphs, OOD scenarios
* ``evaluation``           accuracy-rejection curves and OOD AUC
* ``cli``                  the ``lopgpn`` command
"""

from .kernels import BACKEND
from .propagation import PprConfig, ppr_matrix, propagate_dense
from .secondorder import Dirichlet, DirichletMixture, UncertaintyReport
from .sparse import SparseMatrix

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Dirichlet",
    "DirichletMixture",
    "PprConfig",
    "SparseMatrix",
    "UncertaintyReport",
    "__version__",
    "ppr_matrix",
    "propagate_dense",
]
