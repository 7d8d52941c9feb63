"""Differentially private k-means clustering.

Four private algorithms (DPLloyd, GkM, PGkM, EUGkM), closed-form error
models, the hybrid EUGkM + DPLloyd method and a benchmark harness. The
algorithm functions live in their modules (``dpkmeans.eugkm.eugkm`` and
so on); the package root exports the estimators and common types.
"""

from .data import Dataset, FormatError, SyntheticSpec, gen_synthetic, load_csv, normalize
from .estimators import DomainScaler, DPLloydKMeans, EUGkMKMeans, GkMKMeans, HybridKMeans, PGkMKMeans
from .kmeans import lloyd, nicv, sphere_packing_init
from .mechanisms import Budget, BudgetExceededError, ParameterError

__version__ = "0.1.0"
