"""Synthetic operator-learning datasets: Burgers, linear advection and Darcy flow."""

from .advection import solve_advection, solve_advection_batch
from .burgers import SolverBlowUp, solve_burgers, solve_burgers_batch, stable_dt
from .darcy import (CGNotConverged, kl_basis, kl_field, region_mask, sample_darcy_coeff,
                    sample_darcy_coeff_batch, solve_darcy, solve_darcy_array)
from .domains import (PRESETS, SPLITS, Dataset, DomainSpec, SamplePair, SpecMismatch,
                      generate_domain, generate_split)
from .grf import grf_eigenvalues, pointwise_variance, sample_grf_1d, sample_grf_1d_batch
from .types import GridFunction

__all__ = [
    "CGNotConverged", "Dataset", "DomainSpec", "GridFunction", "PRESETS", "SPLITS",
    "SamplePair", "SolverBlowUp", "SpecMismatch", "generate_domain", "generate_split",
    "grf_eigenvalues", "kl_basis", "kl_field", "pointwise_variance", "region_mask",
    "sample_darcy_coeff", "sample_darcy_coeff_batch", "sample_grf_1d", "sample_grf_1d_batch",
    "solve_advection", "solve_advection_batch", "solve_burgers", "solve_burgers_batch",
    "solve_darcy", "solve_darcy_array", "stable_dt",
]
