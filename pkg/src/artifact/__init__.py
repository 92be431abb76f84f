"""Desk-scale numerics for the reduction from negatively spiked Wishart testing
to approximating the Ising free energy at low temperature."""

from .analytic import AnalyticReport, ModelParams, constants, spherical_bound, sup_f
from .instances import CouplingMatrix, SpikedInstance, proj, sample_null, sample_planted
from .ising_exact import ExactSummary, exact_summary, gibbs_table

__all__ = [
    "AnalyticReport",
    "CouplingMatrix",
    "ExactSummary",
    "ModelParams",
    "SpikedInstance",
    "constants",
    "exact_summary",
    "gibbs_table",
    "proj",
    "sample_null",
    "sample_planted",
    "spherical_bound",
    "sup_f",
]
