"""Achievable distortion region for a bivariate Gaussian source on a Gaussian broadcast channel."""

__version__ = "0.1.0"

from .analytic import (Regime, RegimeReport, classify_regime, d1_max, d1_min, d2_hybrid_frontier,
                       d2_star, d2_uncoded_frontier, gamma_threshold, genie_region)
from .curves import DistortionPoint, RegionCurve, SourceTag
from .model import GaussianVector, ProblemInstance, gaussian_mi, hybrid_joint_law, make_instance, mmse_estimate
from .schemes import (HybridParams, UncodedParams, hybrid_distortions, make_hybrid_params,
                      optimal_hybrid_params, separation_baseline, uncoded_distortions)

__all__ = [
    "Regime", "RegimeReport", "classify_regime", "d1_max", "d1_min", "d2_hybrid_frontier",
    "d2_star", "d2_uncoded_frontier", "gamma_threshold", "genie_region",
    "DistortionPoint", "RegionCurve", "SourceTag",
    "GaussianVector", "ProblemInstance", "gaussian_mi", "hybrid_joint_law", "make_instance",
    "mmse_estimate",
    "HybridParams", "UncodedParams", "hybrid_distortions", "make_hybrid_params",
    "optimal_hybrid_params", "separation_baseline", "uncoded_distortions",
]
