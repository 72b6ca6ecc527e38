"""Simulation and analysis toolkit for an optical commitment scheme built on
physical unclonable keys (PUKs).

The package models a multiple-scattering key as a random complex Gaussian
reflection matrix, shapes the input wavefront to focus light into a target
mode, samples dual-homodyne detection outcomes, runs the commit/reveal
protocol and evaluates cheating strategies against closed-form bounds.
"""

__version__ = "0.1.0"

from .errors import ConfigMismatchError, ParameterError
from .speckle import PhaseMask, PukKey, QuadPoint, gen_puk, mean_field, mean_quadratures
from .wavefront import OptimizationPolicy, enhancement, expected_enhancement, optimize_mask
from .detection import DhdModel, MeanEstimate, estimate_mean, sample_dhd
from .analysis import (
    AcceptRegion,
    SetupParams,
    critical_mu,
    delta,
    erf,
    majority_prob,
    p_in,
    p_in_max,
    p_in_opt,
    rho,
    rho_opt,
)
from .protocol import (
    AnalyzerConfig,
    Commitment,
    RejectReason,
    VerifyOutcome,
    commit,
    honest_accept_prob,
    reveal_verify,
)
from .adversary import CheatRecord, best_false_target, cheat_bound_sweep, multi_puk_search

__all__ = [
    "AcceptRegion",
    "AnalyzerConfig",
    "CheatRecord",
    "Commitment",
    "ConfigMismatchError",
    "DhdModel",
    "MeanEstimate",
    "OptimizationPolicy",
    "ParameterError",
    "PhaseMask",
    "PukKey",
    "QuadPoint",
    "RejectReason",
    "SetupParams",
    "VerifyOutcome",
    "best_false_target",
    "cheat_bound_sweep",
    "commit",
    "critical_mu",
    "delta",
    "enhancement",
    "erf",
    "estimate_mean",
    "expected_enhancement",
    "gen_puk",
    "honest_accept_prob",
    "majority_prob",
    "mean_field",
    "mean_quadratures",
    "multi_puk_search",
    "optimize_mask",
    "p_in",
    "p_in_max",
    "p_in_opt",
    "reveal_verify",
    "rho",
    "rho_opt",
    "sample_dhd",
]
