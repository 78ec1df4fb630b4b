"""Tabular Markov alpha-potential games.

Exact and sampled policy evaluation, best-response oracles, projected gradient
ascent and sequential smoothed best response, alpha-potential bounds and a
congestion / perturbed-team game zoo.
"""
__version__ = "0.1.0"

from .best_response import ExploitabilityReport, InducedMDP, exploitability, induce_mdp, solve_mdp
from .dynamics import (
    EvalMode,
    PGAConfig,
    RunTrace,
    SMBRConfig,
    improvement_table,
    pga_step,
    project_simplex,
    run,
    smbr_step,
    smoothed_br,
)
from .errors import AlphaPotError, ParameterError, ShapeError, SolverError
from .evaluation import (
    evaluate,
    exact_q,
    exact_values,
    sampled_q,
    smoothed_values,
    visitation,
)
from .game import JointPolicy, MarkovGame
from .kernels import BACKEND
from .potentials import (
    GapEstimate,
    PotentialSpec,
    estimate_gap,
    mcg_alpha_bound,
    pmtg_alpha_bound,
    potential_value,
    rosenthal_stage_potential,
)
from .zoo import CongestionGameSpec, TeamGameSpec, build_mcg, build_pmtg, build_team_game

__all__ = [
    "__version__",
    "BACKEND",
    "MarkovGame",
    "JointPolicy",
    "AlphaPotError",
    "ParameterError",
    "ShapeError",
    "SolverError",
    "evaluate",
    "exact_values",
    "exact_q",
    "visitation",
    "smoothed_values",
    "sampled_q",
    "InducedMDP",
    "induce_mdp",
    "solve_mdp",
    "exploitability",
    "ExploitabilityReport",
    "project_simplex",
    "smoothed_br",
    "pga_step",
    "smbr_step",
    "improvement_table",
    "EvalMode",
    "PGAConfig",
    "SMBRConfig",
    "RunTrace",
    "run",
    "PotentialSpec",
    "GapEstimate",
    "potential_value",
    "rosenthal_stage_potential",
    "mcg_alpha_bound",
    "pmtg_alpha_bound",
    "estimate_gap",
    "CongestionGameSpec",
    "TeamGameSpec",
    "build_mcg",
    "build_pmtg",
    "build_team_game",
]
