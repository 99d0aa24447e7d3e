"""B-CPACE: PAC exploration of Bayes-adaptive MDPs with nearest-neighbour value estimates."""

from .core import Belief, HyperState, LatentMdpFamily, belief_reward, belief_update, step_belief_mdp
from .envs import make_env
from .errors import (
    ArtifactVersionMismatch,
    BcpaceError,
    BudgetExhausted,
    ConfigError,
    EmptyKWindow,
    ImpossibleTransition,
    InvalidBelief,
    InvalidDiscount,
    InvalidParams,
    NonConvergence,
    OracleInfeasible,
    UnknownEnvironment,
)
from .evaluate import evaluate_policy, qmdp_policy
from .latent import (
    LatentQTable,
    LipschitzProfile,
    compute_lipschitz_profile,
    profile_for,
    qmdp_value,
    solve_latent_q,
    solve_latent_qtable,
)
from .oracle import BeliefGridOracle, oracle_optimal_return, oracle_solve
from .solver import QEstimate, Sample, SampleSet, SolverConfig, TrainingLog, run, sample_complexity_bound

__version__ = "0.1.0"

__all__ = [
    "ArtifactVersionMismatch",
    "BcpaceError",
    "Belief",
    "BeliefGridOracle",
    "BudgetExhausted",
    "ConfigError",
    "EmptyKWindow",
    "HyperState",
    "ImpossibleTransition",
    "InvalidBelief",
    "InvalidDiscount",
    "InvalidParams",
    "LatentMdpFamily",
    "LatentQTable",
    "LipschitzProfile",
    "NonConvergence",
    "OracleInfeasible",
    "QEstimate",
    "Sample",
    "SampleSet",
    "SolverConfig",
    "TrainingLog",
    "UnknownEnvironment",
    "belief_reward",
    "belief_update",
    "compute_lipschitz_profile",
    "evaluate_policy",
    "make_env",
    "oracle_optimal_return",
    "oracle_solve",
    "profile_for",
    "qmdp_policy",
    "qmdp_value",
    "run",
    "sample_complexity_bound",
    "solve_latent_q",
    "solve_latent_qtable",
    "step_belief_mdp",
]
