"""Bayes-mixture agents for general reinforcement learning over countable environment classes."""
from .discount import DiscountSequence, effective_horizon, exploration_length, gamma_tail
from .env import Environment, FunctionEnv, History, Percept, RandomEnv, env_prob, env_sample, seq_prob
from .errors import (
    AlphabetError,
    BudgetError,
    DomainError,
    IncompletePolicyError,
    UndefinedConditionalError,
    ValidationError,
)
from .mixture import (
    MixtureEnv,
    PosteriorState,
    WeightedClass,
    conditional_z_expectation,
    evidence_ratio,
    mixture_env,
    posterior_weights,
    update_posterior,
)
from .models import (
    BanditSpec,
    IidSpec,
    MdpSpec,
    as_env,
    bandit_as_env,
    check_ergodic,
    iid_as_env,
    mdp_as_env,
    random_mdp,
)
from .policies import (
    BayesAgent,
    DiscountedEteAgent,
    EteAgent,
    InformedAgent,
    Planning,
    RandomAgent,
    bayes_act,
    discounted_ete_act,
    ete_act,
    informed_act,
    run_episode,
)
from .valuation import (
    PolicyTable,
    ValueReport,
    discounted_optimal_action,
    discounted_optimal_value,
    discounted_value_of_policy,
    enumerate_policies,
    optimal_action,
    optimal_value,
    value_of_policy,
)

__version__ = "0.1.0"
