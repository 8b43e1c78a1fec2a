"""Bayes mixtures over a finite environment class.

Evidence is accumulated in log space; a component that assigns zero
probability to the realized history keeps its index with log-evidence
``-inf`` and therefore an exact zero posterior.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .env import Environment, History, Percept
from .errors import UndefinedConditionalError, ValidationError

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class WeightedClass:
    """Environments sharing alphabets and ``r_max``, with positive prior weights summing to one."""

    envs: tuple[Environment, ...]
    weights: np.ndarray

    def __post_init__(self):
        envs = tuple(self.envs)
        w = np.array(self.weights, dtype=float)
        if not envs:
            raise ValidationError("environments", "class must contain at least one environment")
        if w.shape != (len(envs),):
            raise ValidationError("weights", f"{w.size} weights for {len(envs)} environments")
        for i, wi in enumerate(w):
            if not wi > 0:
                raise ValidationError(f"weights[{i}]", f"weight {wi} must be positive")
        if abs(float(w.sum()) - 1.0) > WEIGHT_TOL:
            raise ValidationError("weights", f"weights sum to {float(w.sum())!r}, not 1")
        first = envs[0]
        for i, e in enumerate(envs[1:], 1):
            if e.n_actions != first.n_actions or e.percepts != first.percepts or e.r_max != first.r_max:
                raise ValidationError(f"environments[{i}]", "alphabets or r_max differ from environments[0]")
        w.flags.writeable = False
        object.__setattr__(self, "envs", envs)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.envs)

    @property
    def n_actions(self) -> int:
        return self.envs[0].n_actions

    @property
    def percepts(self) -> tuple[Percept, ...]:
        return self.envs[0].percepts

    @property
    def r_max(self) -> float:
        return self.envs[0].r_max

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    @classmethod
    def uniform(cls, envs: Sequence[Environment]) -> "WeightedClass":
        return cls(tuple(envs), np.full(len(envs), 1.0 / len(envs)))


@dataclass(frozen=True)
class PosteriorState:
    """Per-environment log-evidence ``log nu(history)`` and component states at cycle ``k``."""

    log_evidence: np.ndarray
    k: int
    states: tuple

    def weights(self, cls: WeightedClass) -> np.ndarray:
        a = cls.log_weights + self.log_evidence
        top = np.max(a)
        if top == -np.inf:
            raise UndefinedConditionalError(f"history has probability 0 under every environment (cycle {self.k})")
        p = np.exp(a - top)
        return p / p.sum()

    def log_mixture(self, cls: WeightedClass) -> float:
        """``log xi(history)``."""
        return float(logsumexp(cls.log_weights + self.log_evidence))


def initial_posterior(cls: WeightedClass) -> PosteriorState:
    return PosteriorState(np.zeros(len(cls)), 1, tuple(e.initial_state() for e in cls.envs))


def _step_logprobs(cls: WeightedClass, state: PosteriorState, y: int, xi: int) -> np.ndarray:
    p = np.array([e.predict(s, y)[xi] for e, s in zip(cls.envs, state.states)])
    with np.errstate(divide="ignore"):
        return np.log(p)


def update_posterior(state: PosteriorState, cls: WeightedClass, y: int, x: Percept) -> PosteriorState:
    """Extend the accumulated evidence by one cycle."""
    cls.envs[0].check_action(y)
    xi = cls.envs[0].percept_index(x)
    return _advance(state, cls, y, xi)


def _advance(state: PosteriorState, cls: WeightedClass, y: int, xi: int) -> PosteriorState:
    lp = _step_logprobs(cls, state, y, xi)
    evidence = state.log_evidence + lp
    states = tuple(e.next_state(s, y, xi) for e, s in zip(cls.envs, state.states))
    post = PosteriorState(evidence, state.k + 1, states)
    post.weights(cls)  # raises if the history became impossible under every environment
    return post


def posterior_state(cls: WeightedClass, h: History) -> PosteriorState:
    state = initial_posterior(cls)
    for y, x in h:
        state = update_posterior(state, cls, y, x)
    return state


def posterior_weights(cls: WeightedClass, h: History) -> np.ndarray:
    """``w_nu * nu(h) / xi(h)`` for every class member."""
    return posterior_state(cls, h).weights(cls)


class MixtureEnv(Environment):
    """The Bayes mixture as an environment.

    The state is ``(component_states, posterior_weights)``; predictions are the
    posterior-weighted average of the component predictions.  With
    ``belief_digits`` set, posterior weights in successor states are rounded
    to that many decimals so that planning trees can merge nodes whose
    beliefs agree to that precision.
    """

    def __init__(self, cls: WeightedClass, belief_digits: int | None = None):
        super().__init__(cls.n_actions, cls.percepts, cls.r_max)
        self.cls = cls
        self.belief_digits = belief_digits

    def _key(self, states, w: np.ndarray):
        if self.belief_digits is not None:
            w = np.round(w, self.belief_digits) + 0.0
        return (tuple(states), tuple(float(v) for v in w))

    def initial_state(self):
        return self._key((e.initial_state() for e in self.cls.envs), self.cls.weights)

    def state_from_posterior(self, post: PosteriorState):
        return self._key(post.states, post.weights(self.cls))

    def state_of(self, h):
        return self.state_from_posterior(posterior_state(self.cls, h))

    def _stack(self, state, y):
        states, _ = state
        return np.array([e.predict(s, y) for e, s in zip(self.cls.envs, states)])

    def predict(self, state, y):
        return np.asarray(state[1]) @ self._stack(state, y)

    def next_state(self, state, y, xi):
        return self._successor(state, y, xi, self._stack(state, y))

    def _successor(self, state, y, xi, stack):
        states, w = state
        post = np.asarray(w) * stack[:, xi]
        total = post.sum()
        if total <= 0:
            raise UndefinedConditionalError("percept has probability 0 under the mixture")
        nxt = (e.next_state(s, y, xi) for e, s in zip(self.cls.envs, states))
        return self._key(nxt, post / total)

    def transitions(self, state, y, children=True):
        stack = self._stack(state, y)
        d = np.asarray(state[1]) @ stack
        out = []
        for xi in np.flatnonzero(d):
            xi = int(xi)
            child = self._successor(state, y, xi, stack) if children else None
            out.append((xi, float(d[xi]), child))
        return out


def mixture_env(cls: WeightedClass, belief_digits: int | None = None) -> MixtureEnv:
    return MixtureEnv(cls, belief_digits)


@dataclass(frozen=True)
class EvidenceRatio:
    """``z = xi(history) / mu(history)`` at cycle ``k`` (history of length ``k - 1``)."""

    value: float
    k: int


def _log_z(cls: WeightedClass, state: PosteriorState, true_index: int) -> float:
    lmu = state.log_evidence[true_index]
    if lmu == -np.inf:
        raise UndefinedConditionalError(
            f"history has probability 0 under the true environment (cycle {state.k})"
        )
    return state.log_mixture(cls) - float(lmu)


def evidence_ratio(cls: WeightedClass, true_index: int, h: History) -> EvidenceRatio:
    state = posterior_state(cls, h)
    return EvidenceRatio(float(np.exp(_log_z(cls, state, true_index))), state.k)


def z_from_state(cls: WeightedClass, state: PosteriorState, true_index: int) -> float:
    return float(np.exp(_log_z(cls, state, true_index)))


def conditional_z_from_state(cls: WeightedClass, state: PosteriorState, true_index: int, y: int) -> float:
    """Exact ``E_mu[z_k | history, y]`` summed over percepts with ``mu``-probability > 0."""
    _log_z(cls, state, true_index)
    mu = cls.envs[true_index]
    d = mu.predict(state.states[true_index], y)
    total = 0.0
    for xi in np.flatnonzero(d):
        nxt = _advance(state, cls, y, int(xi))
        total += float(d[xi]) * float(np.exp(_log_z(cls, nxt, true_index)))
    return total


def conditional_z_expectation(cls: WeightedClass, true_index: int, h: History, y: int) -> float:
    cls.envs[0].check_action(y)
    return conditional_z_from_state(cls, posterior_state(cls, h), true_index, y)
