"""Histories, percepts and chronological environments.

An environment assigns a probability to the next percept given the full
action/percept history and the current action.  Every concrete environment
is described by a hashable *state*, a summary of the history that is
sufficient for prediction.  Generic environments use the history itself;
Markov environments use the last observation.  The planners in
:mod:`bayesmix.valuation` merge tree nodes that share a state.
"""
from __future__ import annotations

import abc
from typing import Callable, Hashable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import AlphabetError, DomainError, ValidationError

NORMALIZATION_TOL = 1e-9


class Percept(NamedTuple):
    """Observation index plus reward."""

    obs: int
    reward: float


class History(tuple):
    """Immutable alternating sequence of ``(action, Percept)`` pairs.

    A history of length ``k - 1`` is the conditioning object at cycle ``k``.
    """

    __slots__ = ()

    def __new__(cls, pairs: Iterable = ()):
        return super().__new__(cls, tuple((int(y), Percept(int(x[0]), float(x[1]))) for y, x in pairs))

    def extend(self, y: int, x: Percept) -> "History":
        return tuple.__new__(History, (*self, (y, x)))

    @property
    def actions(self) -> tuple[int, ...]:
        return tuple(y for y, _ in self)

    @property
    def percepts(self) -> tuple[Percept, ...]:
        return tuple(x for _, x in self)

    def prefix(self, n: int) -> "History":
        return tuple.__new__(History, self[:n])

    def __repr__(self) -> str:
        return "History(" + " ".join(f"{y}:{x.obs}/{x.reward:g}" for y, x in self) + ")"


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class Environment(abc.ABC):
    """A chronological environment over finite action and percept alphabets."""

    def __init__(self, n_actions: int, percepts: Sequence[Percept], r_max: float = 1.0):
        if n_actions < 1:
            raise ValidationError("n_actions", "need at least one action")
        percepts = tuple(Percept(int(p[0]), float(p[1])) for p in percepts)
        if not percepts:
            raise ValidationError("percepts", "empty percept alphabet")
        if len(set(percepts)) != len(percepts):
            raise ValidationError("percepts", "duplicate percepts in alphabet")
        for i, p in enumerate(percepts):
            if not 0.0 <= p.reward <= r_max:
                raise ValidationError(f"percepts[{i}]", f"reward {p.reward} outside [0, {r_max}]")
            if p.obs < 0:
                raise ValidationError(f"percepts[{i}]", "negative observation index")
        self.n_actions = int(n_actions)
        self.percepts = percepts
        self.r_max = float(r_max)
        self.rewards = _frozen(np.array([p.reward for p in percepts]))
        self._index = {p: i for i, p in enumerate(percepts)}

    @property
    def n_percepts(self) -> int:
        return len(self.percepts)

    def percept_index(self, x: Percept) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise AlphabetError(f"percept {x} not in alphabet") from None

    def check_action(self, y: int) -> int:
        if not 0 <= y < self.n_actions:
            raise AlphabetError(f"action {y} outside alphabet of size {self.n_actions}")
        return y

    # -- state interface --------------------------------------------------

    @abc.abstractmethod
    def initial_state(self) -> Hashable:
        """State for the empty history."""

    @abc.abstractmethod
    def next_state(self, state: Hashable, y: int, xi: int) -> Hashable:
        """State after appending action ``y`` and percept index ``xi``."""

    @abc.abstractmethod
    def predict(self, state: Hashable, y: int) -> np.ndarray:
        """Probability vector over the percept alphabet (read-only)."""

    def transitions(self, state: Hashable, y: int, children: bool = True):
        """``(xi, prob, child_state)`` for each percept with nonzero probability."""
        d = self.predict(state, y)
        out = []
        for xi in np.flatnonzero(d):
            xi = int(xi)
            out.append((xi, float(d[xi]), self.next_state(state, y, xi) if children else None))
        return out

    def state_of(self, h: History) -> Hashable:
        s = self.initial_state()
        for y, x in h:
            s = self.next_state(s, self.check_action(y), self.percept_index(x))
        return s

    # -- history interface --------------------------------------------------

    def dist(self, h: History, y: int) -> np.ndarray:
        return self.predict(self.state_of(h), self.check_action(y))

    def prob(self, h: History, y: int, x: Percept) -> float:
        xi = self.percept_index(x)
        return float(self.dist(h, y)[xi])

    def sample(self, h: History, y: int, rng: np.random.Generator) -> Percept:
        return self.percepts[draw(self.dist(h, y), rng)]


def draw(p: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of an index from probability vector ``p``."""
    c = np.cumsum(p)
    # side="right" skips zero-probability entries
    i = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    return min(i, int(np.flatnonzero(p)[-1]))


def check_distribution(p: np.ndarray, field: str = "distribution") -> None:
    if np.any(p < 0) or np.any(p > 1):
        raise ValidationError(field, "probabilities must lie in [0, 1]")
    if abs(float(np.sum(p)) - 1.0) > NORMALIZATION_TOL:
        raise ValidationError(field, f"probabilities sum to {float(np.sum(p))!r}, not 1")


class FunctionEnv(Environment):
    """Environment defined by a callable ``fn(history, action) -> probabilities``."""

    def __init__(self, n_actions, percepts, fn: Callable[[History, int], Sequence[float]], r_max=1.0):
        super().__init__(n_actions, percepts, r_max)
        self._fn = fn

    def initial_state(self):
        return History()

    def next_state(self, state, y, xi):
        return state.extend(y, self.percepts[xi])

    def predict(self, state, y):
        p = np.asarray(self._fn(state, y), dtype=float)
        if p.shape != (self.n_percepts,):
            raise DomainError(f"expected {self.n_percepts} probabilities, got shape {p.shape}")
        return _frozen(p)

    def state_of(self, h):
        for y, x in h:
            self.check_action(y)
            self.percept_index(x)
        return History(h)


class RandomEnv(Environment):
    """A fully history-dependent random environment.

    The percept distribution for each (history, action) is drawn lazily from
    a Dirichlet(1) law keyed on ``seed`` and the history, so the environment is
    a fixed deterministic object that can be queried at any depth.  With
    ``sparsity > 0`` each entry is zeroed with that probability (keeping at
    least one).
    """

    def __init__(self, n_actions, percepts, seed: int, sparsity: float = 0.0, r_max=1.0):
        super().__init__(n_actions, percepts, r_max)
        self.seed = int(seed)
        self.sparsity = float(sparsity)
        self._cache: dict = {}

    def initial_state(self):
        return ()

    def next_state(self, state, y, xi):
        return state + ((y, xi),)

    def predict(self, state, y):
        key = (state, y)
        p = self._cache.get(key)
        if p is None:
            flat = [v for pair in state for v in pair]
            rng = np.random.default_rng([self.seed, len(state), *flat, y])
            p = rng.dirichlet(np.ones(self.n_percepts))
            if self.sparsity > 0:
                keep = rng.random(self.n_percepts) >= self.sparsity
                keep[int(np.argmax(p))] = True
                p = np.where(keep, p, 0.0)
                p = p / p.sum()
            p = self._cache.setdefault(key, _frozen(p))
        return p


def env_prob(env: Environment, h: History, y: int, x: Percept) -> float:
    """Probability that ``env`` emits ``x`` after history ``h`` and action ``y``."""
    return env.prob(h, y, x)


def env_sample(env: Environment, h: History, y: int, rng: np.random.Generator) -> Percept:
    return env.sample(h, y, rng)


def seq_prob(env: Environment, h: History, actions: Sequence[int], percepts: Sequence[Percept]) -> float:
    """Chain-rule probability of ``percepts`` given ``actions`` after ``h``."""
    if len(actions) != len(percepts):
        raise DomainError(f"{len(actions)} actions but {len(percepts)} percepts")
    p = 1.0
    for y, x in zip(actions, percepts):
        p *= env.prob(h, y, x)
        h = h.extend(y, x)
    return p
