"""Concrete environment kinds: stationary MDPs, Bernoulli bandits, i.i.d. processes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .env import Environment, Percept, _frozen, check_distribution
from .errors import AlphabetError, ValidationError


@dataclass(frozen=True)
class MdpSpec:
    """Stationary MDP with rewards fixed by the transition ``(a, s, s')``.

    ``transitions[a][s]`` is a probability vector over next states and
    ``rewards[a][s][s']`` the reward emitted on that transition.  Seen as an
    environment the percept is ``(s', rewards[a][s][s'])``.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    initial_state: int = 0
    r_max: float = 1.0

    def __post_init__(self):
        t = np.array(self.transitions, dtype=float)
        r = np.array(self.rewards, dtype=float)
        if t.ndim != 3 or t.shape[1] != t.shape[2] or t.shape[0] < 1 or t.shape[1] < 1:
            raise ValidationError("transitions", f"expected shape (actions, states, states), got {t.shape}")
        if r.shape != t.shape:
            raise ValidationError("rewards", f"shape {r.shape} does not match transitions {t.shape}")
        for a in range(t.shape[0]):
            for s in range(t.shape[1]):
                check_distribution(t[a, s], f"transitions[{a}][{s}]")
        bad = np.argwhere((r < 0) | (r > self.r_max))
        if len(bad):
            a, s, s2 = bad[0]
            raise ValidationError(f"rewards[{a}][{s}][{s2}]", f"reward outside [0, {self.r_max}]")
        if not 0 <= self.initial_state < t.shape[1]:
            raise ValidationError("initial_state", f"{self.initial_state} is not a state index")
        object.__setattr__(self, "transitions", _frozen(t))
        object.__setattr__(self, "rewards", _frozen(r))
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    def natural_percepts(self) -> tuple[Percept, ...]:
        """Every ``(s', r)`` pair the reward table can emit, sorted."""
        pairs = {
            Percept(s2, float(self.rewards[a, s, s2]))
            for a in range(self.n_actions)
            for s in range(self.n_states)
            for s2 in range(self.n_states)
        }
        return tuple(sorted(pairs))

    def expected_rewards(self) -> np.ndarray:
        """``[a, s]`` array of one-step expected reward."""
        return np.einsum("ast,ast->as", self.transitions, self.rewards)


@dataclass(frozen=True)
class BanditSpec:
    """Bernoulli arms paying reward 1 with probability ``arms[i]``."""

    arms: tuple[float, ...]

    def __post_init__(self):
        arms = tuple(float(p) for p in self.arms)
        if not arms:
            raise ValidationError("arms", "need at least one arm")
        for i, p in enumerate(arms):
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"arms[{i}]", f"success probability {p} outside [0, 1]")
        object.__setattr__(self, "arms", arms)


@dataclass(frozen=True)
class IidSpec:
    """Fixed percept distribution, independent of history and action."""

    percepts: tuple[Percept, ...]
    probs: tuple[float, ...]
    n_actions: int = 1

    def __post_init__(self):
        percepts = tuple(Percept(int(p[0]), float(p[1])) for p in self.percepts)
        probs = tuple(float(p) for p in self.probs)
        if len(percepts) != len(probs):
            raise ValidationError("probs", f"{len(probs)} probabilities for {len(percepts)} percepts")
        check_distribution(np.array(probs), "probs")
        object.__setattr__(self, "percepts", percepts)
        object.__setattr__(self, "probs", probs)


def _widen(natural: Sequence[Percept], percepts) -> tuple[Percept, ...]:
    if percepts is None:
        return tuple(natural)
    percepts = tuple(Percept(int(p[0]), float(p[1])) for p in percepts)
    missing = set(natural) - set(percepts)
    if missing:
        raise AlphabetError(f"alphabet lacks percepts {sorted(missing)}")
    return percepts


class MdpEnv(Environment):
    """An :class:`MdpSpec` viewed as a chronological environment; state = current MDP state."""

    def __init__(self, spec: MdpSpec, percepts=None):
        percepts = _widen(spec.natural_percepts(), percepts)
        super().__init__(spec.n_actions, percepts, spec.r_max)
        for i, p in enumerate(self.percepts):
            if p.obs >= spec.n_states:
                raise ValidationError(f"percepts[{i}]", f"observation {p.obs} is not a state of the MDP")
        self.spec = spec
        table = np.zeros((spec.n_states, spec.n_actions, self.n_percepts))
        for a in range(spec.n_actions):
            for s in range(spec.n_states):
                for s2 in range(spec.n_states):
                    xi = self._index[Percept(s2, float(spec.rewards[a, s, s2]))]
                    table[s, a, xi] += spec.transitions[a, s, s2]
        self._table = _frozen(table)
        self._rows = [[_frozen(table[s, a].copy()) for a in range(spec.n_actions)] for s in range(spec.n_states)]

    def initial_state(self):
        return self.spec.initial_state

    def next_state(self, state, y, xi):
        return self.percepts[xi].obs

    def predict(self, state, y):
        return self._rows[state][y]

    def state_of(self, h):
        for y, x in h:
            self.check_action(y)
            self.percept_index(x)
        return h[-1][1].obs if h else self.spec.initial_state


class BanditEnv(Environment):
    """Bernoulli bandit: a single-state MDP with percepts ``(0, 0)`` and ``(0, 1)``."""

    def __init__(self, spec: BanditSpec, percepts=None, r_max: float = 1.0):
        natural = (Percept(0, 0.0), Percept(0, 1.0))
        super().__init__(len(spec.arms), _widen(natural, percepts), r_max)
        self.spec = spec
        lo, hi = self._index[natural[0]], self._index[natural[1]]
        rows = []
        for p in spec.arms:
            row = np.zeros(self.n_percepts)
            row[hi] = p
            row[lo] = 1.0 - p
            rows.append(_frozen(row))
        self._rows = rows

    def initial_state(self):
        return 0

    def next_state(self, state, y, xi):
        return 0

    def predict(self, state, y):
        return self._rows[y]

    def state_of(self, h):
        for y, x in h:
            self.check_action(y)
            self.percept_index(x)
        return 0


class IidEnv(Environment):
    def __init__(self, spec: IidSpec, percepts=None, r_max: float = 1.0):
        super().__init__(spec.n_actions, _widen(spec.percepts, percepts), r_max)
        self.spec = spec
        row = np.zeros(self.n_percepts)
        for x, p in zip(spec.percepts, spec.probs):
            row[self._index[x]] = p
        self._row = _frozen(row)

    def initial_state(self):
        return 0

    def next_state(self, state, y, xi):
        return 0

    def predict(self, state, y):
        return self._row

    def state_of(self, h):
        for y, x in h:
            self.check_action(y)
            self.percept_index(x)
        return 0


def mdp_as_env(spec: MdpSpec, percepts=None) -> MdpEnv:
    return MdpEnv(spec, percepts)


def bandit_as_env(spec: BanditSpec, percepts=None, r_max: float = 1.0) -> BanditEnv:
    return BanditEnv(spec, percepts, r_max)


def iid_as_env(spec: IidSpec, percepts=None, r_max: float = 1.0) -> IidEnv:
    return IidEnv(spec, percepts, r_max)


def as_env(spec, percepts=None, r_max: float = 1.0) -> Environment:
    if isinstance(spec, MdpSpec):
        return MdpEnv(spec, percepts)
    if isinstance(spec, BanditSpec):
        return BanditEnv(spec, percepts, r_max)
    if isinstance(spec, IidSpec):
        return IidEnv(spec, percepts, r_max)
    raise TypeError(f"not an environment spec: {spec!r}")


def natural_percepts(spec) -> tuple[Percept, ...]:
    if isinstance(spec, MdpSpec):
        return spec.natural_percepts()
    if isinstance(spec, BanditSpec):
        return (Percept(0, 0.0), Percept(0, 1.0))
    return tuple(spec.percepts)


def check_ergodic(spec) -> bool:
    """Strong connectivity of the union support graph over all actions.

    Under the uniform random policy the induced chain has exactly this
    support graph, so strong connectivity means every state is visited
    infinitely often with probability one.  Bandits and i.i.d. processes
    have a single state.
    """
    if isinstance(spec, (BanditSpec, IidSpec)):
        return True
    graph = (spec.transitions > 0).any(axis=0)
    n, _ = connected_components(graph.astype(np.int8), directed=True, connection="strong")
    return n == 1


def random_mdp(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    reward_levels: Sequence[float] = (0.0, 1.0),
    sparsity: float = 0.0,
) -> MdpSpec:
    """Random MDP with Dirichlet rows and rewards drawn from ``reward_levels``."""
    t = rng.dirichlet(np.ones(n_states), size=(n_actions, n_states))
    if sparsity > 0:
        keep = rng.random(t.shape) >= sparsity
        keep[np.arange(n_actions)[:, None], np.arange(n_states)[None, :], t.argmax(axis=2)] = True
        t = np.where(keep, t, 0.0)
        t = t / t.sum(axis=2, keepdims=True)
    r = rng.choice(np.asarray(reward_levels, dtype=float), size=t.shape)
    return MdpSpec(t, r, 0, max(1.0, float(np.max(reward_levels))))
