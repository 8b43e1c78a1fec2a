"""Agents: Bayes-optimal, informed, explore-then-exploit and uniform random."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .discount import DiscountSequence, exploration_length
from .env import Environment, History, Percept, draw
from .errors import DomainError
from .mixture import MixtureEnv, PosteriorState, WeightedClass, initial_posterior, update_posterior
from .models import MdpEnv, MdpSpec
from .valuation import (
    Policy,
    _discounted_q,
    _finite_q,
    argmax_low,
    expectimax_q,
    mdp_backward_induction,
)


@dataclass(frozen=True)
class Planning:
    """Either a finite horizon ``m`` or a discount sequence with truncation tolerance ``eps``."""

    horizon: int | None = None
    discount: DiscountSequence | None = None
    eps: float | None = None

    def __post_init__(self):
        if (self.horizon is None) == (self.discount is None):
            raise DomainError("give exactly one of horizon or discount")
        if self.discount is not None and (self.eps is None or self.eps <= 0):
            raise DomainError("discounted planning needs eps > 0")

    @classmethod
    def finite(cls, m: int) -> "Planning":
        return cls(horizon=m)

    @classmethod
    def discounted(cls, d: DiscountSequence, eps: float) -> "Planning":
        return cls(discount=d, eps=eps)

    def q_values(self, env: Environment, h: History, root=None) -> list[float]:
        k = len(h) + 1
        if self.horizon is not None:
            if root is None:
                return _finite_q(env, k, self.horizon, h)
            if k > self.horizon:
                raise DomainError(f"cycle {k} lies beyond horizon {self.horizon}")
            return expectimax_q(env, root, k, self.horizon, lambda i: 1.0)
        return _discounted_q(env, k, self.discount, self.eps, h, root)[0]


class BayesAgent(Policy):
    """Acts optimally for the Bayes mixture conditioned on the realized history.

    Replans from scratch every cycle.  The posterior is tracked incrementally
    in log space for the most recent history seen, but the chosen action is a
    pure function of the history passed in.  ``belief_digits`` rounds posterior
    weights inside the planning tree (see :class:`~bayesmix.mixture.MixtureEnv`);
    by default it is off for finite horizons and 12 for discounted planning,
    where the truncation depth grows with the cycle.
    """

    def __init__(self, cls: WeightedClass, planning: Planning, belief_digits: int | None = -1):
        self.cls = cls
        self.planning = planning
        self.n_actions = cls.n_actions
        if belief_digits == -1:
            belief_digits = None if planning.horizon is not None else 12
        self.mixture = MixtureEnv(cls, belief_digits)
        self._hist = History()
        self._post = initial_posterior(cls)

    def posterior(self, h: History) -> PosteriorState:
        """Posterior state for ``h``, extending the cached one when ``h`` continues it."""
        n = len(self._hist)
        if len(h) >= n and h[:n] == self._hist:
            post = self._post
            tail = h[n:]
        else:
            post = initial_posterior(self.cls)
            tail = h
        for y, x in tail:
            post = update_posterior(post, self.cls, y, x)
        self._hist, self._post = History(h), post
        return post

    def q_values(self, h: History) -> list[float]:
        root = self.mixture.state_from_posterior(self.posterior(h))
        return self.planning.q_values(self.mixture, h, root)

    def action(self, h: History) -> int:
        return argmax_low(self.q_values(h))


def bayes_act(agent: BayesAgent, h: History) -> int:
    return agent.action(h)


class InformedAgent(Policy):
    """Optimal policy for a known environment."""

    def __init__(self, env: Environment, planning: Planning):
        self.env = env
        self.planning = planning
        self.n_actions = env.n_actions

    def action(self, h: History) -> int:
        return argmax_low(self.planning.q_values(self.env, h))


def informed_act(env: Environment, planning: Planning, h: History) -> int:
    return InformedAgent(env, planning).action(h)


class RandomAgent(Policy):
    """Uniformly random actions drawn from the episode stream."""

    deterministic = False

    def __init__(self, n_actions: int):
        self.n_actions = n_actions

    def action_dist(self, h):
        return np.full(self.n_actions, 1.0 / self.n_actions)


def exploration_cutoff(m: int) -> int:
    """``k0 = ceil(m ** (2/3))`` computed exactly in integers."""
    if m < 1:
        raise DomainError(f"horizon must be >= 1, got {m}")
    target = m * m
    c = max(1, round(m ** (2.0 / 3.0)))
    while c**3 < target:
        c += 1
    while c > 1 and (c - 1) ** 3 >= target:
        c -= 1
    return c


def _exact_row(row: np.ndarray) -> np.ndarray:
    """Nudge one entry by a few ulps so that ``np.sum(row) == 1.0`` holds exactly."""
    if float(np.sum(row)) == 1.0:
        return row
    for j in np.argsort(-row, kind="stable"):
        if row[j] == 0.0:
            break
        cand = row.copy()
        cand[j] = 0.0
        base = 1.0 - float(np.sum(cand))
        for step in range(9):
            for sign in ((1, -1) if step else (1,)):
                v = base
                for _ in range(step):
                    v = np.nextafter(v, sign * np.inf)
                cand[j] = v
                if float(np.sum(cand)) == 1.0:
                    return cand
    return row


def estimate_transition(counts: np.ndarray, reward_sums: np.ndarray, r_max: float = 1.0,
                        initial_state: int = 0) -> MdpSpec:
    """Frequency estimate of an MDP from transition counts ``N[a, s, s']``.

    Unvisited ``(s, a)`` get a uniform row; unvisited triples get reward
    ``r_max / 2``, visited ones the empirical mean reward.
    """
    n = np.asarray(counts, dtype=float)
    r = np.asarray(reward_sums, dtype=float)
    if np.any(n < 0):
        raise DomainError("transition counts must be nonnegative")
    n_actions, n_states, _ = n.shape
    t = np.empty_like(n)
    for a in range(n_actions):
        for s in range(n_states):
            total = n[a, s].sum()
            row = n[a, s] / total if total > 0 else np.full(n_states, 1.0 / n_states)
            t[a, s] = _exact_row(row)
    with np.errstate(invalid="ignore", divide="ignore"):
        rew = np.where(n > 0, r / np.where(n > 0, n, 1.0), r_max / 2.0)
    return MdpSpec(t, np.clip(rew, 0.0, r_max), initial_state, r_max)


def _transition_stats(h: History, start: int, stop: int, n_states: int, n_actions: int,
                      initial_state: int):
    """Counts and reward sums of the transitions made at cycles ``start..stop-1``."""
    counts = np.zeros((n_actions, n_states, n_states))
    sums = np.zeros_like(counts)
    if stop <= start:
        return counts, sums
    s = initial_state if start == 1 else h[start - 2][1].obs
    for y, x in h[start - 1: stop - 1]:
        if not 0 <= x.obs < n_states:
            raise DomainError(f"observation {x.obs} is not a state index (< {n_states})")
        counts[y, s, x.obs] += 1
        sums[y, s, x.obs] += x.reward
        s = x.obs
    return counts, sums


class EteAgent(Policy):
    """Explore uniformly for cycles ``1..k0-1``, then plan to horizon ``m`` on the estimated MDP.

    Random actions come from the agent's own stream, derived from ``seed`` and
    the cycle index, so the agent is a pure function of ``(seed, history)``.
    """

    deterministic = False

    def __init__(self, n_states: int, n_actions: int, horizon: int, seed: int,
                 r_max: float = 1.0, initial_state: int = 0):
        self.n_states, self.n_actions = n_states, n_actions
        self.horizon = horizon
        self.k0 = exploration_cutoff(horizon)
        self.seed = seed
        self.r_max = r_max
        self.initial_state = initial_state
        self._plan_key = None
        self._plan = None

    def _state(self, h: History) -> int:
        s = h[-1][1].obs if h else self.initial_state
        if not 0 <= s < self.n_states:
            raise DomainError(f"observation {s} is not a state index (< {self.n_states})")
        return s

    def estimate(self, h: History) -> MdpSpec:
        counts, sums = _transition_stats(h, 1, min(len(h) + 1, self.k0), self.n_states,
                                         self.n_actions, self.initial_state)
        return estimate_transition(counts, sums, self.r_max, self.initial_state)

    def _exploit(self, h: History) -> int:
        k = len(h) + 1
        key = tuple(h[: self.k0 - 1])
        if key != self._plan_key:
            spec = self.estimate(h)
            self._plan = mdp_backward_induction(spec.transitions, spec.rewards, self.k0, self.horizon,
                                                lambda i: 1.0)
            self._plan_key = key
        return argmax_low(list(self._plan[k - self.k0, self._state(h)]))

    def action_dist(self, h):
        k = len(h) + 1
        if k > self.horizon:
            raise DomainError(f"cycle {k} lies beyond horizon {self.horizon}")
        if k < self.k0:
            self._state(h)
            return np.full(self.n_actions, 1.0 / self.n_actions)
        d = np.zeros(self.n_actions)
        d[self._exploit(h)] = 1.0
        return d

    def act(self, h, rng=None):
        k = len(h) + 1
        if k < self.k0 and k <= self.horizon:
            self._state(h)
            return int(np.random.default_rng([self.seed, k]).integers(self.n_actions))
        return int(np.argmax(self.action_dist(h)))


def ete_act(agent: EteAgent, h: History) -> int:
    return agent.act(h)


class DiscountedEteAgent(Policy):
    """Explore for ``ceil(sqrt(start))`` cycles from ``start``, then plan on the estimated MDP.

    Exploitation maximizes the ``eps``-truncated discounted value from the
    current cycle.  History before ``start`` is ignored; earlier cycles act
    randomly.  A geometric discount is accepted with a warning since its
    effective horizon stays bounded.
    """

    deterministic = False

    def __init__(self, n_states: int, n_actions: int, discount: DiscountSequence, eps: float,
                 seed: int, start: int = 1, r_max: float = 1.0, initial_state: int = 0):
        if discount.kind == "geometric":
            warnings.warn("geometric discount has a bounded effective horizon; "
                          "explore-then-exploit is not self-optimizing under it", RuntimeWarning)
        self.n_states, self.n_actions = n_states, n_actions
        self.discount, self.eps = discount, eps
        self.seed, self.start = seed, start
        self.window = exploration_length(start)
        self.r_max, self.initial_state = r_max, initial_state

    @property
    def explore_until(self) -> int:
        """First exploiting cycle."""
        return self.start + self.window

    def restart(self, k: int) -> "DiscountedEteAgent":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return DiscountedEteAgent(self.n_states, self.n_actions, self.discount, self.eps,
                                      self.seed, k, self.r_max, self.initial_state)

    def estimate(self, h: History) -> MdpSpec:
        stop = min(len(h) + 1, self.explore_until)
        counts, sums = _transition_stats(h, self.start, stop, self.n_states, self.n_actions,
                                         self.initial_state)
        return estimate_transition(counts, sums, self.r_max, self.initial_state)

    def _exploit(self, h: History) -> int:
        k = len(h) + 1
        spec = self.estimate(h)
        g_k = self.discount.tail(k)
        if g_k <= 0:
            raise DomainError(f"Gamma_{k} = 0 for discount {self.discount}")
        last = self.discount.truncation_end(k, self.eps, self.r_max)
        q = mdp_backward_induction(spec.transitions, spec.rewards, k, last, self.discount.gamma)
        s = h[-1][1].obs if h else self.initial_state
        return argmax_low(list(q[0, s]))

    def action_dist(self, h):
        k = len(h) + 1
        if k < self.explore_until:
            return np.full(self.n_actions, 1.0 / self.n_actions)
        d = np.zeros(self.n_actions)
        d[self._exploit(h)] = 1.0
        return d

    def act(self, h, rng=None):
        k = len(h) + 1
        if k < self.explore_until:
            return int(np.random.default_rng([self.seed, k]).integers(self.n_actions))
        return self._exploit(h)


def discounted_ete_act(agent: DiscountedEteAgent, h: History) -> int:
    return agent.act(h)


@dataclass(frozen=True)
class Episode:
    history: History
    total_reward: float


def run_episode(env: Environment, policy: Policy, n: int, rng: np.random.Generator) -> Episode:
    """Simulate ``n`` cycles; the policy draws (if it needs to) before the environment each cycle."""
    if n < 0:
        raise DomainError(f"cycle count must be >= 0, got {n}")
    if policy.n_actions != env.n_actions:
        raise DomainError(f"policy has {policy.n_actions} actions, environment {env.n_actions}")
    h = History()
    state = env.initial_state()
    total = 0.0
    for _ in range(n):
        y = policy.act(h, rng)
        xi = draw(env.predict(state, y), rng)
        x = env.percepts[xi]
        state = env.next_state(state, y, xi)
        h = h.extend(y, x)
        total += x.reward
    return Episode(h, total)
