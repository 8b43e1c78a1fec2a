"""Exact values, expectimax planning and brute-force policy enumeration.

Rewards at cycle ``i`` are weighted by ``gamma_i``; finite-horizon values use
unit weights up to the horizon ``m`` and are reported raw, discounted values
are divided by ``Gamma_k``.  All arg-max operations break ties toward the
lowest action index.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterator

import numpy as np

from .discount import DiscountSequence
from .env import Environment, History
from .errors import BudgetError, DomainError, IncompletePolicyError

TIE_TOL = 1e-12


def policy_cap() -> int:
    return int(os.environ.get("BAYESMIX_MAX_POLICIES", 10**6))


def node_cap() -> int:
    return int(os.environ.get("BAYESMIX_MAX_NODES", 10**6))


def argmax_low(q) -> int:
    """Index of the maximum, preferring the lowest index among near-ties."""
    best = max(q)
    tol = TIE_TOL * max(1.0, abs(best))
    for i, v in enumerate(q):
        if v >= best - tol:
            return i
    raise AssertionError("unreachable")


class Policy:
    """Chronological action chooser.

    Deterministic policies implement :meth:`action`; probabilistic ones
    override :meth:`action_dist` and set ``deterministic = False``.
    """

    n_actions: int
    deterministic = True

    def action(self, h: History) -> int:
        raise NotImplementedError

    def action_dist(self, h: History) -> np.ndarray:
        d = np.zeros(self.n_actions)
        d[self.action(h)] = 1.0
        return d

    def act(self, h: History, rng: np.random.Generator) -> int:
        if self.deterministic:
            return self.action(h)
        from .env import draw

        return draw(self.action_dist(h), rng)


@dataclass
class PolicyTable(Policy):
    """Deterministic policy given as a map from percept-index histories to actions.

    Keys are tuples of percept indices ``x_{<k}`` for ``k = 1..horizon``; a
    deterministic policy's own earlier actions are implied by the percepts.
    ``percepts`` (the alphabet) is needed only when the table is queried
    with a :class:`History`.
    """

    n_actions: int
    n_percepts: int
    horizon: int
    table: dict = field(default_factory=dict)
    percepts: tuple | None = None
    label: str = ""

    def lookup(self, xkey: tuple) -> int:
        try:
            return self.table[xkey]
        except KeyError:
            raise IncompletePolicyError(f"policy table has no entry for percept history {xkey}") from None

    def action(self, h: History) -> int:
        if self.percepts is None:
            raise DomainError("policy table has no percept alphabet bound")
        index = {p: i for i, p in enumerate(self.percepts)}
        return self.lookup(tuple(index[x] for x in h.percepts))

    def bind(self, percepts) -> "PolicyTable":
        return PolicyTable(self.n_actions, self.n_percepts, self.horizon, self.table, tuple(percepts), self.label)


@dataclass(frozen=True)
class ValueReport:
    """A value with its normalization (``raw`` or ``discounted``), last cycle included and truncation bound."""

    value: float
    normalization: str
    depth: int
    error_bound: float = 0.0


# -- policy evaluation -------------------------------------------------------


def _evaluate(env: Environment, policy: Policy, h: History, k: int, last: int,
              weight: Callable[[int], float], cache: dict | None = None) -> float:
    """Exact ``E[sum_{i=k}^{last} weight(i) r_i]`` under ``policy`` from history ``h``."""
    percepts, rewards = env.percepts, env.rewards.tolist()
    if cache is None:
        cache = {}
    table = policy if isinstance(policy, PolicyTable) else None
    if table is not None:
        index = env._index
        xkey0 = tuple(index[x] for x in h.percepts)

    def trans(state, y, need):
        key = (state, y, need)
        t = cache.get(key)
        if t is None:
            t = cache[key] = env.transitions(state, y, need)
        return t

    def rec(hist, state, xkey, i):
        w = weight(i)
        if table is not None:
            adist = ((table.lookup(xkey), 1.0),)
        else:
            d = policy.action_dist(hist)
            adist = tuple((int(y), float(d[y])) for y in np.flatnonzero(d))
        total = 0.0
        deeper = i < last
        for y, pa in adist:
            acc = 0.0
            for xi, p, child in trans(state, y, deeper):
                v = w * rewards[xi]
                if deeper:
                    v += rec(hist.extend(y, percepts[xi]) if table is None else None,
                             child, xkey + (xi,) if table is not None else None, i + 1)
                acc += p * v
            total += pa * acc
        return total

    if k > last:
        return 0.0
    return rec(h, env.state_of(h), xkey0 if table is not None else None, k)


def _check_history(h: History, k: int) -> None:
    if len(h) != k - 1:
        raise DomainError(f"history of length {len(h)} does not precede cycle {k}")


def value_of_policy(env: Environment, policy: Policy, k: int, m: int, h: History = History(),
                    cache: dict | None = None) -> ValueReport:
    """Raw expected reward sum ``r_k + ... + r_m`` of ``policy``."""
    _check_history(h, k)
    if k > m + 1:
        raise DomainError(f"cycle {k} lies beyond horizon {m}")
    v = _evaluate(env, policy, h, k, m, lambda i: 1.0, cache)
    return ValueReport(v, "raw", m)


def discounted_value_of_policy(env: Environment, policy: Policy, k: int, d: DiscountSequence,
                               eps: float, h: History = History()) -> ValueReport:
    """Normalized discounted value, exact up to the ``eps`` truncation depth."""
    _check_history(h, k)
    g_k = d.tail(k)
    if g_k <= 0:
        raise DomainError(f"Gamma_{k} = 0 for discount {d}")
    last = d.truncation_end(k, eps, env.r_max)
    v = _evaluate(env, policy, h, k, last, d.gamma) / g_k
    return ValueReport(v, "discounted", last, env.r_max * d.tail(last + 1) / g_k)


# -- expectimax --------------------------------------------------------------


def expectimax_q(env: Environment, root: Hashable, k: int, last: int,
                 weight: Callable[[int], float], cap: int | None = None) -> list[float]:
    """Root action values of ``max_y sum_x ... weight(i) r_i`` over cycles ``k..last``.

    Nodes of equal environment state at equal depth are merged; for
    history-keyed environments this is the plain expectimax tree.
    """
    cap = node_cap() if cap is None else cap
    n_actions, rewards = env.n_actions, env.rewards.tolist()
    frontier = [root]
    edges = []
    nodes = 1
    for i in range(k, last + 1):
        w = weight(i)
        deeper = i < last
        index: dict = {}
        nxt = []
        level = []
        for s in frontier:
            per_action = []
            for y in range(n_actions):
                branch = []
                for xi, p, child in env.transitions(s, y, deeper):
                    ci = -1
                    if deeper:
                        ci = index.get(child)
                        if ci is None:
                            ci = index[child] = len(nxt)
                            nxt.append(child)
                    branch.append((p, w * rewards[xi], ci))
                per_action.append(branch)
            level.append(per_action)
        nodes += len(nxt)
        if nodes > cap:
            raise BudgetError(f"expectimax tree exceeds {cap} nodes at cycle {i + 1}")
        edges.append(level)
        frontier = nxt
    values: list[float] = []
    for depth in range(len(edges) - 1, -1, -1):
        cur = []
        for per_action in edges[depth]:
            q = [sum(p * (r + (values[ci] if ci >= 0 else 0.0)) for p, r, ci in branch) for branch in per_action]
            if depth == 0:
                return q
            cur.append(max(q))
        values = cur
    return [0.0] * n_actions


def _finite_q(env: Environment, k: int, m: int, h: History) -> list[float]:
    _check_history(h, k)
    if k > m:
        raise DomainError(f"cycle {k} lies beyond horizon {m}")
    return expectimax_q(env, env.state_of(h), k, m, lambda i: 1.0)


def optimal_value(env: Environment, k: int, m: int, h: History = History()) -> ValueReport:
    """``V*_{km}`` by expectimax."""
    _check_history(h, k)
    if k == m + 1:
        return ValueReport(0.0, "raw", m)
    return ValueReport(max(_finite_q(env, k, m, h)), "raw", m)


def optimal_action(env: Environment, k: int, m: int, h: History = History()) -> int:
    return argmax_low(_finite_q(env, k, m, h))


def _discounted_q(env: Environment, k: int, d: DiscountSequence, eps: float, h: History, root=None):
    _check_history(h, k)
    g_k = d.tail(k)
    if g_k <= 0:
        raise DomainError(f"Gamma_{k} = 0 for discount {d}")
    last = d.truncation_end(k, eps, env.r_max)
    root = env.state_of(h) if root is None else root
    q = expectimax_q(env, root, k, last, d.gamma)
    return [v / g_k for v in q], last, env.r_max * d.tail(last + 1) / g_k


def discounted_optimal_value(env: Environment, k: int, d: DiscountSequence, eps: float,
                             h: History = History()) -> ValueReport:
    q, last, bound = _discounted_q(env, k, d, eps, h)
    return ValueReport(max(q), "discounted", last, bound)


def discounted_optimal_action(env: Environment, k: int, d: DiscountSequence, eps: float,
                              h: History = History()) -> int:
    return argmax_low(_discounted_q(env, k, d, eps, h)[0])


def mdp_backward_induction(transitions: np.ndarray, rewards: np.ndarray, k: int, last: int,
                           weight: Callable[[int], float]) -> np.ndarray:
    """Q-values ``[i - k, s, a]`` for a known MDP over cycles ``k..last``.

    ``rewards[a, s, s']`` may be expected rewards.  Equivalent to
    :func:`expectimax_q` on the corresponding :class:`~bayesmix.models.MdpEnv`
    but vectorized over states.
    """
    n_actions, n_states, _ = transitions.shape
    q = np.zeros((last - k + 1, n_states, n_actions))
    v = np.zeros(n_states)
    for i in range(last, k - 1, -1):
        # q[s, a] = sum_s' T[a, s, s'] (w r[a, s, s'] + v[s'])
        qi = np.einsum("ast,ast->sa", transitions, weight(i) * rewards + v[None, None, :])
        q[i - k] = qi
        v = qi.max(axis=1)
    return q


# -- enumeration -------------------------------------------------------------


def percept_histories(n_percepts: int, m: int) -> list[tuple]:
    """All percept-index histories of length ``0..m-1``, shortest first, lexicographic within a length."""
    keys: list[tuple] = []
    for depth in range(m):
        keys.extend(itertools.product(range(n_percepts), repeat=depth))
    return keys


def count_policies(n_actions: int, n_percepts: int, m: int) -> int:
    return n_actions ** sum(n_percepts**j for j in range(m))


def enumerate_policies(n_actions: int, n_percepts: int, m: int, cap: int | None = None,
                       percepts=None) -> Iterator[PolicyTable]:
    """Every deterministic chronological policy of horizon ``m`` exactly once."""
    cap = policy_cap() if cap is None else cap
    count = count_policies(n_actions, n_percepts, m)
    if count > cap:
        raise BudgetError(f"{count} policies exceed the enumeration cap {cap}")
    keys = percept_histories(n_percepts, m)
    for n, choice in enumerate(itertools.product(range(n_actions), repeat=len(keys))):
        yield PolicyTable(n_actions, n_percepts, m, dict(zip(keys, choice)),
                          tuple(percepts) if percepts is not None else None, label=f"enum{n}")
