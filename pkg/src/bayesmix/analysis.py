"""Exhaustive and Monte Carlo checks of the mixture agent's optimality properties."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .env import History, Percept, RandomEnv, draw
from .errors import DomainError, UndefinedConditionalError
from .mixture import (
    WeightedClass,
    _advance,
    conditional_z_from_state,
    initial_posterior,
    z_from_state,
)
from .models import MdpSpec, as_env, check_ergodic
from .policies import run_episode
from .valuation import (
    Policy,
    PolicyTable,
    count_policies,
    enumerate_policies,
    node_cap,
    optimal_value,
    percept_histories,
    policy_cap,
    value_of_policy,
)

STRICT_TOL = 1e-9
MARTINGALE_TOL = 1e-12


def random_class(rng: np.random.Generator, n_envs: int, n_actions: int, n_percepts: int,
                 sparsity: float = 0.0) -> WeightedClass:
    """A class of lazily drawn random environments over a shared alphabet with random prior weights.

    Percept ``i`` has observation ``i`` and a reward drawn from ``{0, 0.5, 1}``.
    """
    percepts = tuple(Percept(i, float(rng.choice([0.0, 0.5, 1.0]))) for i in range(n_percepts))
    envs = tuple(RandomEnv(n_actions, percepts, int(rng.integers(2**31)), sparsity) for _ in range(n_envs))
    w = rng.dirichlet(np.ones(n_envs)) + 0.05
    return WeightedClass(envs, w / w.sum())


def random_policy_table(rng: np.random.Generator, n_actions: int, percepts, m: int) -> PolicyTable:
    keys = percept_histories(len(percepts), m)
    table = {key: int(rng.integers(n_actions)) for key in keys}
    return PolicyTable(n_actions, len(percepts), m, table, tuple(percepts), label="random")


def extract_policy_table(agent: Policy, m: int, percepts: Sequence, cap: int | None = None) -> PolicyTable:
    """Materialize a deterministic agent's choices on every percept history of length < ``m``.

    Histories that every class member rules out (the mixture conditional is
    undefined) get action 0; they cannot affect any value.
    """
    n_x = len(percepts)
    count = sum(n_x**j for j in range(m))
    if cap is not None and count > cap:
        from .errors import BudgetError

        raise BudgetError(f"{count} histories exceed the extraction cap {cap}")
    table: dict = {}
    for key in percept_histories(n_x, m):
        h = History()
        for j, xi in enumerate(key):
            h = h.extend(table[key[:j]], percepts[xi])
        try:
            table[key] = agent.action(h)
        except UndefinedConditionalError:
            table[key] = 0
    return PolicyTable(agent.n_actions, n_x, m, table, tuple(percepts), label="extracted")


def class_values(cls: WeightedClass, policy: Policy, m: int, caches: list | None = None) -> np.ndarray:
    """``V_nu^p`` over cycles ``1..m`` for every class member."""
    if caches is None:
        caches = [None] * len(cls)
    return np.array([value_of_policy(e, policy, 1, m, cache=c).value for e, c in zip(cls.envs, caches)])


@dataclass
class ParetoVerdict:
    subject: str
    dominated: bool
    subject_values: np.ndarray
    witness: PolicyTable | None = None
    witness_values: np.ndarray | None = None
    checked: int = 0


def pareto_check(cls: WeightedClass, subject: PolicyTable, m: int, cap: int | None = None) -> ParetoVerdict:
    """Search all deterministic policies for one that Pareto-dominates ``subject``."""
    caches = [{} for _ in cls.envs]
    sv = class_values(cls, subject, m, caches)
    n = 0
    for p in enumerate_policies(cls.n_actions, len(cls.percepts), m, cap, cls.percepts):
        n += 1
        pv = class_values(cls, p, m, caches)
        if np.all(pv >= sv - STRICT_TOL) and np.any(pv > sv + STRICT_TOL):
            return ParetoVerdict(subject.label, True, sv, p, pv, n)
    return ParetoVerdict(subject.label, False, sv, checked=n)


@dataclass
class BalanceReport:
    """Value differences ``subject - rival`` per environment and their weighted totals."""

    deltas: np.ndarray
    weights: np.ndarray
    total: float
    loss_set: tuple[int, ...]
    gain_set: tuple[int, ...]
    delta_loss: float
    delta_gain: float
    per_env_bound_ok: bool

    @property
    def balanced_ok(self) -> bool:
        return self.total >= -STRICT_TOL and self.delta_gain <= self.delta_loss + STRICT_TOL


def balance_from_values(weights: np.ndarray, subject_values: np.ndarray, rival_values: np.ndarray) -> BalanceReport:
    d = np.asarray(subject_values) - np.asarray(rival_values)
    w = np.asarray(weights)
    loss = tuple(int(i) for i in np.flatnonzero(d > 0))
    gain = tuple(int(i) for i in np.flatnonzero(d <= 0))
    d_loss = float(sum(w[i] * d[i] for i in loss))
    d_gain = abs(float(sum(w[i] * d[i] for i in gain)))
    max_loss = max((d[i] for i in loss), default=0.0)
    bound_ok = all(abs(d[i]) <= max_loss / w[i] + STRICT_TOL for i in gain)
    return BalanceReport(d, w, float(w @ d), loss, gain, d_loss, d_gain, bound_ok)


def balanced_delta(cls: WeightedClass, subject: PolicyTable, rival: PolicyTable, m: int) -> BalanceReport:
    return balance_from_values(cls.weights, class_values(cls, subject, m), class_values(cls, rival, m))


def pair_gain_bound_ok(report: BalanceReport, tol: float = STRICT_TOL) -> bool:
    """With one losing environment ``l``, each gain obeys ``|D_eta| <= (w_l / w_eta) |D_l|``."""
    if len(report.loss_set) != 1:
        return True
    (l,) = report.loss_set
    w, d = report.weights, report.deltas
    return all(abs(d[e]) <= w[l] / w[e] * abs(d[l]) + tol for e in report.gain_set)


@dataclass
class GapRow:
    m: int
    env: int
    optimal: float
    subject: float
    gap: float
    se: float = 0.0
    bound: float = math.nan


@dataclass
class GapTable:
    """Per-horizon, per-environment average-value gaps."""

    rows: list[GapRow] = field(default_factory=list)

    def gaps(self, env: int) -> list[tuple[int, float, float]]:
        return [(r.m, r.gap, r.se) for r in sorted(self.rows, key=lambda r: r.m) if r.env == env]

    def nonincreasing(self, env: int, n_se: float = 2.0) -> bool:
        g = self.gaps(env)
        return all(b[1] <= a[1] + n_se * math.hypot(a[2], b[2]) for a, b in zip(g, g[1:]))


def gap_bound_check(cls: WeightedClass, m: int, subject: PolicyTable | None = None,
                    cap: int | None = None) -> tuple[GapTable, float]:
    """Check ``0 <= V*_nu - V_nu^{p_xi} <= Delta / w_nu`` with the tightest enumerable rival.

    Returns the table (values averaged over ``m``) and the rival's ``Delta``.
    """
    from .policies import BayesAgent, Planning

    if subject is None:
        subject = extract_policy_table(BayesAgent(cls, Planning.finite(m)), m, cls.percepts)
    caches = [{} for _ in cls.envs]
    opt = np.array([optimal_value(e, 1, m).value for e in cls.envs])
    sv = class_values(cls, subject, m, caches)
    best = float(cls.weights @ (opt - sv))
    if count_policies(cls.n_actions, len(cls.percepts), m) <= (policy_cap() if cap is None else cap):
        for p in enumerate_policies(cls.n_actions, len(cls.percepts), m, cap, cls.percepts):
            best = min(best, float(cls.weights @ (opt - class_values(cls, p, m, caches))))
    table = GapTable()
    for i, w in enumerate(cls.weights):
        table.rows.append(GapRow(m, i, opt[i] / m, sv[i] / m, (opt[i] - sv[i]) / m, 0.0, best / w / m))
    return table, best


def gap_bound_ok(table: GapTable, tol: float = STRICT_TOL) -> bool:
    return all(-tol <= r.gap and r.gap <= r.bound + tol for r in table.rows)


def weighted_average(weights: Sequence[float], values: Sequence[Sequence[float]]) -> np.ndarray:
    """``delta(m) = sum_nu w_nu delta_nu(m)`` for per-environment sequences."""
    return np.asarray(weights) @ np.asarray(values)


def convergence_experiment(specs: Sequence[MdpSpec], m_grid: Sequence[int],
                           agent_builder: Callable[[int, int, int], Policy], replicates: int = 100,
                           seed: int = 0, threads: int = 1, exact: bool = True) -> GapTable:
    """Average-value gap ``(V*_{1m} - V^agent_{1m}) / m`` per horizon and true environment.

    ``agent_builder(m, env_index, replicate_seed)`` returns a fresh agent.  The
    agent value is exact when the agent is deterministic and its tree fits
    the node budget, otherwise a Monte Carlo mean over ``replicates``
    episodes with its standard error.  Replicate ``r`` for ``(m, env)`` uses
    the stream ``default_rng([seed, m, env, r])``.
    """
    for i, spec in enumerate(specs):
        if not check_ergodic(spec):
            raise DomainError(f"environment {i} is not ergodic")
    envs = [as_env(s) for s in specs]
    table = GapTable()
    for m in m_grid:
        for i, env in enumerate(envs):
            opt = optimal_value(env, 1, m).value / m
            probe = agent_builder(m, i, seed)
            tree = (env.n_actions * env.n_percepts) ** m
            if exact and probe.deterministic and tree <= node_cap():
                v = value_of_policy(env, probe, 1, m).value / m
                table.rows.append(GapRow(m, i, opt, v, opt - v, 0.0))
                continue

            def one(r, m=m, i=i, env=env):
                rng = np.random.default_rng([seed, m, i, r])
                agent = agent_builder(m, i, int(rng.integers(2**63)))
                return run_episode(env, agent, m, rng).total_reward / m

            with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
                vals = np.array(list(pool.map(one, range(replicates))))
            mean = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
            table.rows.append(GapRow(m, i, opt, mean, opt - mean, se))
    return table


@dataclass
class MartingaleStep:
    k: int
    z_prev: float
    cond_expect: float
    posterior: np.ndarray
    action: int

    @property
    def ok(self) -> bool:
        return self.cond_expect <= self.z_prev + MARTINGALE_TOL * max(1.0, self.z_prev)


@dataclass
class MartingaleTrace:
    steps: list[MartingaleStep]
    history: History
    final_posterior: np.ndarray

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.steps)


def martingale_trace(cls: WeightedClass, true_index: int, policy: Policy, n: int,
                     rng: np.random.Generator) -> MartingaleTrace:
    """Run ``policy`` in the true environment, recording ``z_{k-1}`` and the exact ``E[z_k | history]``."""
    mu = cls.envs[true_index]
    state = initial_posterior(cls)
    h = History()
    steps = []
    for k in range(1, n + 1):
        z_prev = z_from_state(cls, state, true_index)
        post = state.weights(cls)
        y = policy.act(h, rng)
        ez = conditional_z_from_state(cls, state, true_index, y)
        steps.append(MartingaleStep(k, z_prev, ez, post, y))
        xi = draw(mu.predict(state.states[true_index], y), rng)
        state = _advance(state, cls, y, xi)
        h = h.extend(y, mu.percepts[xi])
    return MartingaleTrace(steps, h, state.weights(cls))
