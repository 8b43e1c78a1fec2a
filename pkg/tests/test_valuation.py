import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesmix import (
    BanditSpec,
    DiscountSequence,
    History,
    MdpSpec,
    MixtureEnv,
    Percept,
    RandomEnv,
    as_env,
    discounted_optimal_action,
    discounted_optimal_value,
    discounted_value_of_policy,
    enumerate_policies,
    optimal_action,
    optimal_value,
    random_mdp,
    value_of_policy,
)
from bayesmix.analysis import random_class, random_policy_table
from bayesmix.errors import BudgetError, DomainError, IncompletePolicyError
from bayesmix.policies import RandomAgent
from bayesmix.valuation import (
    PolicyTable,
    argmax_low,
    count_policies,
    expectimax_q,
    mdp_backward_induction,
    percept_histories,
)

from conftest import COIN, always_one, bandit_class

WIN = Percept(0, 1.0)


def constant_table(action, n_percepts, m, percepts=None):
    return PolicyTable(2, n_percepts, m, {k: action for k in percept_histories(n_percepts, m)}, percepts)


def plain_expectimax(env, h, k, m):
    """Unmerged recursive expectimax over histories."""
    if k > m:
        return 0.0
    best = -1.0
    for y in range(env.n_actions):
        q = 0.0
        for x in env.percepts:
            p = env.prob(h, y, x)
            if p > 0:
                q += p * (x.reward + plain_expectimax(env, h.extend(y, x), k + 1, m))
        best = max(best, q)
    return best


def test_value_examples():
    env = always_one()
    table = constant_table(1, 2, 3, COIN)
    assert value_of_policy(env, table, 1, 3).value == 3.0
    arm = as_env(BanditSpec((0.7, 0.7)), COIN)
    assert value_of_policy(arm, constant_table(0, 2, 2, COIN), 1, 2).value == pytest.approx(1.4, abs=1e-15)
    sure = as_env(BanditSpec((1.0, 0.0)), COIN)
    assert value_of_policy(sure, constant_table(0, 2, 2), 1, 2).value == 2.0
    assert value_of_policy(sure, constant_table(1, 2, 2), 1, 2).value == 0.0


def test_optimal_examples():
    sure = as_env(BanditSpec((1.0, 0.0)), COIN)
    assert optimal_value(sure, 1, 3).value == 3.0
    arms = as_env(BanditSpec((0.3, 0.8)), COIN)
    assert optimal_value(arms, 1, 1).value == 0.8
    assert optimal_action(arms, 1, 1) == 1
    assert optimal_action(as_env(BanditSpec((0.5, 0.5)), COIN), 1, 3) == 0
    mix = MixtureEnv(bandit_class((1.0, 0.0), (0.0, 1.0), weights=[0.8, 0.2]))
    assert optimal_action(mix, 1, 1) == 0
    assert optimal_value(sure, 4, 3, History([(0, WIN)] * 3)).value == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_optimal_equals_best_enumerated_policy(seed):
    env = RandomEnv(2, [Percept(0, 0.0), Percept(1, 1.0)], seed)
    best = max(value_of_policy(env, p, 1, 2).value for p in enumerate_policies(2, 2, 2, percepts=env.percepts))
    assert optimal_value(env, 1, 2).value == pytest.approx(best, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), m=st.integers(1, 3), sparsity=st.sampled_from([0.0, 0.5]))
def test_merged_expectimax_matches_plain_tree(seed, m, sparsity):
    cls = random_class(np.random.default_rng(seed), 2, 2, 2, sparsity)
    mix = MixtureEnv(cls)
    for env in (cls.envs[0], mix):
        assert optimal_value(env, 1, m).value == pytest.approx(plain_expectimax(env, History(), 1, m), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_mdp_state_merging_matches_history_tree(seed):
    spec = random_mdp(np.random.default_rng(seed), 2, 2, reward_levels=(0.0, 0.5, 1.0))
    env = as_env(spec)
    assert optimal_value(env, 1, 4).value == pytest.approx(plain_expectimax(env, History(), 1, 4), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), m=st.integers(1, 4))
def test_horizon_monotone_and_policy_dominance(seed, m):
    cls = random_class(np.random.default_rng(seed), 1, 2, 2)
    env = cls.envs[0]
    assert optimal_value(env, 1, m + 1).value >= optimal_value(env, 1, m).value
    p = random_policy_table(np.random.default_rng(seed + 1), 2, env.percepts, m)
    assert value_of_policy(env, p, 1, m).value <= optimal_value(env, 1, m).value + 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), m=st.integers(1, 3))
def test_linearity_and_convexity(seed, m):
    rng = np.random.default_rng(seed)
    cls = random_class(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 4)))
    mix = MixtureEnv(cls)
    p = random_policy_table(rng, cls.n_actions, cls.percepts, m)
    mixed = value_of_policy(mix, p, 1, m).value
    assert abs(mixed - sum(w * value_of_policy(e, p, 1, m).value for w, e in zip(cls.weights, cls.envs))) <= 1e-9
    star = sum(w * optimal_value(e, 1, m).value for w, e in zip(cls.weights, cls.envs))
    assert optimal_value(mix, 1, m).value <= star + 1e-9


def test_discounted_examples():
    env = always_one()
    rnd = RandomAgent(2)
    for d in ("finite:4", "geometric:0.5", "quadratic"):
        r = discounted_value_of_policy(env, rnd, 1, DiscountSequence.parse(d), 0.05)
        assert abs(r.value - 1.0) <= 0.05 + 1e-12
        assert r.normalization == "discounted"
    assert discounted_value_of_policy(env, rnd, 1, DiscountSequence.finite(4), 0.01).value == 1.0

    def first_only(h, y):
        return (0.0, 1.0) if len(h) == 0 else (1.0, 0.0)

    from bayesmix.env import FunctionEnv

    once = FunctionEnv(1, COIN, first_only)
    v = discounted_value_of_policy(once, RandomAgent(1), 1, DiscountSequence.geometric(0.5), 1e-3)
    assert v.value == pytest.approx(0.5, abs=1e-15)


def test_discounted_optimal_action_examples():
    one_state = MdpSpec(np.ones((2, 1, 1)), np.array([[[1.0]], [[0.0]]]))
    env = as_env(one_state)
    for d in ("finite:3", "geometric:0.7", "quadratic"):
        assert discounted_optimal_action(env, 1, DiscountSequence.parse(d), 0.1) == 0
    same = as_env(BanditSpec((0.4, 0.4)), COIN)
    assert discounted_optimal_action(same, 1, DiscountSequence.geometric(0.7), 0.1) == 0


@pytest.mark.parametrize("seed", range(8))
def test_finite_discount_agrees_with_finite_horizon(seed):
    env = RandomEnv(2, [Percept(0, 0.0), Percept(1, 0.5), Percept(2, 1.0)], seed)
    m = 1 + seed % 3
    d = DiscountSequence.finite(m)
    h = History()
    for k in range(1, m + 1):
        assert discounted_optimal_action(env, k, d, 1e-9, h) == optimal_action(env, k, m, h)
        h = h.extend(optimal_action(env, k, m, h), env.percepts[seed % 3])
    assert discounted_optimal_value(env, 1, d, 1e-9).value == optimal_value(env, 1, m).value / m


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), kind=st.sampled_from(["geometric:0.6", "quadratic"]),
       eps=st.floats(0.05, 0.6))
def test_truncation_contract(seed, kind, eps):
    env = as_env(random_mdp(np.random.default_rng(seed), 2, 2, reward_levels=(0.0, 0.5, 1.0)))
    d = DiscountSequence.parse(kind)
    coarse = discounted_optimal_value(env, 1, d, eps)
    fine = discounted_optimal_value(env, 1, d, eps / 8)
    assert coarse.depth <= fine.depth
    assert 0.0 <= fine.value - coarse.value <= coarse.error_bound + 1e-12
    assert coarse.error_bound == pytest.approx(env.r_max * d.tail(coarse.depth + 1) / d.tail(1))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), k=st.integers(1, 3))
def test_backward_induction_matches_expectimax(seed, k):
    spec = random_mdp(np.random.default_rng(seed), 3, 2, reward_levels=(0.0, 0.5, 1.0))
    env = as_env(spec)
    d = DiscountSequence.quadratic()
    q = mdp_backward_induction(spec.transitions, spec.rewards, k, k + 4, d.gamma)
    for s in range(3):
        ref = expectimax_q(env, s, k, k + 4, d.gamma)
        assert np.allclose(q[0, s], ref, rtol=0, atol=1e-12)


def test_enumeration_counts():
    assert sum(1 for _ in enumerate_policies(2, 2, 2)) == 8
    assert sum(1 for _ in enumerate_policies(2, 2, 3)) == 128
    assert sum(1 for _ in enumerate_policies(1, 3, 3)) == 1
    assert count_policies(3, 3, 3) == 3**13
    with pytest.raises(BudgetError):
        next(enumerate_policies(3, 3, 3))
    with pytest.raises(BudgetError):
        next(enumerate_policies(2, 2, 3, cap=100))


def test_enumeration_is_exhaustive_and_distinct():
    tables = [tuple(sorted(p.table.items())) for p in enumerate_policies(2, 2, 3)]
    assert len(set(tables)) == 128
    keys = percept_histories(2, 3)
    assert keys[:3] == [(), (0,), (1,)]
    assert set(itertools.chain.from_iterable(t for t in [dict(tables[0]).keys()])) == set(keys)


def test_budget_env_var(monkeypatch):
    monkeypatch.setenv("BAYESMIX_MAX_NODES", "10")
    env = RandomEnv(2, COIN, 0)
    with pytest.raises(BudgetError):
        optimal_value(env, 1, 4)


def test_incomplete_table_and_bad_history():
    p = PolicyTable(2, 2, 2, {(): 0}, COIN)
    with pytest.raises(IncompletePolicyError):
        value_of_policy(always_one(), p, 1, 2)
    with pytest.raises(DomainError):
        value_of_policy(always_one(), p, 2, 2)


def test_argmax_low_ties():
    assert argmax_low([1.0, 1.0]) == 0
    assert argmax_low([1.0, 1.0 + 1e-14]) == 0
    assert argmax_low([1.0, 1.0 + 1e-6]) == 1
