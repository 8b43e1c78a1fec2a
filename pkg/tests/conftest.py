import numpy as np
import pytest

from bayesmix import BanditSpec, MdpSpec, WeightedClass, as_env
from bayesmix.env import FunctionEnv, Percept

COIN = (Percept(0, 0.0), Percept(0, 1.0))

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def bandit_class(*arm_sets, weights=None) -> WeightedClass:
    envs = [as_env(BanditSpec(arms), COIN) for arms in arm_sets]
    if weights is None:
        return WeightedClass.uniform(envs)
    return WeightedClass(tuple(envs), np.array(weights))


def always_one(n_actions=2) -> FunctionEnv:
    return FunctionEnv(n_actions, COIN, lambda h, y: (0.0, 1.0))


def cycle_mdp() -> MdpSpec:
    """Two states that swap under every action; entering state 1 pays 1."""
    t = np.array([[[0.0, 1.0], [1.0, 0.0]]] * 2)
    r = np.array([[[0.0, 1.0], [0.0, 1.0]]] * 2)
    return MdpSpec(t, r)


def drift_mdp() -> MdpSpec:
    """Action 1 drifts to the paying state 1, action 0 back to state 0; both w.p. 0.9."""
    t = np.array([[[0.9, 0.1], [0.9, 0.1]], [[0.1, 0.9], [0.1, 0.9]]])
    r = np.array([[[0.0, 1.0], [0.0, 1.0]]] * 2)
    return MdpSpec(t, r)


@pytest.fixture
def mirror_bandits():
    return bandit_class((0.9, 0.1), (0.1, 0.9))


@pytest.fixture
def deterministic_bandits():
    return bandit_class((1.0, 0.0), (0.0, 1.0))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        for name, ok, detail in ACCEPTANCE[n]:
            terminalreporter.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
