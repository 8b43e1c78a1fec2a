import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesmix import DiscountSequence, effective_horizon, exploration_length, gamma_tail
from bayesmix.errors import DomainError


def quadratic_tail_oracle(k: int, n: int = 20000) -> float:
    """Direct sum to ``n`` plus the Euler-Maclaurin remainder of ``1/x^2``."""
    head = math.fsum(1.0 / (i * i) for i in range(k, n))
    return head + 1.0 / n + 1.0 / (2 * n * n) + 1.0 / (6 * n**3)


def test_tail_hand_values():
    assert gamma_tail(DiscountSequence.geometric(0.5), 1) == 1.0
    assert gamma_tail(DiscountSequence.finite(5), 3) == 3.0
    assert gamma_tail(DiscountSequence.finite(5), 7) == 0.0
    assert gamma_tail(DiscountSequence.quadratic(), 1) == pytest.approx(math.pi**2 / 6, abs=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3, 10, 57, 100, 1000])
def test_quadratic_tail_against_summation(k):
    assert gamma_tail(DiscountSequence.quadratic(), k) == pytest.approx(quadratic_tail_oracle(k), rel=1e-12)


def test_geometric_tail_against_summation():
    d = DiscountSequence.geometric(0.9)
    for k in (1, 4, 20):
        assert d.tail(k) == pytest.approx(math.fsum(0.9**i for i in range(k, 2000)), rel=1e-12)


def test_effective_horizon_values():
    assert effective_horizon(DiscountSequence.geometric(0.5), 1) == 0
    # half-mass rule: smallest h with 0.9**(h+1) <= 1/2
    assert effective_horizon(DiscountSequence.geometric(0.9), 1) == 6
    assert effective_horizon(DiscountSequence.finite(10), 1) == 4
    assert abs(effective_horizon(DiscountSequence.quadratic(), 10) - 9) <= 1


def test_quadratic_horizon_grows_linearly():
    d = DiscountSequence.quadratic()
    ratios = [effective_horizon(d, k) / k for k in (10, 100, 1000, 10000)]
    assert all(abs(r - 1) <= 0.1 for r in ratios)
    assert abs(ratios[-1] - 1) <= abs(ratios[0] - 1)


@settings(max_examples=60, deadline=None)
@given(g=st.floats(0.05, 0.98), k=st.integers(1, 40))
def test_geometric_horizon_is_constant_in_k(g, k):
    d = DiscountSequence.geometric(g)
    assert effective_horizon(d, k) == effective_horizon(d, 1)


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(["finite:12", "geometric:0.8", "quadratic"]), k=st.integers(1, 12))
def test_effective_horizon_is_the_smallest_half_mass_point(kind, k):
    d = DiscountSequence.parse(kind)
    h = effective_horizon(d, k)
    head = math.fsum(d.gamma(i) for i in range(k, k + h + 1))
    assert head >= d.tail(k + h + 1)
    if h > 0:
        assert head - d.gamma(k + h) < d.tail(k + h)


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(["finite:9", "geometric:0.7", "quadratic"]), k=st.integers(1, 9),
       eps=st.floats(1e-4, 0.9), r_max=st.floats(0.5, 2.0))
def test_truncation_end_is_minimal(kind, k, eps, r_max):
    d = DiscountSequence.parse(kind)
    m = d.truncation_end(k, eps, r_max)
    assert m >= k
    assert r_max * d.tail(m + 1) / d.tail(k) <= eps
    if m > k:
        assert r_max * d.tail(m) / d.tail(k) > eps


def test_descriptor_parsing():
    assert str(DiscountSequence.parse("finite:4")) == "finite:4"
    assert str(DiscountSequence.parse("geometric:0.5")) == "geometric:0.5"
    assert str(DiscountSequence.parse("quadratic")) == "quadratic"
    for bad in ("geometric:1.5", "finite:0", "finite:x", "cubic", "quadratic:2"):
        with pytest.raises(DomainError):
            DiscountSequence.parse(bad)
    with pytest.raises(DomainError):
        DiscountSequence.finite(3).truncation_end(4, 0.1)
    with pytest.raises(DomainError):
        DiscountSequence.quadratic().truncation_end(1, 0.0)


def test_exploration_length():
    assert [exploration_length(k) for k in (1, 2, 4, 5, 9, 10, 100)] == [1, 2, 2, 3, 3, 4, 10]
    assert all(exploration_length(k) == math.ceil(math.sqrt(k)) for k in range(1, 2000))


def test_quadratic_window_mass():
    d = DiscountSequence.quadratic()
    ratio = d.tail(100 + exploration_length(100)) / d.tail(100)
    assert ratio == pytest.approx(0.909, abs=1e-3)
    assert 1 - ratio == pytest.approx(0.091, abs=1e-3)
