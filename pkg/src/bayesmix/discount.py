"""Discount sequences with closed-form tail sums and effective horizons."""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import polygamma

from .errors import DomainError


@dataclass(frozen=True)
class DiscountSequence:
    """``gamma_k`` for ``k >= 1``.

    kinds: ``finite`` (``gamma_k = 1`` for ``k <= m``), ``geometric``
    (``gamma_k = g**k``), ``quadratic`` (``gamma_k = 1/k**2``).
    """

    kind: str
    param: float | None = None

    def __post_init__(self):
        if self.kind == "finite":
            if self.param is None or int(self.param) != self.param or self.param < 1:
                raise DomainError(f"finite discount needs an integer horizon >= 1, got {self.param}")
            object.__setattr__(self, "param", int(self.param))
        elif self.kind == "geometric":
            if self.param is None or not 0.0 < self.param < 1.0:
                raise DomainError(f"geometric discount needs 0 < g < 1, got {self.param}")
            object.__setattr__(self, "param", float(self.param))
        elif self.kind == "quadratic":
            object.__setattr__(self, "param", None)
        else:
            raise DomainError(f"unknown discount kind {self.kind!r}")

    @classmethod
    def finite(cls, m: int) -> "DiscountSequence":
        return cls("finite", m)

    @classmethod
    def geometric(cls, g: float) -> "DiscountSequence":
        return cls("geometric", g)

    @classmethod
    def quadratic(cls) -> "DiscountSequence":
        return cls("quadratic")

    @classmethod
    def parse(cls, text: str) -> "DiscountSequence":
        """Parse ``finite:m``, ``geometric:g`` or ``quadratic``."""
        kind, _, arg = text.strip().partition(":")
        try:
            if kind == "finite":
                return cls.finite(int(arg))
            if kind == "geometric":
                return cls.geometric(float(arg))
        except ValueError:
            raise DomainError(f"bad discount descriptor {text!r}") from None
        if kind == "quadratic" and not arg:
            return cls.quadratic()
        raise DomainError(f"bad discount descriptor {text!r}")

    def __str__(self) -> str:
        return self.kind if self.param is None else f"{self.kind}:{self.param}"

    def gamma(self, k: int) -> float:
        if k < 1:
            raise DomainError(f"cycle index must be >= 1, got {k}")
        if self.kind == "finite":
            return 1.0 if k <= self.param else 0.0
        if self.kind == "geometric":
            return self.param**k
        return 1.0 / (k * k)

    def tail(self, k: int) -> float:
        """``Gamma_k``, the sum of ``gamma_i`` over ``i >= k``."""
        if k < 1:
            raise DomainError(f"cycle index must be >= 1, got {k}")
        if self.kind == "finite":
            return float(max(0, self.param - k + 1))
        if self.kind == "geometric":
            return self.param**k / (1.0 - self.param)
        return float(polygamma(1, k))

    def truncation_end(self, k: int, eps: float, r_max: float = 1.0) -> int:
        """Smallest ``M >= k`` with ``r_max * Gamma_{M+1} / Gamma_k <= eps``."""
        if eps <= 0:
            raise DomainError(f"truncation tolerance must be positive, got {eps}")
        g_k = self.tail(k)
        if g_k <= 0:
            raise DomainError(f"Gamma_{k} = 0: nothing left to discount")

        def ok(m: int) -> bool:
            return r_max * self.tail(m + 1) / g_k <= eps

        lo, hi = k, k
        while not ok(hi):
            lo, hi = hi + 1, k + 2 * (hi - k + 1)
        while lo < hi:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid + 1
        return lo


def gamma_tail(d: DiscountSequence, k: int) -> float:
    return d.tail(k)


def effective_horizon(d: DiscountSequence, k: int, limit: int = 10**7) -> int:
    """Smallest ``h >= 0`` whose head mass ``gamma_k + ... + gamma_{k+h}`` reaches ``Gamma_{k+h+1}``."""
    if d.tail(k) <= 0:
        raise DomainError(f"Gamma_{k} = 0: effective horizon undefined")
    head = 0.0
    for h in range(limit):
        head += d.gamma(k + h)
        if head >= d.tail(k + h + 1):
            return h
    raise DomainError(f"effective horizon exceeds {limit}")


def exploration_length(k: int) -> int:
    """Exploration window ``ceil(sqrt(k))`` used by the discounted explore-then-exploit agent."""
    return math.isqrt(k - 1) + 1
