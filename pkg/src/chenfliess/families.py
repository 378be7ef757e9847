"""Closed-form per-order bounds on the feature magnitudes and their tails.

Each family bounds L_k = sup |L_w c^T x| over the domain and all words of
length k for one structural class of systems, and can sum its own series
tail sum_{k>K} (mMT)^k/k! * L_k either in closed form or by dominated
summation. A divergent tail is reported as math.inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_REL_TOL = 1e-15
_MAX_TERMS = 100_000


def gamma_k(k):
    """(k!/2) * C(2k, k); exact integer for k <= 20, float via log-gamma above.

    Defined for k >= 1 only; the order-0 feature magnitude is bounded by
    the domain radius separately.
    """
    if k < 1:
        raise ValueError("gamma_k is defined for k >= 1")
    if k <= 20:
        return math.factorial(k) * math.comb(2 * k, k) // 2
    return math.exp(math.lgamma(2 * k + 1) - math.lgamma(k + 1) - math.log(2.0))


def central_binomial_gf(x):
    """1/sqrt(1-4x) = sum_k C(2k,k) x^k, valid for |x| < 1/4."""
    if abs(x) >= 0.25:
        raise ValueError(f"|x| = {abs(x)} is outside the radius of convergence 1/4")
    return 1.0 / math.sqrt(1.0 - 4.0 * x)


def exp_remainder(x, K):
    """sum_{k>K} x^k / k! by dominated summation (relative 1e-15)."""
    if x < 0:
        raise ValueError("need x >= 0")
    if x == 0.0:
        return 0.0
    # first term in log space to dodge overflow for large x or K
    log_t = (K + 1) * math.log(x) - math.lgamma(K + 2)
    term = math.exp(log_t)
    total = 0.0
    k = K + 1
    for _ in range(_MAX_TERMS):
        total += term
        k += 1
        term *= x / k
        if term <= total * _REL_TOL and x < k:
            break
    return total


@dataclass(frozen=True)
class BilinearFamily:
    """L_k <= r a^k (a = max spectral norm of the channel matrices)."""

    r: float
    a: float
    kind = "bilinear"

    def lambda_bound(self, k):
        return self.r * self.a**k

    def term(self, k, m, M, T):
        if k == 0:
            return self.r
        x = m * M * T * self.a
        if x == 0.0:
            return 0.0
        return self.r * math.exp(k * math.log(x) - math.lgamma(k + 1))

    def convergent(self, m, M, T):
        return True

    def tail(self, m, M, T, K):
        return self.r * exp_remainder(m * M * T * self.a, K)


@dataclass(frozen=True)
class AnalyticFamily:
    """L_k <= (1 + 2 sqrt(n)) r k! (2^n n a_r / r)^k for analytic fields,
    a_r the componentwise maximum modulus over the polydiscs of radius 2r."""

    r: float
    n: int
    a_r: float
    kind = "analytic"

    def _prefactor(self):
        return (1.0 + 2.0 * math.sqrt(self.n)) * self.r

    def _ratio(self, m, M, T):
        return 2.0**self.n * self.n * m * M * T * self.a_r / self.r

    def lambda_bound(self, k):
        if k == 0:
            return self._prefactor()
        rho = 2.0**self.n * self.n * self.a_r / self.r
        if rho == 0.0:
            return 0.0
        return self._prefactor() * math.exp(math.lgamma(k + 1) + k * math.log(rho))

    def term(self, k, m, M, T):
        return self._prefactor() * self._ratio(m, M, T) ** k

    def convergent(self, m, M, T):
        return self._ratio(m, M, T) < 1.0

    def tail(self, m, M, T, K):
        q = self._ratio(m, M, T)
        if q >= 1.0:
            return math.inf
        return self._prefactor() * q ** (K + 1) / (1.0 - q)


@dataclass(frozen=True)
class HopfieldFamily:
    """L_0 <= r and L_k <= gamma(k) b^k a^(k-1) for saturating nets whose
    nonlinearity satisfies sup |f^(k)| <= b a^k k!. Channel count is n^2."""

    r: float
    n: int
    a: float
    b: float
    kind = "hopfield"

    def lambda_bound(self, k):
        if k == 0:
            return self.r
        return gamma_k(k) * self.b**k * self.a ** (k - 1)

    def term(self, k, m, M, T):
        if k == 0:
            return self.r
        x = m * M * T * self.b * self.a
        if x == 0.0:
            return 0.0
        if k <= 300:
            return 0.5 / self.a * math.comb(2 * k, k) * x**k
        log_term = math.lgamma(2 * k + 1) - 2 * math.lgamma(k + 1) + k * math.log(x)
        return 0.5 / self.a * math.exp(log_term)

    def convergent(self, m, M, T):
        return 4.0 * m * M * T * self.b * self.a < 1.0

    def tail(self, m, M, T, K):
        x = m * M * T * self.b * self.a
        if 4.0 * x >= 1.0:
            return math.inf
        if x == 0.0:
            return 0.0
        k = K + 1 if K >= 1 else 1
        term = math.comb(2 * k, k) * x**k
        total = 0.0
        for _ in range(_MAX_TERMS):
            total += term
            term *= 2.0 * (2 * k + 1) / (k + 1) * x
            k += 1
            if term <= total * _REL_TOL:
                break
        return 0.5 / self.a * total


@dataclass(frozen=True)
class GeometricFamily:
    """User-supplied template L_k <= C rho^k k!^s with s in {0, 1}."""

    C: float
    rho: float
    s: int = 0
    kind = "geometric"

    def __post_init__(self):
        if self.s not in (0, 1):
            raise ValueError("s must be 0 or 1")

    def lambda_bound(self, k):
        base = self.C * self.rho**k
        if self.s == 0:
            return base
        if k <= 170:
            return base * math.factorial(k)
        return base * math.exp(math.lgamma(k + 1))

    def term(self, k, m, M, T):
        x = m * M * T * self.rho
        if self.s == 1:
            return self.C * x**k
        if k == 0:
            return self.C
        return self.C * math.exp(k * math.log(x) - math.lgamma(k + 1)) if x > 0 else 0.0

    def convergent(self, m, M, T):
        return True if self.s == 0 else m * M * T * self.rho < 1.0

    def tail(self, m, M, T, K):
        x = m * M * T * self.rho
        if self.s == 0:
            return self.C * exp_remainder(x, K)
        if x >= 1.0:
            return math.inf
        return self.C * x ** (K + 1) / (1.0 - x)


FAMILY_KINDS = {
    "bilinear": BilinearFamily,
    "analytic": AnalyticFamily,
    "hopfield": HopfieldFamily,
    "geometric": GeometricFamily,
}


def family_from_json_dict(d):
    kind = d.get("kind")
    if kind not in FAMILY_KINDS:
        raise ValueError(f"unknown bound family kind {kind!r}")
    args = {k: v for k, v in d.items() if k != "kind"}
    return FAMILY_KINDS[kind](**args)


def family_to_json_dict(family):
    out = {"kind": family.kind}
    for name in family.__dataclass_fields__:
        out[name] = getattr(family, name)
    return out
