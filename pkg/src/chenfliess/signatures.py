"""Iterated integrals of piecewise-constant controls over the simplex.

The entry for a word w = (i1, ..., ik) is the integral of
u_{i1}(t1) * ... * u_{ik}(tk) over 0 <= t1 <= ... <= tk <= T, computed
exactly: with piecewise-constant u the running integrals
F_j(t) = int_0^t u_{ij}(s) F_{j-1}(s) ds are polynomials of degree <= j
on each piece, so coefficients are propagated in closed form across
breakpoints and the only error is floating-point rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .lie import check_word_cap, validate_word


@dataclass(frozen=True)
class ControlPath:
    """Piecewise-constant m-channel control on [0, T].

    breakpoints = (0, t1, ..., T) strictly increasing; values[p][i] is the
    value of channel i+1 on [t_p, t_{p+1}); M is the declared magnitude
    bound, checked at construction. The degenerate horizon T = 0 is the
    single breakpoint (0,) with no pieces.
    """

    m: int
    breakpoints: tuple
    values: tuple
    M: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need m >= 1")
        bp = self.breakpoints
        if len(bp) < 1 or bp[0] != 0.0:
            raise ValueError("breakpoints must start at 0 and contain the horizon")
        for a, b in zip(bp, bp[1:]):
            if not b > a:
                raise ValueError("breakpoints must be strictly increasing")
        if len(self.values) != len(bp) - 1:
            raise ValueError("need one value row per piece")
        for row in self.values:
            if len(row) != self.m:
                raise ValueError(f"each value row must have m={self.m} entries")
            for v in row:
                if abs(v) > self.M * (1 + 1e-12):
                    raise ValueError(f"|{v}| exceeds declared bound M={self.M}")

    @property
    def T(self):
        return self.breakpoints[-1]

    @property
    def pieces(self):
        return len(self.values)

    def value(self, channel, t):
        """Channel value at time t (right-continuous, last piece closed)."""
        bp = self.breakpoints
        if not self.values:
            raise ValueError("zero-horizon path has no pieces")
        if not 0.0 <= t <= bp[-1]:
            raise ValueError(f"t={t} outside [0, {bp[-1]}]")
        for p in range(len(bp) - 1):
            if t < bp[p + 1]:
                return self.values[p][channel - 1]
        return self.values[-1][channel - 1]

    def prepend_channel(self, const):
        """New path with an extra first channel held at ``const`` (used to
        carry an absorbed drift)."""
        values = tuple((float(const),) + tuple(row) for row in self.values)
        return ControlPath(self.m + 1, self.breakpoints, values,
                           max(self.M, abs(float(const))))

    def to_json_dict(self):
        return {
            "m": self.m,
            "breakpoints": [float(t) for t in self.breakpoints],
            "values": [[float(v) for v in row] for row in self.values],
            "M": float(self.M),
        }

    @staticmethod
    def from_json_dict(d):
        return ControlPath(
            m=int(d["m"]),
            breakpoints=tuple(float(t) for t in d["breakpoints"]),
            values=tuple(tuple(float(v) for v in row) for row in d["values"]),
            M=float(d["M"]),
        )


def constant_path(values, T, M=None):
    """One-piece path holding ``values`` on [0, T] (no pieces when T = 0)."""
    values = tuple(float(v) for v in values)
    if M is None:
        M = max((abs(v) for v in values), default=0.0)
    if T == 0:
        return ControlPath(len(values), (0.0,), (), float(M))
    return ControlPath(len(values), (0.0, float(T)), (values,), float(M))


def signature_norm_bound(M, T, k):
    """(MT)^k / k!, the simplex-volume bound on any order-k entry."""
    if M < 0 or T < 0 or k < 0:
        raise ValueError("need M, T, k >= 0")
    if k == 0:
        return 1.0
    x = M * T
    if x == 0.0:
        return 0.0
    if k <= 170:
        direct = x**k / math.factorial(k)
        if math.isfinite(direct):
            return direct
    # log space for large k or extreme MT
    return math.exp(k * math.log(x) - math.lgamma(k + 1))


# ---------------------------------------------------------------------------
# Exact propagation

# A "stream" is the running integral F_j represented per piece as local
# polynomial coefficients in s = t - t_p, plus the value at T.


def _horner(coeffs, s):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * s + c
    return acc


def _unit_stream(path):
    return [[1.0] for _ in range(path.pieces)]


def _extend_stream(path, stream, channel):
    """F_new(t) = int_0^t u_channel(s) F_prev(s) ds, piecewise closed form."""
    out = []
    start = 0.0
    bp = path.breakpoints
    for p, coeffs in enumerate(stream):
        v = path.values[p][channel - 1]
        new = [start] + [v * c / (j + 1) for j, c in enumerate(coeffs)]
        out.append(new)
        start = _horner(new, bp[p + 1] - bp[p])
    return out, start


def signature_entry(u, w):
    """Exact signature entry for one word."""
    w = validate_word(w, u.m)
    stream = _unit_stream(u)
    value = 1.0
    for i in w:
        stream, value = _extend_stream(u, stream, i)
    return value


@dataclass
class SignatureTable:
    """All entries for |w| <= K, with the simplex bound as a hard invariant."""

    m: int
    K: int
    M: float
    T: float
    entries: dict

    def __post_init__(self):
        if self.entries.get(()) != 1.0:
            raise AssertionError("empty-word entry must be exactly 1")
        for w, s in self.entries.items():
            bound = signature_norm_bound(self.M, self.T, len(w))
            # 1e-12 relative headroom: bound-saturating paths land within
            # an ulp of equality
            if abs(s) > bound * (1 + 1e-12) + 1e-300:
                raise AssertionError(
                    f"|S^{w}| = {abs(s)} violates the simplex bound {bound}"
                )

    def __getitem__(self, w):
        return self.entries[tuple(w)]

    def __contains__(self, w):
        return tuple(w) in self.entries

    def words(self):
        return sorted(self.entries, key=lambda w: (len(w), w))

    def flipped(self):
        """Table for the sign-flipped control: S^w(-u) = (-1)^|w| S^w(u)."""
        entries = {w: (s if len(w) % 2 == 0 else -s) for w, s in self.entries.items()}
        return SignatureTable(self.m, self.K, self.M, self.T, entries)

    def to_json_dict(self):
        return {
            "m": self.m,
            "K": self.K,
            "M": float(self.M),
            "T": float(self.T),
            "entries": [
                {"word": [int(i) for i in w], "value": float(self.entries[w])}
                for w in self.words()
            ],
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True)


def signature_up_to(u, K, word_cap=200_000):
    """All entries for |w| <= K via depth-first prefix sharing.

    Streams for a word prefix are computed once and reused by all its
    extensions, so the cost is one polynomial integration per node of the
    word tree.
    """
    if K < 0:
        raise ValueError("need K >= 0")
    check_word_cap(u.m, K, word_cap)
    entries = {(): 1.0}

    def visit(word, stream):
        if len(word) == K:
            return
        for i in range(1, u.m + 1):
            ext, value = _extend_stream(u, stream, i)
            entries[word + (i,)] = value
            visit(word + (i,), ext)

    visit((), _unit_stream(u))
    return SignatureTable(m=u.m, K=K, M=u.M, T=u.T, entries=entries)
