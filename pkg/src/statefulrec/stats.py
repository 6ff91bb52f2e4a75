"""Paired-sample tests: Student's t, Wilcoxon signed-rank, Cohen's d_z.

All tests are two-sided. The t distribution tail comes from a
continued-fraction evaluation of the regularized incomplete beta function;
the exact Wilcoxon null distribution is counted with integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DegenerateSampleError, InvalidInputError

EXACT_MAX_N = 25

_BETACF_EPS = 1e-16
_BETACF_TINY = 1e-300
_BETACF_MAX_ITER = 10_000


@dataclass(frozen=True, init=False)
class PairedSample:
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __init__(self, a: Sequence[float], b: Sequence[float]):
        a = tuple(float(x) for x in a)
        b = tuple(float(x) for x in b)
        if len(a) != len(b):
            raise InvalidInputError(f"paired samples differ in length ({len(a)} vs {len(b)})")
        if len(a) < 2:
            raise InvalidInputError("paired sample needs at least two pairs")
        if not all(math.isfinite(x) for x in a + b):
            raise InvalidInputError("paired sample contains non-finite values")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return len(self.a)

    def differences(self) -> list[float]:
        return [x - y for x, y in zip(self.a, self.b)]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n_effective: int

    __test__ = False  # keep pytest from collecting this as a test class

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value,
                "method": self.method, "n_effective": self.n_effective}


@dataclass(frozen=True)
class EffectSize:
    cohens_dz: float

    def as_dict(self) -> dict:
        return {"cohens_dz": self.cohens_dz}


def _betacf(x: float, p: float, q: float) -> float:
    # Modified Lentz evaluation of the continued fraction for I_x(p, q).
    qab = p + q
    qap = p + 1.0
    qam = p - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_TINY:
        d = _BETACF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (q - m) * x / ((qam + m2) * (p + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(p + m) * (qab + m) * x / ((p + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (x={x}, p={p}, q={q})")


def regularized_incomplete_beta(x: float, p: float, q: float) -> float:
    """I_x(p, q) for x in [0, 1] and p, q > 0."""
    for name, v in (("x", x), ("p", p), ("q", q)):
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise InvalidInputError(f"{name} must be a finite number, got {v!r}")
    if not 0.0 <= x <= 1.0:
        raise InvalidInputError(f"x={x} outside [0, 1]")
    if p <= 0 or q <= 0:
        raise InvalidInputError(f"shape parameters must be positive, got p={p}, q={q}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (math.lgamma(p + q) - math.lgamma(p) - math.lgamma(q)
                 + p * math.log(x) + q * math.log1p(-x))
    front = math.exp(log_front)
    # The fraction converges fast only left of the mean; use symmetry otherwise.
    if x < (p + 1.0) / (p + q + 2.0):
        value = front * _betacf(x, p, q) / p
    else:
        value = 1.0 - front * _betacf(1.0 - x, q, p) / q
    return min(1.0, max(0.0, value))


def _mean_sd(d: Sequence[float]) -> tuple[float, float]:
    n = len(d)
    if min(d) == max(d):
        return d[0], 0.0
    mean = math.fsum(d) / n
    var = math.fsum((x - mean) ** 2 for x in d) / (n - 1)
    return mean, math.sqrt(var)


def t_two_sided_p(t: float, df: float) -> float:
    return regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5)


def paired_t_test(s: PairedSample) -> TestResult:
    d = s.differences()
    mean, sd = _mean_sd(d)
    if sd == 0.0:
        if mean == 0.0:
            return TestResult(0.0, 1.0, "paired_t", s.n)
        raise DegenerateSampleError("paired differences are constant and nonzero; t is unbounded")
    t = mean * math.sqrt(s.n) / sd
    return TestResult(t, t_two_sided_p(t, s.n - 1), "paired_t", s.n)


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks, ties sharing the mean of the positions they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j + 2) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def signed_rank_counts(n: int) -> list[int]:
    """counts[w] = number of sign patterns of ranks 1..n whose positive rank sum is w."""
    counts = [1] + [0] * (n * (n + 1) // 2)
    top = 0
    for r in range(1, n + 1):
        top += r
        for w in range(top, r - 1, -1):
            counts[w] += counts[w - r]
    return counts


def wilcoxon_signed_rank(s: PairedSample) -> TestResult:
    d = [x for x in s.differences() if x != 0.0]
    n = len(d)
    if n < 1:
        raise DegenerateSampleError("all paired differences are zero; nothing to rank")
    abs_d = [abs(x) for x in d]
    ranks = average_ranks(abs_d)
    w_plus = math.fsum(r for r, x in zip(ranks, d) if x > 0)
    w_minus = math.fsum(r for r, x in zip(ranks, d) if x < 0)
    w = min(w_plus, w_minus)
    has_ties = len(set(abs_d)) < n

    if n <= EXACT_MAX_N and not has_ties:
        counts = signed_rank_counts(n)
        tail = sum(counts[: int(w) + 1])
        p = min(1.0, 2 * tail / 2**n)
        return TestResult(w, p, "wilcoxon_exact", n)

    mean = n * (n + 1) / 4.0
    tie_term = 0.0
    i = 0
    sorted_abs = sorted(abs_d)
    while i < n:
        j = i
        while j + 1 < n and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        t = j - i + 1
        tie_term += t**3 - t
        i = j + 1
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    z = max(abs(w - mean) - 0.5, 0.0) / math.sqrt(var)
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return TestResult(w, p, "wilcoxon_normal", n)


def cohens_dz(s: PairedSample) -> EffectSize:
    mean, sd = _mean_sd(s.differences())
    if sd == 0.0:
        raise DegenerateSampleError("paired differences have zero variance; d_z undefined")
    return EffectSize(mean / sd)
