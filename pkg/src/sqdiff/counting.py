"""Square-difference counts on packed bitsets and the functional Lambda_q.

A set ``A`` in ``[1, N]`` is held as a Python integer whose bit ``n`` is set
when ``n`` is in ``A``.  Then ``|A & (A + s)|`` is one shift, one AND and a
popcount.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fourier import IntegerFunction, dft_grid
from .weyl import WeylParams, weyl_sum_grid

__all__ = [
    "IndicatorSet",
    "LambdaResult",
    "ProgressionLimits",
    "intersect_count",
    "average_count",
    "lambda_direct",
    "lambda_fourier",
    "lambda_fourier_grid",
    "varnavides_sum",
    "good_progressions",
    "overcount_bound_check",
    "PER_T_DEFAULT_LIMIT",
]

PER_T_DEFAULT_LIMIT = 10**6


@dataclass(frozen=True)
class IndicatorSet:
    """Subset of ``[1, n_ambient]`` packed into the bits of an int (bit n <=> n in A)."""

    n_ambient: int
    bits: int = 0

    def __post_init__(self):
        if self.n_ambient < 1:
            raise ValueError("n_ambient must be positive")
        if self.bits < 0 or self.bits & 1 or self.bits >> (self.n_ambient + 1):
            raise ValueError(f"members must lie in [1, {self.n_ambient}]")

    @classmethod
    def from_members(cls, n: int, members) -> "IndicatorSet":
        mask = np.zeros(n, dtype=bool)
        m = np.asarray(list(members) if not isinstance(members, np.ndarray) else members, dtype=np.int64)
        if m.size and (m.min() < 1 or m.max() > n):
            raise ValueError(f"members must lie in [1, {n}]")
        mask[m - 1] = True
        return cls.from_mask(mask)

    @classmethod
    def from_mask(cls, mask) -> "IndicatorSet":
        """``mask[i]`` says whether ``i + 1`` is a member."""
        mask = np.asarray(mask, dtype=bool)
        raw = np.packbits(mask, bitorder="little").tobytes()
        return cls(int(mask.size), int.from_bytes(raw, "little") << 1)

    @classmethod
    def full(cls, n: int) -> "IndicatorSet":
        return cls(n, ((1 << n) - 1) << 1)

    @classmethod
    def empty(cls, n: int) -> "IndicatorSet":
        return cls(n, 0)

    def to_mask(self) -> np.ndarray:
        nbytes = (self.n_ambient + 8) // 8
        raw = np.frombuffer((self.bits >> 1).to_bytes(nbytes, "little"), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[: self.n_ambient].astype(bool)

    def members(self) -> np.ndarray:
        return np.flatnonzero(self.to_mask()) + 1

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __contains__(self, n: int) -> bool:
        return 1 <= n <= self.n_ambient and bool(self.bits >> n & 1)

    @property
    def size(self) -> int:
        return len(self)

    @property
    def density(self) -> float:
        return len(self) / self.n_ambient

    def reversed(self) -> "IndicatorSet":
        """The image under ``n -> N + 1 - n``."""
        return IndicatorSet.from_mask(self.to_mask()[::-1])

    def indicator(self) -> IntegerFunction:
        """``1_A`` as an IntegerFunction supported on ``[1, N]``."""
        return IntegerFunction(1, self.to_mask().astype(float))


def intersect_count(a: IndicatorSet, t: int) -> int:
    """``#{n : n in A and n - t^2 in A}``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    s = t * t
    if s >= a.n_ambient:
        return 0
    return (a.bits & (a.bits << s)).bit_count()


def _check_window(n: int, lam: int, mu: int) -> None:
    if not (1 <= mu):
        raise ValueError(f"1 <= mu violated: mu = {mu}")
    if mu > lam:
        raise ValueError(f"mu <= lambda violated: mu = {mu} > lambda = {lam}")
    if 4 * lam * lam > n:
        raise ValueError(f"lambda^2 <= N/4 violated: {lam}^2 > {n}/4")


def average_count(a: IndicatorSet, lam: int, mu: int) -> float:
    """``(1/mu) sum_{t = lam+1}^{lam+mu} |A & (A + t^2)|``."""
    _check_window(a.n_ambient, lam, mu)
    return sum(intersect_count(a, t) for t in range(lam + 1, lam + mu + 1)) / mu


@dataclass(frozen=True)
class LambdaResult:
    value: float
    t_count: int
    per_t: dict | None = field(default=None)
    empty: bool = False

    def check_per_t(self, q: int, mu: int) -> float:
        """``|value - (q/mu) sum per_t|``."""
        if self.per_t is None:
            raise ValueError("per_t not retained")
        return abs(self.value - q * math.fsum(self.per_t[t] for t in sorted(self.per_t)) / mu)


def _as_function(x) -> IntegerFunction:
    return x.indicator() if isinstance(x, IndicatorSet) else x


def _pair_sum(g: IntegerFunction, h: IntegerFunction, s: int) -> float:
    """``sum_n g(n) h(n - s)``."""
    lo = max(g.start, h.start + s)
    hi = min(g.stop, h.stop + s)
    if hi <= lo:
        return 0.0
    gv = g.values[lo - g.start: hi - g.start]
    hv = h.values[lo - s - h.start: hi - s - h.start]
    return math.fsum(gv * hv)


def lambda_direct(g, h, params: WeylParams, retain_per_t: bool | None = None) -> LambdaResult:
    """``(q/mu) sum_{t in (lam, lam+mu], q | t} sum_n g(n) h(n - t^2)`` by direct summation.

    Two IndicatorSets are counted on the bitset kernel; anything else is
    treated as an IntegerFunction and summed with ``fsum``.
    """
    ts = params.admissible_t().tolist()
    bitset = isinstance(g, IndicatorSet) and isinstance(h, IndicatorSet)
    if retain_per_t is None:
        size = g.n_ambient if isinstance(g, IndicatorSet) else len(g)
        retain_per_t = size < PER_T_DEFAULT_LIMIT
    if not ts:
        return LambdaResult(0.0, 0, {} if retain_per_t else None, empty=True)
    if bitset:
        if g is h or g.bits == h.bits:
            per = {t: intersect_count(g, t) for t in ts}
        else:
            per = {t: (g.bits & (h.bits << t * t)).bit_count() if t * t < g.n_ambient else 0 for t in ts}
    else:
        gf, hf = _as_function(g), _as_function(h)
        per = {t: _pair_sum(gf, hf, t * t) for t in ts}
    value = params.q * math.fsum(per[t] for t in ts) / params.mu
    return LambdaResult(value, len(ts), per if retain_per_t else None)


def _bandwidth(g: IntegerFunction, h: IntegerFunction, params: WeylParams) -> int:
    ts = params.admissible_t()
    if ts.size == 0:
        return 1
    lo = g.start - (h.stop - 1) - int(ts[-1]) ** 2
    hi = (g.stop - 1) - h.start - int(ts[0]) ** 2
    return hi - lo + 1


def lambda_fourier_grid(g, h, params: WeylParams) -> int:
    """Power of two at or above ``2 (N + (lam + mu)^2) + 1`` with N the joint support extent."""
    gf, hf = _as_function(g), _as_function(h)
    n = max(gf.stop, hf.stop) - min(gf.start, hf.start, 1) + 1 if len(gf) and len(hf) else 1
    need = max(2 * (n + (params.lam + params.mu) ** 2) + 1, len(gf), len(hf))
    return 1 << (need - 1).bit_length()


def lambda_fourier(g, h, params: WeylParams, grid: int | None = None) -> float:
    """``int ghat(alpha) conj(hhat(alpha)) S_{lam,mu,q}(alpha) d alpha`` as an exact grid average.

    The integrand is a trigonometric polynomial, so averaging over M equally
    spaced points is exact once M exceeds its frequency span.
    """
    gf, hf = _as_function(g), _as_function(h)
    if len(gf) == 0 or len(hf) == 0:
        return 0.0
    M = lambda_fourier_grid(gf, hf, params) if grid is None else int(grid)
    if M < _bandwidth(gf, hf, params) or M < max(len(gf), len(hf)):
        raise ValueError(f"aliasing: grid must exceed bandwidth ({M} < {_bandwidth(gf, hf, params)})")
    G = dft_grid(gf, M)
    H = dft_grid(hf, M)
    S = weyl_sum_grid(params.lam, params.mu, M, params.q)
    return float(np.mean(G * np.conj(H) * S).real)


def varnavides_sum(a: IndicatorSet) -> int:
    """``sum_{t=1}^{floor(sqrt N)} |A & (A + t^2)|``."""
    return sum(intersect_count(a, t) for t in range(1, math.isqrt(a.n_ambient) + 1))


@dataclass(frozen=True)
class ProgressionLimits:
    """Ranges ``t^2 <= delta N / M^2`` and ``1 <= n <= N (1 - delta / M)``."""

    n_ambient: int
    delta: float
    m_len: int

    @property
    def t_max(self) -> int:
        x = self.delta * self.n_ambient / self.m_len**2
        t = math.isqrt(int(math.floor(x)))
        return t

    @property
    def n_max(self) -> int:
        return int(math.floor(self.n_ambient * (1 - self.delta / self.m_len)))

    @classmethod
    def for_set(cls, a: IndicatorSet, m_len: int) -> "ProgressionLimits":
        return cls(a.n_ambient, a.density, m_len)


def good_progressions(a: IndicatorSet, m_len: int) -> dict:
    """Census of progressions ``P_{n,t} = {n, n + t^2, ..., n + (M-1) t^2}`` with ``|A & P| >= delta M / 2``."""
    if m_len < 2:
        raise ValueError("m_len must be >= 2")
    lim = ProgressionLimits.for_set(a, m_len)
    delta = a.density
    threshold = delta * m_len / 2
    target = (delta * a.n_ambient) ** 1.5 / m_len
    t_max, n_max = lim.t_max, lim.n_max
    rec = {
        "good_count": 0,
        "eligible": 0,
        "threshold": threshold,
        "target": target,
        "t_max": t_max,
        "n_max": n_max,
        "degenerate": t_max < 1 or n_max < 1,
    }
    if rec["degenerate"]:
        return rec
    mask = np.concatenate([[0], a.to_mask().astype(np.int32)])
    good = 0
    for t in range(1, t_max + 1):
        s = t * t
        hits = np.zeros(n_max, dtype=np.int32)
        for k in range(m_len):
            hits += mask[1 + k * s: 1 + k * s + n_max]
        good += int(np.count_nonzero(hits >= threshold))
    rec["good_count"] = good
    rec["eligible"] = t_max * n_max
    return rec


def overcount_bound_check(n0: int, s: int, m_len: int, limits: ProgressionLimits) -> int:
    """Number of in-range progressions ``P_{n,t}`` containing both ``n0`` and ``n0 + s^2``."""
    if not (1 <= n0 and n0 + s * s <= limits.n_ambient):
        raise ValueError("pair must lie in [1, N]")
    target = n0 + s * s
    count = 0
    for t in range(1, limits.t_max + 1):
        step = t * t
        for i in range(m_len):
            n = n0 - i * step
            if n < 1:
                break
            if n > limits.n_max:
                continue
            d = target - n
            if d % step == 0 and d // step <= m_len - 1:
                count += 1
    return count
