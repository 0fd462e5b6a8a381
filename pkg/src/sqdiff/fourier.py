"""Exact discrete Fourier analysis for finitely supported functions on Z.

Conventions: ``fhat(alpha) = sum_n f(n) exp(-2 pi i n alpha)`` with ``alpha``
on the torus [0, 1).  Energies ``int_I |fhat|^2`` are evaluated exactly from
the autocorrelation ``r(m) = sum_n f(n) f(n - m)`` because ``|fhat|^2`` is a
trigonometric polynomial; no quadrature resolution is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import signal

__all__ = [
    "IntegerFunction",
    "ArcSystem",
    "to_torus",
    "frac_phase",
    "sincos2pi",
    "fourier_eval",
    "dft_grid",
    "convolve",
    "autocorrelation",
    "integrate_energy",
    "integrate_weighted_energy",
]

_SPLIT1 = 1 << 20
_SPLIT2 = 1 << 40


def to_torus(alpha):
    """Reduce ``alpha`` modulo 1 into [0, 1); Fractions stay exact."""
    if isinstance(alpha, Fraction):
        return alpha - math.floor(alpha)
    a = float(alpha) % 1.0
    return 0.0 if a == 1.0 else a


def frac_phase(n, alpha: float) -> np.ndarray:
    """Return ``(n * alpha) mod 1`` for an integer array ``n``.

    ``alpha`` is split into two dyadic heads and a small tail so the heads
    are multiplied in exact int64 arithmetic.  Accurate to ~1e-16 for
    |n| < 2**40.
    """
    n = np.asarray(n, dtype=np.int64)
    a = to_torus(float(alpha))
    h1 = math.floor(a * _SPLIT1)
    rest = a - h1 / _SPLIT1
    h2 = math.floor(rest * _SPLIT2)
    tail = rest - h2 / _SPLIT2
    p = ((n * h1) % _SPLIT1) / _SPLIT1 + ((n * h2) % _SPLIT2) / _SPLIT2 + n * tail
    return np.mod(p, 1.0)


def sincos2pi(x):
    """``(sin 2 pi x, cos 2 pi x)`` with exact zeros at multiples of 1/4."""
    x = np.asarray(x, dtype=float)
    k = np.rint(2.0 * x)
    resid = x - 0.5 * k
    sign = np.where(np.mod(k, 2.0) == 0.0, 1.0, -1.0)
    return sign * np.sin(2 * np.pi * resid), sign * np.cos(2 * np.pi * resid)


def _check_values(values) -> np.ndarray:
    arr = np.asarray(values)
    if np.iscomplexobj(arr):
        raise TypeError("IntegerFunction values must be real")
    arr = np.array(arr, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError("IntegerFunction values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class IntegerFunction:
    """Real function on Z supported on ``[start, start + len(values))``.

    An empty ``values`` array is the canonical zero function.
    """

    start: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "start", int(self.start))
        object.__setattr__(self, "values", _check_values(self.values))

    @classmethod
    def zero(cls) -> "IntegerFunction":
        return cls(0, np.zeros(0))

    @classmethod
    def point_mass(cls, n: int, c: float = 1.0) -> "IntegerFunction":
        return cls(n, [c])

    @classmethod
    def indicator(cls, members: Iterable[int]) -> "IntegerFunction":
        m = np.unique(np.asarray(list(members), dtype=np.int64))
        if m.size == 0:
            return cls.zero()
        vals = np.zeros(int(m[-1] - m[0]) + 1)
        vals[m - m[0]] = 1.0
        return cls(int(m[0]), vals)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def stop(self) -> int:
        """One past the last stored index."""
        return self.start + len(self)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.stop, dtype=np.int64)

    def __call__(self, n):
        n = np.asarray(n, dtype=np.int64)
        idx = n - self.start
        inside = (idx >= 0) & (idx < len(self))
        out = np.zeros(n.shape)
        out[inside] = self.values[idx[inside]]
        return out if out.ndim else float(out)

    def l1(self) -> float:
        return math.fsum(np.abs(self.values))

    def total(self) -> float:
        return math.fsum(self.values)

    def l2sq(self) -> float:
        return math.fsum(self.values * self.values)

    def window(self, lo: int, hi: int) -> "IntegerFunction":
        """Restrict or zero-extend to the index range ``[lo, hi)``."""
        return IntegerFunction(lo, self(np.arange(lo, hi, dtype=np.int64)))

    def _binary(self, other: "IntegerFunction", op) -> "IntegerFunction":
        if len(self) == 0 and len(other) == 0:
            return IntegerFunction.zero()
        starts = [g.start for g in (self, other) if len(g)]
        stops = [g.stop for g in (self, other) if len(g)]
        lo, hi = min(starts), max(stops)
        return IntegerFunction(lo, op(self.window(lo, hi).values, other.window(lo, hi).values))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, c: float):
        return IntegerFunction(self.start, self.values * float(c))

    __rmul__ = __mul__

    def to_json(self) -> dict:
        return {"start": self.start, "values": [float(v) for v in self.values]}

    @classmethod
    def from_json(cls, obj: dict) -> "IntegerFunction":
        return cls(int(obj["start"]), obj["values"])


def _as_float(x) -> float:
    return float(x)


def _normalize_mod(intervals, period):
    """Merge closed intervals modulo ``period``; returns (sorted list, full)."""
    pieces = []
    for lo, hi in intervals:
        if hi < lo:
            raise ValueError(f"interval with lo > hi: ({lo}, {hi})")
        width = hi - lo
        if width >= period:
            return [(period * 0, period)], True
        lo_r = lo - math.floor(lo / period) * period
        hi_r = lo_r + width
        if hi_r <= period:
            pieces.append((lo_r, hi_r))
        else:
            pieces.append((lo_r, period))
            pieces.append((period * 0, hi_r - period))
    pieces.sort()
    merged: list[list] = []
    for lo, hi in pieces:
        if merged and lo <= merged[-1][1]:
            if hi > merged[-1][1]:
                merged[-1][1] = hi
        else:
            merged.append([lo, hi])
    out = [(a, b) for a, b in merged]
    full = len(out) == 1 and out[0][0] == 0 and out[0][1] == period
    return out, full


def _intersect_sorted(xs, ys):
    out = []
    i = j = 0
    while i < len(xs) and j < len(ys):
        lo = max(xs[i][0], ys[j][0])
        hi = min(xs[i][1], ys[j][1])
        if lo <= hi:
            out.append((lo, hi))
        if xs[i][1] < ys[j][1]:
            i += 1
        else:
            j += 1
    return out


@dataclass(frozen=True)
class ArcSystem:
    """Finite union of closed arcs of the torus.

    ``intervals`` are (lo, hi) pairs read modulo 1.  When ``period`` is set to
    an integer Q the system is invariant under translation by 1/Q and
    ``intervals`` describe one period, read modulo 1/Q.  Endpoints may be
    floats or Fractions; Fractions keep set operations exact.
    """

    intervals: tuple = ()
    period: int | None = None
    degenerate: bool = False

    def __post_init__(self):
        ivs = tuple((lo, hi) for lo, hi in self.intervals)
        for lo, hi in ivs:
            if hi < lo:
                raise ValueError(f"interval with lo > hi: ({lo}, {hi})")
        object.__setattr__(self, "intervals", ivs)
        if self.period is not None and int(self.period) < 1:
            raise ValueError("period must be a positive integer")

    @property
    def _cell(self):
        if self.period is None:
            return 1
        exact = all(isinstance(x, (int, Fraction)) for iv in self.intervals for x in iv)
        return Fraction(1, int(self.period)) if exact else 1.0 / int(self.period)

    def normalized(self) -> "ArcSystem":
        ivs, full = _normalize_mod(self.intervals, self._cell)
        return ArcSystem(tuple(ivs), self.period, self.degenerate or full)

    def expanded(self) -> "ArcSystem":
        """Materialize all translates of a periodic system (normalized)."""
        if self.period is None:
            return self.normalized()
        base = self.normalized()
        cell = base._cell
        ivs = [(lo + a * cell, hi + a * cell) for a in range(int(self.period)) for lo, hi in base.intervals]
        return ArcSystem(tuple(ivs)).normalized()

    def measure(self):
        base = self.normalized()
        m = sum((hi - lo for lo, hi in base.intervals), start=0)
        return m * (self.period or 1)

    def contains(self, alpha) -> bool:
        cell = self._cell
        a = to_torus(alpha)
        a = a - math.floor(a / cell) * cell
        for lo, hi in self.normalized().intervals:
            if lo <= a <= hi or lo <= a + cell <= hi:
                return True
        return False

    def intersect(self, other: "ArcSystem") -> "ArcSystem":
        if self.period is not None and self.period == other.period:
            xs, ys = self.normalized().intervals, other.normalized().intervals
            return ArcSystem(tuple(_intersect_sorted(xs, ys)), self.period)
        xs, ys = self.expanded().intervals, other.expanded().intervals
        return ArcSystem(tuple(_intersect_sorted(xs, ys)))

    def union(self, other: "ArcSystem") -> "ArcSystem":
        if self.period is not None and self.period == other.period:
            return ArcSystem(self.intervals + other.intervals, self.period).normalized()
        return ArcSystem(self.expanded().intervals + other.expanded().intervals).normalized()

    def overlap_measure(self, other: "ArcSystem"):
        """Measure of the intersection; zero means disjoint up to endpoints."""
        return self.intersect(other).measure()

    def pieces(self) -> tuple[np.ndarray, np.ndarray]:
        """Centers and widths (floats) of the normalized intervals of one period."""
        ivs = self.normalized().intervals
        if not ivs:
            return np.zeros(0), np.zeros(0)
        centers = np.array([_as_float((lo + hi) / 2) for lo, hi in ivs])
        widths = np.array([_as_float(hi - lo) for lo, hi in ivs])
        return centers, widths

    def to_json(self) -> list:
        ivs = self.expanded().intervals
        return [[float(lo), float(hi)] for lo, hi in ivs]

    @classmethod
    def from_json(cls, obj: Sequence) -> "ArcSystem":
        return cls(tuple((float(lo), float(hi)) for lo, hi in obj)).normalized()

    @classmethod
    def full(cls) -> "ArcSystem":
        return cls(((Fraction(0), Fraction(1)),), degenerate=True)


def fourier_eval(f: IntegerFunction, alpha):
    """Evaluate ``fhat`` at one point or an array of points.

    Each value is an exactly rounded (``math.fsum``) sum of the terms in
    ascending n, so results do not depend on platform summation order.
    """
    scalar = np.ndim(alpha) == 0
    alphas = np.atleast_1d(np.asarray(alpha, dtype=float))
    out = np.zeros(alphas.shape, dtype=complex)
    if len(f) == 0:
        return complex(0.0) if scalar else out
    n = f.indices
    v = f.values
    for i, a in enumerate(alphas):
        s, c = sincos2pi(frac_phase(n, a))
        out[i] = complex(math.fsum(v * c), -math.fsum(v * s))
    return complex(out[0]) if scalar else out


def dft_grid(f: IntegerFunction, M: int) -> np.ndarray:
    """``fhat(k / M)`` for k = 0..M-1 by FFT."""
    M = int(M)
    if M < max(len(f), 1):
        raise ValueError("grid too coarse for exact representation")
    if len(f) == 0:
        return np.zeros(M, dtype=complex)
    raw = np.fft.fft(f.values, n=M)
    k = np.arange(M, dtype=np.int64)
    shift = (k * (f.start % M)) % M
    s, c = sincos2pi(shift / M)
    return raw * (c - 1j * s)


def convolve(f: IntegerFunction, g: IntegerFunction) -> IntegerFunction:
    """``(f*g)(n) = sum_l f(n - l) g(l)``."""
    if len(f) == 0 or len(g) == 0:
        return IntegerFunction.zero()
    vals = signal.convolve(f.values, g.values, mode="full", method="auto")
    if _is_integral(f.values) and _is_integral(g.values):
        vals = np.rint(vals)
    return IntegerFunction(f.start + g.start, vals)


def _is_integral(v: np.ndarray) -> bool:
    return bool(np.all(v == np.rint(v))) and float(np.abs(v).sum()) < 2.0**52


def _autocorr_lags(f: IntegerFunction) -> np.ndarray:
    """r(m) for m = 0..len(f)-1."""
    v = f.values
    if v.size == 0:
        return np.zeros(1)
    full = signal.correlate(v, v, mode="full", method="auto")
    L = v.size
    r = 0.5 * (full[L - 1:] + full[L - 1::-1])
    if _is_integral(v):
        r = np.rint(r)
    r[0] = math.fsum(v * v)
    return r


def autocorrelation(f: IntegerFunction) -> IntegerFunction:
    """``r(m) = sum_n f(n) f(n - m)``, stored on ``[-(L-1), L-1]``."""
    if len(f) == 0:
        return IntegerFunction.zero()
    r = _autocorr_lags(f)
    return IntegerFunction(-(len(r) - 1), np.concatenate([r[:0:-1], r]))


def _lag_integrals(m: np.ndarray, centers, widths, slopes=None, offsets=None, chunk=1 << 22) -> np.ndarray:
    """For each lag m, ``sum_k int_{I_k} w_k(a) cos(2 pi m a) da``.

    ``w_k(a) = offsets[k] + slopes[k] * (a - c_k)`` on ``I_k = [c_k - h, c_k + h]``
    (defaults: constant weight 1).  Uses the centered closed forms so no
    cancellation occurs for short intervals or small lags.
    """
    m = np.asarray(m, dtype=np.int64)
    out = np.zeros(m.shape)
    if centers.size == 0 or m.size == 0:
        return out
    if offsets is None:
        offsets = np.ones_like(centers)
    per = max(1, chunk // max(1, centers.size))
    mf_all = m.astype(float)
    for lo in range(0, m.size, per):
        mm = m[lo:lo + per]
        mf = mf_all[lo:lo + per]
        acc = np.zeros(mm.size)
        for c, w, o, sl in zip(centers, widths, offsets, slopes if slopes is not None else np.zeros_like(centers)):
            if w == 0.0:
                continue
            sc, cc = sincos2pi(frac_phase(mm, c))
            x = np.pi * mf * w  # half-angle of the interval
            sx, _ = sincos2pi(frac_phase(mm, w / 2.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                sinc = np.where(mm == 0, 1.0, sx / x)
            acc += o * w * cc * sinc
            if sl != 0.0:
                # int_{-w/2}^{w/2} u cos(2 pi m (c + u)) du = -sin(2 pi m c) * (w^2/2) g(x)
                _, cx = sincos2pi(frac_phase(mm, w / 2.0))
                small = np.abs(x) < 1e-3
                with np.errstate(divide="ignore", invalid="ignore"):
                    g = np.where(small, x / 3.0 - x**3 / 30.0, (sx - x * cx) / (x * x))
                acc += -sl * sc * (w * w / 2.0) * g
        out[lo:lo + per] = acc
    return out


def integrate_weighted_energy(f: IntegerFunction, pieces, period: int | None = None) -> float:
    """Exact ``int |fhat(a)|^2 w(a) da`` for a piecewise-linear weight.

    ``pieces`` is a sequence of ``(lo, hi, w_lo, w_hi)``: on ``[lo, hi]`` the
    weight interpolates linearly from ``w_lo`` to ``w_hi`` (zero elsewhere).
    With ``period=Q`` the pieces describe one cell of a 1/Q-periodic weight.
    """
    if len(f) == 0 or not pieces:
        return 0.0
    arr = np.array([[float(p[0]), float(p[1]), float(p[2]), float(p[3])] for p in pieces])
    lo, hi, wl, wh = arr.T
    widths = hi - lo
    if np.any(widths < 0):
        raise ValueError("piece with lo > hi")
    centers = (lo + hi) / 2.0
    offsets = (wl + wh) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.where(widths > 0, (wh - wl) / widths, 0.0)
    return _energy_from_lags(f, centers, widths, offsets, slopes, period)


def _energy_from_lags(f, centers, widths, offsets, slopes, period) -> float:
    r = _autocorr_lags(f)
    Q = int(period or 1)
    lags = np.arange(0, r.size, Q, dtype=np.int64)
    coef = _lag_integrals(lags, centers, widths, slopes=slopes, offsets=offsets)
    terms = r[lags] * coef
    total = terms[0] + 2.0 * math.fsum(terms[1:])
    return float(Q * total)


def integrate_energy(f: IntegerFunction, arcs: ArcSystem) -> float:
    """Exact ``int_arcs |fhat(a)|^2 da``."""
    if len(f) == 0 or not arcs.intervals:
        return 0.0
    base = arcs.normalized()
    r0 = f.l2sq()
    if base.degenerate and base.period is None:
        return r0
    centers, widths = base.pieces()
    val = _energy_from_lags(f, centers, widths, np.ones_like(centers), None, base.period)
    return min(max(val, 0.0), r0)
