"""Cutoff profiles and the lattice mollifier ``psi_{q,L}``.

``psi_{q,L}(q^2 l) = (q/L)^2 psi(q^2 l / L^2)`` and zero off the lattice
``q^2 Z``.  Its transform is the train ``sum_a psitilde(L^2 (alpha - a/q^2))``,
a single bump near each ``a/q^2`` once ``L^2 > 2 q^2``.
"""

from __future__ import annotations

import enum
import functools
import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import signal, special

from .fourier import IntegerFunction

__all__ = [
    "ProfileKind",
    "CutoffProfile",
    "DiscreteMollifier",
    "make_profile",
    "mollifier_eval",
    "mollifier_hat",
    "kernel",
    "kernel_mass",
    "fejer_tail_bound",
    "smooth_convolve",
    "translation_flatness",
    "hat_difference_sup",
    "write_profile_table",
    "read_profile_table",
    "DEFAULT_TAIL_TOL",
]

DEFAULT_TAIL_TOL = 1e-8
BUMP_NODES = 1024
# psi for SMOOTH_BUMP is below 1e-18 beyond this point and is set to 0.
BUMP_CUTOFF = 120.0
FLATNESS_CAP = 1 << 24
TABLE_MAGIC = b"SQDT"


class ProfileKind(str, enum.Enum):
    FEJER = "FEJER"
    SMOOTH_BUMP = "SMOOTH_BUMP"


@dataclass(frozen=True)
class CutoffProfile:
    """A pair ``psi`` / ``psitilde`` with ``psitilde`` supported in [-1, 1]."""

    kind: ProfileKind
    psi: Callable = field(repr=False, compare=False)
    psi_tilde: Callable = field(repr=False, compare=False)

    def tail_radius(self, tol: float, spacing: float) -> float:
        """Smallest x with ``sum_{l : l*spacing > x} spacing*psi(l*spacing) < tol`` (one side)."""
        if self.kind is ProfileKind.FEJER:
            return 1.0 / (math.pi**2 * tol)
        xs, tail, env = _bump_tail_table()
        # a lattice sum with step <= 1/2 is bounded by the integral plus one envelope sample
        ok = tail + spacing * env < tol
        idx = int(np.argmax(ok)) if ok.any() else len(xs) - 1
        return float(xs[idx])


def _fejer_psi(x):
    return np.sinc(x) ** 2


def _triangle(xi):
    return np.maximum(0.0, 1.0 - np.abs(xi))


def _chi(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 0.5
    out[inside] = np.exp(-1.0 / (1.0 - 4.0 * y[inside] ** 2))
    return out


@functools.lru_cache(maxsize=None)
def _bump_nodes(n: int = BUMP_NODES):
    h = 1.0 / n
    y = -0.5 + h * np.arange(1, n)
    cy = _chi(y)
    norm = float(np.sum(cy * cy) * h)
    return y, cy, h, norm


def _bump_psi(x, chunk: int = 4096):
    """``chicheck(x)^2 / int chi^2`` by the trapezoid rule (spectrally accurate)."""
    y, cy, h, norm = _bump_nodes()
    x = np.asarray(x, dtype=float)
    flat = np.abs(x.ravel())
    out = np.zeros(flat.shape)
    live = np.flatnonzero(flat <= BUMP_CUTOFF)
    for i in range(0, live.size, chunk):
        idx = live[i:i + chunk]
        v = np.cos(2 * np.pi * np.outer(flat[idx], y)) @ cy * h
        out[idx] = v * v / norm
    return out.reshape(x.shape) if x.ndim else float(out[0])


def _bump_psi_tilde(xi, n: int = 512):
    """``(chi*chi)(xi) / (chi*chi)(0)``; the integrand is smooth and flat at both ends."""
    _, _, _, norm = _bump_nodes()
    xi = np.asarray(xi, dtype=float)
    a = np.abs(xi.ravel())
    out = np.zeros(a.shape)
    live = a < 1.0
    if live.any():
        lo = a[live] - 0.5
        w = 1.0 - a[live]
        k = np.arange(1, n) / n
        y = lo[:, None] + w[:, None] * k[None, :]
        vals = _chi(y) * _chi(a[live][:, None] - y)
        out[live] = np.minimum(1.0, vals.sum(axis=1) * (w / n) / norm)
    return out.reshape(xi.shape) if xi.ndim else float(out[0])


@functools.lru_cache(maxsize=None)
def _bump_tail_table(step: float = 0.01):
    xs = np.arange(0.0, BUMP_CUTOFF + step, step)
    v = _bump_psi(xs)
    tail = np.cumsum(v[::-1])[::-1] * step
    # nonincreasing majorant of psi on the grid
    env = np.maximum.accumulate(v[::-1])[::-1]
    return xs, tail, env


def make_profile(kind=ProfileKind.FEJER) -> CutoffProfile:
    kind = ProfileKind(kind)
    if kind is ProfileKind.FEJER:
        return CutoffProfile(kind, _fejer_psi, _triangle)
    return CutoffProfile(kind, _bump_psi, _bump_psi_tilde)


def fejer_tail_bound(q: int, L: float, radius: int) -> float:
    """Upper bound on ``sum_{|l| > R} psi_{q,L}(q^2 l)`` from ``sinc^2(x) <= 1/(pi x)^2``."""
    return 2.0 * L * L / (math.pi**2 * q * q) * float(special.polygamma(1, radius + 1))


@dataclass(frozen=True)
class DiscreteMollifier:
    """``psi_{q,L}`` with the lattice terms ``|l| <= truncation_radius`` kept."""

    profile: CutoffProfile
    q: int
    L: float
    truncation_radius: int = None
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if self.q < 1 or self.L <= 0:
            raise ValueError(f"need q >= 1 and L > 0 (q={self.q}, L={self.L})")
        if self.truncation_radius is None:
            object.__setattr__(self, "truncation_radius", self._default_radius())
        if self.truncation_radius < 0:
            raise ValueError("truncation_radius must be >= 0")

    @classmethod
    def fejer(cls, q: int, L: float, **kw) -> "DiscreteMollifier":
        return cls(make_profile(ProfileKind.FEJER), q, L, **kw)

    @classmethod
    def smooth_bump(cls, q: int, L: float, **kw) -> "DiscreteMollifier":
        return cls(make_profile(ProfileKind.SMOOTH_BUMP), q, L, **kw)

    @property
    def kind(self) -> ProfileKind:
        return self.profile.kind

    @property
    def q2(self) -> int:
        return self.q * self.q

    @property
    def spacing(self) -> float:
        """Step ``q^2 / L^2`` of the sample points of psi."""
        return self.q2 / (self.L * self.L)

    def _default_radius(self) -> int:
        if self.kind is ProfileKind.FEJER:
            return math.ceil(2.0 * (self.L / self.q) ** 2 / (math.pi**2 * self.tail_tol))
        x = self.profile.tail_radius(self.tail_tol / 2, self.spacing)
        return math.ceil(x / self.spacing)

    def tail_bound(self, radius: int | None = None) -> float:
        """Mass outside ``|l| <= radius`` (bound for FEJER, tabulated for SMOOTH_BUMP)."""
        R = self.truncation_radius if radius is None else radius
        if self.kind is ProfileKind.FEJER:
            return fejer_tail_bound(self.q, self.L, R)
        xs, tail, env = _bump_tail_table()
        x = R * self.spacing
        if x >= xs[-1]:
            return 0.0
        i = int(np.searchsorted(xs, x))
        return float(2 * (tail[i] + self.spacing * env[i]))

    def weights(self, ells) -> np.ndarray:
        """``psi_{q,L}(q^2 l)`` for lattice indices ``l`` (zero beyond the radius)."""
        ells = np.asarray(ells, dtype=np.int64)
        out = (self.q / self.L) ** 2 * self.profile.psi(ells * self.spacing)
        return np.where(np.abs(ells) <= self.truncation_radius, out, 0.0)

    def with_radius(self, radius: int) -> "DiscreteMollifier":
        return DiscreteMollifier(self.profile, self.q, self.L, int(radius), self.tail_tol)

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "q": self.q, "L": self.L, "truncation_radius": self.truncation_radius}

    @classmethod
    def from_json(cls, obj: dict) -> "DiscreteMollifier":
        return cls(make_profile(obj["kind"]), int(obj["q"]), float(obj["L"]), int(obj["truncation_radius"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def mollifier_eval(m: DiscreteMollifier, n):
    """``psi_{q,L}(n)``; zero off ``q^2 Z`` and beyond the truncation radius."""
    n_arr = np.asarray(n, dtype=np.int64)
    on = n_arr % m.q2 == 0
    vals = np.where(on, m.weights(np.where(on, n_arr // m.q2, 0)), 0.0)
    return vals if n_arr.ndim else float(vals)


def _center_offset(alpha, q2: int):
    """Signed distance from alpha to the nearest ``a/q^2``.

    Float inputs within a few ulps of a centre are snapped onto it, so the
    float nearest ``a/q^2`` counts as the centre itself.
    """
    if isinstance(alpha, Fraction):
        x = alpha * q2
        return float((x - round(x)) / q2)
    a = np.asarray(alpha, dtype=float)
    x = a * q2
    r = x - np.round(x)
    r = np.where(np.abs(r) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(x)), 0.0, r)
    return r / q2


def mollifier_hat(m: DiscreteMollifier, alpha):
    """Periodized transform ``sum_l psitilde(L^2 (alpha - l/q^2))``.

    Requires ``L^2 > 2 q^2`` so exactly one term can be nonzero.
    """
    if m.L * m.L <= 2 * m.q2:
        raise ValueError(f"periodization terms overlap: L^2 = {m.L * m.L} <= 2 q^2 = {2 * m.q2}")
    d = _center_offset(alpha, m.q2)
    val = m.profile.psi_tilde(m.L * m.L * np.asarray(d))
    return float(val) if np.ndim(val) == 0 else val


def kernel(m: DiscreteMollifier, reach: int) -> IntegerFunction:
    """Dense kernel on ``[-reach', reach']`` with ``reach'`` the largest multiple of ``q^2`` kept."""
    lmax = min(int(reach) // m.q2, m.truncation_radius)
    ells = np.arange(-lmax, lmax + 1)
    vals = np.zeros(2 * lmax * m.q2 + 1)
    vals[::m.q2] = m.weights(ells)
    return IntegerFunction(-lmax * m.q2, vals)


def _fejer_mass_by_residues(m: DiscreteMollifier, period_cap: int = 10**7):
    """Truncated FEJER mass grouped by residue of l modulo the period of ``sin^2``.

    With ``q^2/L^2 = a/b`` in lowest terms, ``sin^2(pi a l / b)`` has period b,
    and each residue class contributes a Hurwitz zeta partial sum.
    ``L^2`` is read as the exact binary rational it is stored as; returns
    None when b is too large.
    """
    x = Fraction(m.q2) / Fraction(m.L * m.L)
    a, b = x.numerator, x.denominator
    if b > period_cap:
        return None
    R = m.truncation_radius
    r = np.arange(1, b + 1, dtype=np.int64)
    r = r[r <= R]
    blocks = (R - r) // b + 1
    s2 = np.sin(np.pi * ((a * r) % b) / b) ** 2
    partial = (special.zeta(2, r / b) - special.zeta(2, r / b + blocks)) / b**2
    side = math.fsum(s2 * partial) * b * b / (math.pi**2 * a * a)
    return float(x) * (1.0 + 2.0 * side)


def _fejer_mass_by_poisson(m: DiscreteMollifier, tol: float = 1e-13):
    """Truncated FEJER mass as ``1 - tail`` for ``x = q^2/L^2 <= 1``.

    Poisson summation gives ``x sum_l sinc^2(x l) = 1`` over all l.  Writing
    ``sin^2 = (1 - cos)/2``, the tail beyond R is ``psi_1(R+1)/(pi^2 x)``
    minus an oscillating sum bounded by ``1/(pi^2 x (R+1)^2 |sin(pi x)|)``.
    Returns None when that bound exceeds ``tol``.
    """
    x = m.q2 / (m.L * m.L)
    R = m.truncation_radius
    s = abs(math.sin(math.pi * x))
    if x > 1 or s == 0:
        return None
    if 1.0 / (math.pi**2 * x * (R + 1) ** 2 * s) > tol:
        return None
    return 1.0 - float(special.polygamma(1, R + 1)) / (math.pi**2 * x)


def kernel_mass(m: DiscreteMollifier, chunk: int = 1 << 22, direct: bool = False) -> float:
    """``sum_n psi_{q,L}(n)`` over the materialized range.

    FEJER kernels with rational ``L^2`` of small denominator are summed by
    residue class, other large FEJER kernels through the Poisson identity;
    everything else (or ``direct=True``) is summed in chunks.
    """
    if m.kind is ProfileKind.FEJER and not direct:
        v = _fejer_mass_by_residues(m)
        if v is None and m.truncation_radius > 10**7:
            v = _fejer_mass_by_poisson(m)
        if v is not None:
            return v
    R = m.truncation_radius
    if R > 4 * 10**9:
        raise ValueError(f"truncation radius {R} too large to sum directly; pass a larger tail_tol")
    parts = [float(m.weights(np.array([0]))[0])]
    for lo in range(1, R + 1, chunk):
        ells = np.arange(lo, min(lo + chunk, R + 1))
        parts.append(2.0 * math.fsum(m.weights(ells)))
    return math.fsum(parts)


def default_pad(m: DiscreteMollifier, support_len: int) -> int:
    return int(min(m.truncation_radius * m.q2, 64 * math.ceil(m.L * m.L) + support_len))


def smooth_convolve(f: IntegerFunction, m: DiscreteMollifier, pad: int | None = None) -> IntegerFunction:
    """``f * psi_{q,L}`` on ``[start - pad, stop - 1 + pad]``.

    Every output value is exact for the truncated kernel: all lattice terms
    that can reach the window from the support of f are included.
    """
    if len(f) == 0:
        return IntegerFunction.zero()
    pad = default_pad(m, len(f)) if pad is None else int(pad)
    k = kernel(m, len(f) - 1 + pad)
    full = signal.fftconvolve(f.values, k.values) if len(k) > 64 else np.convolve(f.values, k.values)
    start = f.start + k.start
    lo = f.start - pad
    vals = full[lo - start: lo - start + len(f) + 2 * pad]
    # clear FFT rounding below zero
    vals = np.where(vals < 0, np.where(vals > -1e-12, 0.0, vals), vals)
    return IntegerFunction(lo, vals)


def translation_flatness(m: DiscreteMollifier, t: int, cap: int | None = None) -> float:
    """``(q/L)^2 sum_l |psi((q^2 l - t^2)/L^2) - psi(q^2 l/L^2)|``.

    The sum runs over ``|l| <= cap``.  By default the cap corresponds to
    ``|x| <= 4096`` in psi's argument (at most ``2^24`` terms per side); the
    neglected tail is about ``1/(2 pi x)`` of the total for FEJER.
    """
    if t % m.q:
        raise ValueError(f"shift not aligned to kernel lattice: q={m.q} does not divide t={t}")
    s = (t // m.q) ** 2
    if cap is None:
        cap = min(FLATNESS_CAP, math.ceil(4096 / m.spacing) + s)
    R = min(cap, m.truncation_radius + s)
    ells = np.arange(-R, R + 1)
    a = (m.q / m.L) ** 2 * m.profile.psi((ells - s) * m.spacing)
    b = (m.q / m.L) ** 2 * m.profile.psi(ells * m.spacing)
    return math.fsum(np.abs(a - b))


def _fejer_breakpoints(m: DiscreteMollifier) -> np.ndarray:
    c = np.arange(m.q2) / m.q2
    w = 1.0 / (m.L * m.L)
    return np.concatenate([c, c - w, c + w]) % 1.0


def hat_difference_sup(m1: DiscreteMollifier, m2: DiscreteMollifier, grid: int = 1 << 20) -> float:
    """``sup_alpha |psihat_1 - psihat_2|``.

    For two FEJER kernels the difference is piecewise linear, so the sup is
    attained at a breakpoint and is computed exactly there.  Otherwise a
    uniform grid of the given size is scanned together with the centres.
    """
    if m1.kind is ProfileKind.FEJER and m2.kind is ProfileKind.FEJER:
        pts = np.concatenate([_fejer_breakpoints(m1), _fejer_breakpoints(m2)])
    else:
        pts = np.concatenate([np.arange(grid) / grid, np.arange(m1.q2) / m1.q2, np.arange(m2.q2) / m2.q2])
    return float(np.max(np.abs(mollifier_hat(m1, pts) - mollifier_hat(m2, pts))))


def write_profile_table(path, n_points: int = 1 << 16, x_max: float = BUMP_CUTOFF) -> Path:
    """Write the SMOOTH_BUMP psi table.

    Layout (little-endian): ``b"SQDT"``, uint32 version (1), uint32 quadrature
    nodes, uint64 n_points, float64 x_max, then n_points float64 values of
    psi at ``x_k = k * x_max / (n_points - 1)``.
    """
    path = Path(path)
    xs = np.linspace(0.0, x_max, n_points)
    vals = np.asarray(_bump_psi(xs), dtype="<f8")
    with path.open("wb") as fh:
        fh.write(TABLE_MAGIC + struct.pack("<IIQd", 1, BUMP_NODES, n_points, x_max))
        fh.write(vals.tobytes())
    return path


def read_profile_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x, psi)`` from a table written by :func:`write_profile_table`."""
    raw = Path(path).read_bytes()
    if raw[:4] != TABLE_MAGIC:
        raise ValueError("not a profile table (bad magic)")
    version, nodes, n, x_max = struct.unpack_from("<IIQd", raw, 4)
    if version != 1:
        raise ValueError(f"unsupported table version {version}")
    off = 4 + struct.calcsize("<IIQd")
    vals = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
    return np.linspace(0.0, x_max, n), vals.copy()


def profile_table(cache_dir, n_points: int = 1 << 16) -> tuple[np.ndarray, np.ndarray]:
    """Cached table keyed by resolution: built on first use, read afterwards."""
    path = Path(cache_dir) / f"smooth_bump_{BUMP_NODES}_{n_points}.bin"
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        write_profile_table(path, n_points)
    return read_profile_table(path)
