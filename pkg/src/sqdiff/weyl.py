"""Quadratic Weyl sums, major arcs, annuli and the minor-arc sup scan."""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .fourier import ArcSystem, frac_phase, sincos2pi, to_torus

__all__ = [
    "WeylParams",
    "EtaParams",
    "EmptySumWarning",
    "NoMinorArcError",
    "weyl_sum",
    "weyl_sum_q",
    "weyl_sum_grid",
    "weyl_rescale_check",
    "lcm_up_to",
    "major_arcs",
    "major_arc_mask",
    "annuli",
    "minor_arc_sup",
    "default_grid_size",
    "calibration_record",
    "MAX_ARC_CENTERS",
]

LCM_CAP = 10**6
# q_eta^2 arc centres materialized at most (eta^-2 <= 8, q_eta = 840).
MAX_ARC_CENTERS = 840**2


class EmptySumWarning(UserWarning):
    """No multiple of q in the summation window."""


class NoMinorArcError(ValueError):
    pass


@dataclass(frozen=True)
class WeylParams:
    """The window (lam, lam + mu] and divisibility modulus q."""

    lam: int
    mu: int
    q: int = 1

    def __post_init__(self):
        if not (1 <= self.mu <= self.lam):
            raise ValueError(f"need 1 <= mu <= lambda, got mu={self.mu}, lambda={self.lam}")
        if self.q < 1:
            raise ValueError("q must be >= 1")

    def check_ambient(self, n: int) -> None:
        if 4 * self.lam**2 > n:
            raise ValueError(f"lambda^2 <= N/4 violated: {self.lam}^2 > {n}/4")

    def admissible_t(self) -> np.ndarray:
        first = (self.lam // self.q + 1) * self.q
        return np.arange(first, self.lam + self.mu + 1, self.q, dtype=np.int64)

    @property
    def lam_prime(self) -> int:
        if self.lam % self.q:
            raise ValueError("q does not divide lambda")
        return self.lam // self.q

    @property
    def mu_prime(self) -> int:
        if self.mu % self.q:
            raise ValueError("q does not divide mu")
        return self.mu // self.q


def _t_range(lam, mu, q=1) -> np.ndarray:
    lo = math.floor(lam)
    hi = math.floor(lam + mu)
    first = (lo // q + 1) * q
    return np.arange(first, hi + 1, q, dtype=np.int64)


def _phase_sum(n: np.ndarray, alpha) -> complex:
    s, c = sincos2pi(frac_phase(n, alpha))
    return complex(math.fsum(c), math.fsum(s))


def _unpack(lam, mu, alpha, q=None):
    """Accept either ``(WeylParams, alpha)`` or ``(lam, mu, alpha)``."""
    if isinstance(lam, WeylParams):
        return lam.lam, lam.mu, mu, lam.q
    return lam, mu, alpha, q


def weyl_sum(lam, mu, alpha=None):
    """Normalized sum ``(1/mu) sum_{t in (lam, lam+mu]} e(t^2 alpha)``.

    Call as ``weyl_sum(lam, mu, alpha)`` or ``weyl_sum(params, alpha)``.
    Non-integer ``lam``/``mu`` give the perturbed sum over integer t in the
    real window.  ``alpha`` may be a scalar or an array.
    """
    lam, mu, alpha, _ = _unpack(lam, mu, alpha)
    t = _t_range(lam, mu)
    t2 = t * t
    if np.ndim(alpha) == 0:
        return _phase_sum(t2, alpha) / mu
    return np.array([_phase_sum(t2, a) for a in np.ravel(alpha)]).reshape(np.shape(alpha)) / mu


def weyl_sum_q(lam, mu, q=None, alpha=None):
    """``(q/mu) sum_{t in (lam, lam+mu], q | t} e(t^2 alpha)``; 0 with a warning if empty.

    Call as ``weyl_sum_q(lam, mu, q, alpha)`` or ``weyl_sum_q(params, alpha)``.
    """
    if isinstance(lam, WeylParams):
        lam, mu, alpha, q = lam.lam, lam.mu, mu, lam.q
    t = _t_range(lam, mu, q)
    if t.size == 0:
        warnings.warn("empty sum: no multiple of q in (lambda, lambda + mu]", EmptySumWarning, stacklevel=2)
        return 0j if np.ndim(alpha) == 0 else np.zeros(np.shape(alpha), dtype=complex)
    t2 = t * t
    if np.ndim(alpha) == 0:
        return q * _phase_sum(t2, alpha) / mu
    vals = [_phase_sum(t2, a) for a in np.ravel(alpha)]
    return q * np.array(vals).reshape(np.shape(alpha)) / mu


def weyl_sum_grid(lam, mu, grid_size: int, q: int = 1) -> np.ndarray:
    """``S_{lam,mu,q}(k / G)`` for k = 0..G-1 via one inverse FFT.

    The phases ``t^2 k / G`` are reduced exactly as ``(t^2 mod G) k / G``.
    """
    G = int(grid_size)
    t = _t_range(lam, mu, q)
    hist = np.bincount((t * t) % G, minlength=G).astype(float)
    return np.fft.ifft(hist) * (G * q / mu)


def weyl_rescale_check(lam, mu, q=None, alpha=None) -> float:
    """``|S_{lam,mu,q}(alpha) - S_{lam/q,mu/q}(q^2 alpha)|``."""
    if isinstance(lam, WeylParams):
        lam, mu, alpha, q = lam.lam, lam.mu, mu, lam.q
    if lam % q or mu % q:
        raise ValueError("identity requires q|lambda and q|mu")
    if q == 1:
        return 0.0
    a = Fraction(to_torus(alpha))
    scaled = float(to_torus(a * q * q))
    lhs = weyl_sum_q(lam, mu, q, float(a))
    rhs = weyl_sum(lam // q, mu // q, scaled)
    return abs(lhs - rhs)


@functools.lru_cache(maxsize=64)
def lcm_up_to(k: int) -> int:
    """``lcm(1, ..., k)`` as a product of maximal prime powers."""
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > LCM_CAP:
        raise ValueError(f"lcm_up_to({k}) is beyond desk scale (k > {LCM_CAP})")
    sieve = np.ones(k + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(k) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    factors = []
    for p in np.flatnonzero(sieve).tolist():
        pk = p
        while pk * p <= k:
            pk *= p
        factors.append(pk)
    return math.prod(factors)


def _eta_sq(eta) -> Fraction:
    if isinstance(eta, Fraction):
        return eta * eta
    exact = Fraction(float(eta) ** 2)
    near = exact.limit_denominator(10**6)
    # snap desk values such as (1/sqrt 2)^2 to 1/2; keep tiny scales exact
    return near if abs(near - exact) <= 1e-12 * exact else exact


@dataclass(frozen=True)
class EtaParams:
    """A scale ``eta`` in (0, 1) with ``q_eta = lcm{1 <= q <= eta^-2}``.

    ``eta_sq`` is kept as an exact rational (desk values such as 1/2 and
    1/sqrt(2) have rational squares) so arc endpoints are exact.
    """

    eta: float
    eta_sq: Fraction = field(default=None)
    q_eta: int = field(default=None)

    def __post_init__(self):
        if not (0.0 < float(self.eta) < 1.0):
            raise ValueError("eta must lie in (0, 1)")
        sq = _eta_sq(self.eta) if self.eta_sq is None else Fraction(self.eta_sq)
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "eta_sq", sq)
        q = lcm_up_to(self.k)
        if self.q_eta is not None and int(self.q_eta) != q:
            raise ValueError(f"q_eta={self.q_eta} does not equal lcm(1..{self.k})={q}")
        object.__setattr__(self, "q_eta", q)

    @classmethod
    def from_inverse_square(cls, k) -> "EtaParams":
        """The scale with ``eta^-2 = k`` exactly."""
        sq = 1 / Fraction(k)
        return cls(math.sqrt(sq), eta_sq=sq)

    @property
    def k(self) -> int:
        """``floor(eta^-2)``."""
        return math.floor(1 / self.eta_sq)

    @staticmethod
    def eta_epsilon(epsilon: float, c_eta: float) -> float:
        """``exp(-C eps^-1 log eps^-1)``."""
        if epsilon >= 1.0:
            return 1.0
        return math.exp(-c_eta / epsilon * math.log(1.0 / epsilon))


def major_arcs(eta: EtaParams, mu) -> ArcSystem:
    """Union over q <= eta^-2 and 0 <= a < q^2 of ``|alpha - a/q^2| <= 1/(eta^2 mu^2)``."""
    r = 1 / (eta.eta_sq * Fraction(mu) ** 2)
    centers = set()
    for q in range(1, eta.k + 1):
        d = q * q
        centers.update(Fraction(a, d) for a in range(d))
    if 2 * r >= 1:
        return ArcSystem.full()
    ivs = [(c - r, c + r) for c in sorted(centers)]
    return ArcSystem(tuple(ivs)).normalized()


def annuli(eta: EtaParams, lam, mu) -> ArcSystem:
    """``{alpha : eta^2/lam^2 <= |alpha - a/q_eta^2| <= 1/(eta^2 mu^2)}`` as a 1/q_eta^2-periodic system."""
    inner = eta.eta_sq / Fraction(lam) ** 2
    outer = 1 / (eta.eta_sq * Fraction(mu) ** 2)
    if inner >= outer:
        raise ValueError("empty annulus: eta^4 mu^2 >= lambda^2")
    Q = eta.q_eta**2
    if 2 * outer > Fraction(1, Q):
        # neighbouring arcs would cover each other's punctured centres
        raise ValueError("annulus arcs overlap: need mu >= sqrt(2) q_eta / eta")
    return ArcSystem(((-outer, -inner), (inner, outer)), period=Q).normalized()


def default_grid_size(mu) -> int:
    return int(max(math.ceil(10 * mu * mu), 10**6))


def major_arc_mask(eta: EtaParams, mu, grid_size: int) -> np.ndarray:
    """Boolean mask of grid points k/G lying in the closed major arcs."""
    G = int(grid_size)
    r = 1 / (eta.eta_sq * Fraction(mu) ** 2)
    if 2 * r >= 1:
        return np.ones(G, dtype=bool)
    diff = np.zeros(G + 1, dtype=np.int64)
    rn, rd = r.numerator, r.denominator
    exact = max(eta.k**2, 1) * rd * G < 2**62 and rn * G < 2**62
    for q in range(1, eta.k + 1):
        d = q * q
        a = np.arange(d, dtype=np.int64)
        if exact:
            # k in [ceil(G (a rd - d rn) / (d rd)), floor(G (a rd + d rn) / (d rd))]
            den = d * rd
            lo = -((-(G * (a * rd - d * rn))) // den)
            hi = (G * (a * rd + d * rn)) // den
        else:
            rf = float(r)
            lo = np.ceil(G * (a / d - rf)).astype(np.int64)
            hi = np.floor(G * (a / d + rf)).astype(np.int64)
        _add_wrapped(diff, lo, hi, G)
    return np.cumsum(diff[:G]) > 0


def _add_wrapped(diff, lo, hi, G):
    keep = hi >= lo
    lo, hi = lo[keep], hi[keep]
    if np.any(hi - lo + 1 >= G):
        diff[0] += 1
        diff[G] -= 1
        return
    shift = np.floor_divide(lo, G) * G
    lo, hi = lo - shift, hi - shift
    wrap = hi >= G
    np.add.at(diff, lo[~wrap], 1)
    np.add.at(diff, hi[~wrap] + 1, -1)
    np.add.at(diff, lo[wrap], 1)
    diff[G] -= int(wrap.sum())
    np.add.at(diff, np.zeros(int(wrap.sum()), dtype=np.int64), 1)
    np.add.at(diff, hi[wrap] - G + 1, -1)


def minor_arc_sup(lam, mu, eta: EtaParams | None = None, grid_size: int | None = None) -> float:
    """Max of ``|S_{lam,mu}(k/G)|`` over grid points outside the major arcs.

    Also callable as ``minor_arc_sup(params, eta, grid_size)``.  Non-integer
    ``lam``/``mu`` scan the perturbed sum.
    """
    if isinstance(lam, WeylParams):
        lam, mu, eta, grid_size = lam.lam, lam.mu, mu, eta
    G = default_grid_size(mu) if grid_size is None else int(grid_size)
    mask = major_arc_mask(eta, mu, G)
    if mask.all():
        raise NoMinorArcError("no minor arc points at this resolution")
    vals = np.abs(weyl_sum_grid(lam, mu, G))
    return float(vals[~mask].max())


def calibration_record(lam, mu, eta: EtaParams, grid_size: int | None = None, timestamp: bool = True) -> dict:
    """JSON record for one minor-arc calibration run."""
    import datetime

    G = default_grid_size(mu) if grid_size is None else int(grid_size)
    try:
        sup = minor_arc_sup(lam, mu, eta, G)
    except NoMinorArcError:
        sup = None
    rec = {
        "eta": eta.eta,
        "lambda": lam,
        "mu": mu,
        "grid_size": G,
        "sup": sup,
        "sup_over_eta": None if sup is None else sup / eta.eta,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat() if timestamp else None,
    }
    return rec
