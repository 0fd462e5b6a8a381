"""Decomposition ``f = f1 + f2 + f3``, the dichotomy test and the scale iteration.

The true regime ``eta_eps = exp(-C eps^-1 log eps^-1)`` is far beyond what can
be materialized, so every routine here runs at an explicit desk-scale
``eta`` (typically 1/2 or 1/sqrt 2) and reports which inequalities were
checked and which only hold asymptotically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .calibration import CalibrationConstants, load_calibration
from .counting import IndicatorSet, intersect_count, lambda_direct
from .fourier import IntegerFunction, _autocorr_lags, integrate_energy, integrate_weighted_energy
from .mollifier import (
    DiscreteMollifier,
    ProfileKind,
    fejer_tail_bound,
    hat_difference_sup,
    make_profile,
    mollifier_hat,
    smooth_convolve,
)
from .report import ASYMPTOTIC, Check, check_ge, check_le
from .weyl import MAX_ARC_CENTERS, EtaParams, WeylParams, annuli, lcm_up_to, weyl_sum_grid

__all__ = [
    "AnalyticOnlyError",
    "Branch",
    "EpsilonRegime",
    "Decomposition",
    "DichotomyOutcome",
    "StructuredEnergy",
    "ScaleIteration",
    "eta_selection",
    "decompose",
    "main_term",
    "main_term_checks",
    "majorant_checks",
    "error_term_sup",
    "error_term_lambda",
    "structured_energy",
    "hat_difference_energy",
    "dichotomy_test",
    "scale_iteration",
    "scale_chain",
    "telescoping_sup",
]

MAX_DESK_K = 8


class AnalyticOnlyError(ValueError):
    """The requested objects exist only in the asymptotic regime."""


class Branch(str, enum.Enum):
    RANDOM = "RANDOM"
    STRUCTURED = "STRUCTURED"


def _as_eta(eta) -> EtaParams:
    return eta if isinstance(eta, EtaParams) else EtaParams(eta)


def _materializable(k: int) -> bool:
    return k <= MAX_DESK_K


@dataclass(frozen=True)
class EpsilonRegime:
    """``epsilon`` with ``eta_eps``, ``q_eps`` and the slack factors for "much greater than".

    When ``q_eps`` cannot be materialized the regime is analytic-only and
    ``eta_override`` supplies the desk-scale eta actually used.
    """

    epsilon: float
    c_eta: float = 1.0
    mu_factor: float = 10.0
    n_factor: float = 100.0
    eta_override: float | None = None
    c_strength: float = 0.25

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError("epsilon must lie in (0, 1]")
        if self.mu_factor <= 0 or self.n_factor <= 0:
            raise ValueError("slack factors must be positive")

    @classmethod
    def from_calibration(cls, epsilon: float, calib: CalibrationConstants | None = None, **kw) -> "EpsilonRegime":
        calib = calib or load_calibration()
        kw.setdefault("c_strength", calib.c_strength)
        return cls(epsilon, c_eta=calib.c_eta, **kw)

    @property
    def eta_eps(self) -> float:
        return EtaParams.eta_epsilon(self.epsilon, self.c_eta)

    @property
    def k_eps(self) -> int | None:
        e = self.eta_eps
        if e >= 1.0:
            return 1
        x = 1.0 / (e * e)
        return int(x) if x < 2**62 else None

    @property
    def analytic_only(self) -> bool:
        k = self.k_eps
        return k is None or not _materializable(k)

    @property
    def q_eps(self) -> int | None:
        """``q_{eta_eps}`` when it fits in desk memory, else None."""
        k = self.k_eps
        if k is None or k > 10**4:
            return None
        return lcm_up_to(max(k, 1))

    @property
    def eta(self) -> EtaParams:
        """The eta actually used: the override, else ``eta_eps`` when materializable."""
        if self.eta_override is not None:
            return _as_eta(self.eta_override)
        if self.analytic_only:
            raise AnalyticOnlyError(
                f"eta_eps = {self.eta_eps:.3g} is analytic-only (q_eps not materializable); pass eta_override"
            )
        return EtaParams(self.eta_eps)

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "c_eta": self.c_eta,
            "mu_factor": self.mu_factor,
            "n_factor": self.n_factor,
            "eta_override": self.eta_override,
            "c_strength": self.c_strength,
            "eta_eps": self.eta_eps,
            "analytic_only": self.analytic_only,
        }


# ---------------------------------------------------------------- decomposition


def decomposition_pad(l1: float, L: float, tol: float, cap: int = 2_000_000) -> int:
    """Window padding P with ``sum_{dist > P} f1(x)^2``-type tails below ``tol``.

    Outside the support, ``f * psi_{q,L}(x)`` is at most about
    ``||f||_1 L^2 / (pi^2 d^2)`` at distance d, so products of two tails sum
    to ``2 ||f||_1^2 L^4 / (3 pi^4 P^3)``.
    """
    if l1 == 0:
        return 0
    p = (2.0 * l1 * l1 * L**4 / (3.0 * math.pi**4 * tol)) ** (1.0 / 3.0)
    return int(min(cap, math.ceil(p)))


@dataclass(frozen=True)
class Decomposition:
    """``f = f1 + f2 + f3`` with ``f1 = f*psi_{q,L1}`` and ``f - f2 = f*psi_{q,L2}``.

    All four functions share the padded window ``[1 - pad, N + pad]``.
    """

    f: IntegerFunction
    f1: IntegerFunction
    f2: IntegerFunction
    f3: IntegerFunction
    eta: EtaParams
    q: int
    l1: float
    l2: float
    n_ambient: int
    pad: int
    m1: DiscreteMollifier = field(repr=False)
    m2: DiscreteMollifier = field(repr=False)

    @property
    def delta(self) -> float:
        return self.f.total() / self.n_ambient

    def identity_error(self) -> float:
        """``max |f - (f1 + f2 + f3)|`` on the window."""
        fw = self.f.window(self.f1.start, self.f1.stop)
        return float(np.max(np.abs(fw.values - (self.f1.values + self.f2.values + self.f3.values))))

    def mass_defect(self) -> float:
        return abs(self.f1.total() - self.f.total())

    def mass_tolerance(self) -> float:
        """Mass the truncated window can lose: kernel tail beyond the padding."""
        R = self.pad // self.q**2
        if self.m1.kind is ProfileKind.FEJER:
            tail = fejer_tail_bound(self.q, self.l1, R)
        else:
            tail = self.m1.tail_bound(R)
        return self.f.l1() * min(1.0, tail) + 1e-9 * (1 + self.f.l1())


def decompose(
    f: IntegerFunction,
    eta,
    lam: int,
    mu: int,
    profile=ProfileKind.FEJER,
    n_ambient: int | None = None,
    pad: int | None = None,
    pad_tol: float = 1e-3,
) -> Decomposition:
    """Split f at the scales ``L1 = lam/eta`` and ``L2 = eta mu`` with ``q = q_eta``."""
    eta = _as_eta(eta)
    if not _materializable(eta.k):
        raise AnalyticOnlyError(f"q_eta = lcm(1..{eta.k}) is beyond desk scale (eta^-2 <= {MAX_DESK_K})")
    if not (1 <= mu <= lam):
        raise ValueError(f"need 1 <= mu <= lambda (mu={mu}, lambda={lam})")
    q = eta.q_eta
    l1 = lam / eta.eta
    l2 = eta.eta * mu
    if l2 * l2 <= 2 * q * q:
        raise ValueError(
            f"periodization terms overlap: L2^2 = {l2 * l2:.6g} <= 2 q^2 = {2 * q * q} "
            f"(eta={eta.eta:.6g}, q={q}, lambda={lam}, mu={mu})"
        )
    prof = make_profile(profile) if not hasattr(profile, "psi") else profile
    m1 = DiscreteMollifier(prof, q, l1)
    m2 = DiscreteMollifier(prof, q, l2)
    n = n_ambient if n_ambient is not None else max(f.stop - 1, 1)
    if pad is None:
        pad = decomposition_pad(f.l1(), l1, pad_tol)
    if len(f) == 0:
        z = IntegerFunction.zero()
        return Decomposition(f, z, z, z, eta, q, l1, l2, n, 0, m1, m2)
    f1 = smooth_convolve(f, m1, pad)
    g2 = smooth_convolve(f, m2, pad)
    fw = f.window(f1.start, f1.stop)
    f2 = IntegerFunction(f1.start, fw.values - g2.values)
    f3 = IntegerFunction(f1.start, g2.values - f1.values)
    return Decomposition(f, f1, f2, f3, eta, q, l1, l2, n, pad, m1, m2)


# ---------------------------------------------------------------- main term


def _kernel_tail_mass(m: DiscreteMollifier, cutoff: float) -> float:
    """Mass of ``psi_{q,L}`` at ``|m| >= cutoff`` (untruncated kernel)."""
    R = max(math.ceil(cutoff / m.q**2) - 1, 0)
    if m.kind is ProfileKind.FEJER:
        return fejer_tail_bound(m.q, m.L, R)
    return m.tail_bound(R)


def main_term_checks(d: Decomposition, params: WeylParams, epsilon: float, calib: CalibrationConstants | None = None) -> list:
    """Hypotheses of the main-term lemma as Checks; flatness is asymptotic-only."""
    calib = calib or load_calibration()
    n = d.n_ambient
    return [
        Check("params.q == q_eta", params.q, "==", d.q, params.q == d.q),
        check_le("lambda + mu <= 2 eta L1", params.lam + params.mu, 2 * d.eta.eta * d.l1 + 1e-9),
        check_ge("N >= 100 L1", n, 100 * d.l1),
        check_le("kernel tail beyond eps N <= eps", _kernel_tail_mass(d.m1, epsilon * n), epsilon),
        check_le("c_flat eta^2 <= eps/4", calib.c_flat * d.eta.eta**2, epsilon / 4, kind=ASYMPTOTIC),
    ]


def main_term(d: Decomposition, params: WeylParams, epsilon: float | None = None, strict: bool = True) -> float:
    """``Lambda_q(f1, f1)`` by direct summation.

    The structural hypotheses (matching q, ``lam + mu <= 2 eta L1``) always
    raise.  With ``epsilon`` given and ``strict``, the quantitative
    invariant hypotheses raise too, each by name.
    """
    if params.q != d.q:
        raise ValueError(f"params.q = {params.q} must equal q_eta = {d.q}")
    if params.lam + params.mu > 2 * d.eta.eta * d.l1 + 1e-9:
        raise ValueError("lambda + mu <= 2 eta L1 violated")
    if epsilon is not None and strict:
        for c in main_term_checks(d, params, epsilon)[2:4]:
            if not c.holds:
                raise ValueError(f"precondition violated: {c.name} ({c.lhs:.6g} {c.relation} {c.rhs:.6g} fails)")
    return lambda_direct(d.f1, d.f1, params, retain_per_t=False).value


# ---------------------------------------------------------------- energies


def hat_difference_energy(f: IntegerFunction, q: int, L_small: float, L_large: float, profile=ProfileKind.FEJER) -> float:
    """``int |fhat|^2 (psihat_{q,L_small} - psihat_{q,L_large})`` exactly.

    ``psihat_{q,L}`` is the transform of the full lattice kernel, so the
    integral equals ``sum_m r(m) (psi_{q,L_small}(m) - psi_{q,L_large}(m))``
    over the finitely many lags of the autocorrelation r.  For FEJER the
    integrand weight is nonnegative, so this is also the integral of the
    absolute difference.
    """
    if len(f) == 0:
        return 0.0
    prof = make_profile(profile) if not hasattr(profile, "psi") else profile
    r = _autocorr_lags(f)
    q2 = q * q
    ell = np.arange(0, (len(r) - 1) // q2 + 1)
    lags = r[ell * q2]

    def samples(L):
        return (q / L) ** 2 * prof.psi(ell * q2 / (L * L))

    w = samples(L_small) - samples(L_large)
    return math.fsum(np.concatenate([[lags[0] * w[0]], 2.0 * lags[1:] * w[1:]]))


def _fejer_difference_pieces(q: int, L_small: float, L_large: float):
    a = 1.0 / (L_large * L_large)
    b = 1.0 / (L_small * L_small)
    top = 1.0 - (L_small / L_large) ** 2
    return [(-b, -a, 0.0, top), (-a, 0.0, top, 0.0), (0.0, a, 0.0, top), (a, b, top, 0.0)]


def hat_difference_energy_oracle(f: IntegerFunction, q: int, L_small: float, L_large: float) -> float:
    """Same integral on the frequency side: exact piecewise-linear weight (FEJER)."""
    return integrate_weighted_energy(f, _fejer_difference_pieces(q, L_small, L_large), period=q * q)


def majorant_checks(d: Decomposition, params: WeylParams) -> dict:
    """Both sides of the bound on ``max{|Lambda(f3, f1)|, |Lambda(f, f3)|}``."""
    a = lambda_direct(d.f3, d.f1, params, retain_per_t=False).value
    b = lambda_direct(d.f, d.f3, params, retain_per_t=False).value
    rhs = hat_difference_energy(d.f, d.q, d.l2, d.l1, d.m1.profile)
    out = {"lambda_f3_f1": a, "lambda_f_f3": b, "majorant": rhs}
    if d.m1.kind is ProfileKind.FEJER:
        out["majorant_oracle"] = hat_difference_energy_oracle(d.f, d.q, d.l2, d.l1)
    out["check"] = check_le("max|Lambda(f3,.)| <= majorant + 1e-6 N", max(abs(a), abs(b)), rhs + 1e-6 * d.n_ambient)
    return out


def error_term_lambda(d: Decomposition, params: WeylParams) -> float:
    """``|Lambda_q(f2, f1) + Lambda_q(f, f2)|`` by direct summation."""
    if params.q != d.q:
        raise ValueError(f"params.q = {params.q} must equal q_eta = {d.q}")
    a = lambda_direct(d.f2, d.f1, params, retain_per_t=False).value
    b = lambda_direct(d.f, d.f2, params, retain_per_t=False).value
    return abs(a + b)


def default_error_grid(mu: float, L: float) -> int:
    g = int(max(10 * mu * mu, 10 * L * L, 10**6))
    return g + (g % 2)


def error_term_sup(
    eta,
    eta_prime,
    params: WeylParams,
    profile=ProfileKind.FEJER,
    grid: int | None = None,
    refinement_tol: float = 0.10,
) -> float:
    """Grid sup of ``|1 - psihat_{q', L2'}(alpha)| |S_{lam,mu,q}(alpha)|``.

    ``q' = q_{eta'}`` and ``L2' = eta' mu``.  The even-indexed half of the
    grid is compared with the full grid; a relative change above
    ``refinement_tol`` raises.
    """
    eta, eta_p = _as_eta(eta), _as_eta(eta_prime)
    if not _materializable(eta_p.k):
        raise AnalyticOnlyError(f"q_eta' = lcm(1..{eta_p.k}) is beyond desk scale")
    prof = make_profile(profile) if not hasattr(profile, "psi") else profile
    l2 = eta_p.eta * params.mu
    m = DiscreteMollifier(prof, eta_p.q_eta, l2, truncation_radius=0)
    G = default_error_grid(params.mu, l2) if grid is None else int(grid)
    if G % 2:
        G += 1
    S = np.abs(weyl_sum_grid(params.lam, params.mu, G, params.q))
    k = np.arange(G, dtype=np.int64)
    q2 = m.q2
    # alpha = k/G; offset to the nearest a/q'^2 computed from integers
    num = (k * q2) % G
    num = np.where(2 * num > G, num - G, num)
    hat = prof.psi_tilde(l2 * l2 * num / (G * q2))
    vals = np.abs(1.0 - hat) * S
    full = float(vals.max())
    half = float(vals[::2].max())
    if full > 0 and abs(full - half) > refinement_tol * full:
        raise ValueError(f"grid too coarse: refinement changed sup from {half:.6g} to {full:.6g}")
    return full


@dataclass(frozen=True)
class StructuredEnergy:
    smooth: float
    smooth_oracle: float | None
    annulus: float
    r0: float
    n_ambient: int
    epsilon: float

    @property
    def smooth_target(self) -> float:
        return self.epsilon * self.n_ambient / 5

    @property
    def annulus_target(self) -> float:
        return self.epsilon * self.n_ambient / 10

    @property
    def implication_holds(self) -> bool:
        """smooth >= eps N/5 implies annulus >= eps N/10."""
        return self.smooth < self.smooth_target or self.annulus >= self.annulus_target

    @property
    def comparison(self) -> Check:
        return check_le("smooth <= annulus + (eps/10) r0", self.smooth, self.annulus + self.epsilon / 10 * self.r0, kind=ASYMPTOTIC)

    def to_json(self) -> dict:
        return {
            "smooth": self.smooth,
            "smooth_oracle": self.smooth_oracle,
            "annulus": self.annulus,
            "r0": self.r0,
            "smooth_target": self.smooth_target,
            "annulus_target": self.annulus_target,
            "implication_holds": self.implication_holds,
            "comparison": self.comparison.to_json(),
        }


def structured_energy(a: IndicatorSet, regime: EpsilonRegime, eta, lam: int, mu: int) -> StructuredEnergy:
    """The smooth-weight energy and the hard annulus energy of ``1_A``."""
    eta = _as_eta(eta)
    q = eta.q_eta
    if q * q > MAX_ARC_CENTERS:
        raise AnalyticOnlyError(f"analytic-only regime: q_eta^2 = {q * q} arc centres")
    f = a.indicator()
    l1, l2 = lam / eta.eta, eta.eta * mu
    if l2 * l2 <= 2 * q * q:
        raise ValueError(f"periodization terms overlap: L2^2 = {l2 * l2:.6g} <= 2 q^2 = {2 * q * q}")
    smooth = hat_difference_energy(f, q, l2, l1)
    oracle = hat_difference_energy_oracle(f, q, l2, l1)
    omega = annuli(eta, lam, mu)
    ann = integrate_energy(f, omega)
    return StructuredEnergy(smooth, oracle, ann, float(len(a)), a.n_ambient, regime.epsilon)


# ---------------------------------------------------------------- dichotomy


@dataclass(frozen=True)
class DichotomyOutcome:
    branch: Branch
    threshold_used: float
    witness_t: int | None = None
    witness_count: int | None = None
    annulus_energy: float | None = None
    passed: bool = True
    strengthened_count: int = 0
    strengthened_target: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "branch": self.branch.value,
            "threshold_used": self.threshold_used,
            "witness_t": self.witness_t,
            "witness_count": self.witness_count,
            "annulus_energy": self.annulus_energy,
            "passed": self.passed,
            "strengthened_count": self.strengthened_count,
            "strengthened_target": self.strengthened_target,
            "diagnostics": self.diagnostics,
        }


def _random_threshold(a: IndicatorSet, epsilon: float) -> Fraction:
    """``(delta^2 - eps) N`` as an exact rational."""
    n = a.n_ambient
    return Fraction(len(a) ** 2, n) - Fraction(epsilon) * n


def dichotomy_preconditions(a: IndicatorSet, regime: EpsilonRegime, eta: EtaParams, lam: int, mu: int) -> list:
    n = a.n_ambient
    return [
        check_le("eps <= delta^2", regime.epsilon, a.density**2),
        check_le("1 <= mu <= lambda", mu, lam),
        check_le("lambda^2 <= N/4", lam * lam, n / 4),
        check_ge("mu >= mu_factor eta^-1 q", mu, regime.mu_factor * eta.q_eta / eta.eta),
        check_ge("N >= n_factor eta^-2 lambda^2", n, regime.n_factor * lam * lam / float(eta.eta_sq)),
    ]


def dichotomy_test(
    a: IndicatorSet,
    regime: EpsilonRegime,
    lam: int,
    mu: int,
    eta=None,
    strict: bool = True,
    energy: bool = False,
) -> DichotomyOutcome:
    """Random branch by scanning ``t in (lam, lam+mu]``, ``q | t``; else the annulus energy.

    With ``energy=True`` the annulus energy is computed even when a witness
    exists.
    """
    eta = regime.eta if eta is None else _as_eta(eta)
    pre = dichotomy_preconditions(a, regime, eta, lam, mu)
    if strict:
        for c in pre:
            if not c.holds:
                raise ValueError(f"precondition violated: {c.name} ({c.lhs:.6g} {c.relation} {c.rhs:.6g} fails)")
    q = eta.q_eta
    thr = _random_threshold(a, regime.epsilon)
    ts = WeylParams(lam, mu, q).admissible_t().tolist() if mu <= lam else []
    counts = {t: intersect_count(a, t) for t in ts}
    hits = [t for t in ts if counts[t] > thr]
    strength_target = regime.c_strength * regime.epsilon / q * mu
    diag = {
        "eta": eta.eta,
        "q": q,
        "lambda": lam,
        "mu": mu,
        "admissible_t": len(ts),
        "preconditions": [c.to_json() for c in pre],
        "counts": counts,
    }
    ann = None
    if energy or not hits:
        ann = integrate_energy(a.indicator(), annuli(eta, lam, mu))
    if hits:
        t = hits[0]
        return DichotomyOutcome(
            Branch.RANDOM, float(thr), t, counts[t], ann, True, len(hits), strength_target, diag,
        )
    target = regime.epsilon * a.n_ambient / 10
    diag["energy_target"] = target
    return DichotomyOutcome(
        Branch.STRUCTURED, float(thr), None, None, ann, ann >= target, 0, strength_target, diag,
    )


def scale_chain(eta: EtaParams, q: int, mu_factor: float, n: int, n_factor: float, j_cap: int) -> list:
    """``lam_1 = ceil(mu_factor q / eta)``, ``lam_{j+1} = ceil(lam_j / eta^2)`` while the ambient bounds allow."""
    lam = math.ceil(Fraction(mu_factor) * q / Fraction(eta.eta))
    out = []
    while len(out) < j_cap:
        if 4 * n_factor * lam * lam > n or n_factor * lam * lam / eta.eta_sq > n:
            break
        out.append(lam)
        lam = math.ceil(lam / eta.eta_sq)
    return out


@dataclass
class ScaleIteration:
    scales: list
    energies: list
    outcomes: list
    witness: tuple | None
    witness_scale: int | None
    energy_sum: float
    ceiling: float
    disjoint: bool
    degenerate_epsilon: bool
    checks: list

    def to_json(self) -> dict:
        return {
            "scales": self.scales,
            "energies": self.energies,
            "witness": list(self.witness) if self.witness else None,
            "witness_scale": self.witness_scale,
            "energy_sum": self.energy_sum,
            "ceiling": self.ceiling,
            "disjoint": self.disjoint,
            "degenerate_epsilon": self.degenerate_epsilon,
            "outcomes": [o.to_json() for o in self.outcomes],
            "checks": [c.to_json() for c in self.checks],
        }


def scale_iteration(
    a: IndicatorSet,
    regime: EpsilonRegime,
    j_max: int,
    eta=None,
    stop_at_witness: bool = True,
) -> ScaleIteration:
    """Run the dichotomy at scales ``lam_j`` (``mu_j = lam_j``) and check the Plancherel ceiling.

    When ``eps > delta^2`` every t is a witness; this is reported as
    ``degenerate_epsilon`` instead of raising.
    """
    eta = regime.eta if eta is None else _as_eta(eta)
    q = eta.q_eta
    j_cap = min(j_max, math.ceil(10 / regime.epsilon) + 1)
    scales = scale_chain(eta, q, regime.mu_factor, a.n_ambient, regime.n_factor, j_cap)
    if not scales:
        raise ValueError("N too small for one scale")
    degenerate = regime.epsilon > a.density**2
    omegas = [annuli(eta, lam, lam) for lam in scales]
    outcomes, energies = [], []
    witness = wscale = None
    for j, lam in enumerate(scales, start=1):
        out = dichotomy_test(a, regime, lam, lam, eta, strict=False, energy=not stop_at_witness)
        outcomes.append(out)
        if out.annulus_energy is not None:
            energies.append(out.annulus_energy)
        if out.branch is Branch.RANDOM and witness is None:
            witness, wscale = (out.witness_t, out.witness_count), j
            if stop_at_witness:
                break
    omegas = omegas[: len(outcomes)]
    overlaps = [
        omegas[i].overlap_measure(omegas[j]) for i in range(len(omegas)) for j in range(i + 1, len(omegas))
    ]
    disjoint = all(m == 0 for m in overlaps)
    total = math.fsum(energies)
    ceiling = float(len(a))
    checks = [
        Check("Omega_j pairwise disjoint (measure of overlaps)", float(sum(overlaps, 0)), "==", 0.0, disjoint),
        check_le("sum_j energy_j <= |A| + 1e-6", total, ceiling + 1e-6),
    ]
    if not checks[1].holds:
        raise AssertionError(f"Plancherel ceiling violated: {total} > {ceiling}")
    return ScaleIteration(scales[: len(outcomes)], energies, outcomes, witness, wscale, total, ceiling, disjoint, degenerate, checks)


# ---------------------------------------------------------------- eta selection


def _hat_pair(eta_a: EtaParams, eta_b: EtaParams, mu: float, prof):
    ma = DiscreteMollifier(prof, eta_a.q_eta, eta_a.eta * mu, truncation_radius=0)
    mb = DiscreteMollifier(prof, eta_b.q_eta, eta_b.eta * mu, truncation_radius=0)
    return ma, mb


def _pair_materializable(eta_a: EtaParams, eta_b: EtaParams, mu: float) -> bool:
    for e in (eta_a, eta_b):
        if not _materializable(e.k):
            return False
        if (e.eta * mu) ** 2 <= 2 * e.q_eta**2:
            return False
    return True


def telescoping_sup(etas, mu: float, profile=ProfileKind.FEJER) -> float:
    """``sup_alpha sum_j |psihat_{j+1}(alpha) - psihat_j(alpha)|`` over a materializable chain (FEJER breakpoints)."""
    prof = make_profile(profile)
    etas = [_as_eta(e) for e in etas]
    ms = []
    for e in etas:
        if not _pair_materializable(e, e, mu):
            raise AnalyticOnlyError(f"eta = {e.eta:.4g} not materializable at mu = {mu}")
        ms.append(DiscreteMollifier(prof, e.q_eta, e.eta * mu, truncation_radius=0))
    pts = []
    for m in ms:
        c = np.arange(m.q2) / m.q2
        w = 1.0 / (m.L * m.L)
        pts.extend([c, (c - w) % 1.0, (c + w) % 1.0])
    pts = np.unique(np.concatenate(pts))
    hats = [mollifier_hat(m, pts) for m in ms]
    tele = sum(np.abs(hats[i + 1] - hats[i]) for i in range(len(hats) - 1))
    return float(np.max(tele))


def eta_selection(
    epsilon: float,
    mu: float,
    lacunarity: float | None = None,
    calib: CalibrationConstants | None = None,
    eta_1: float | None = None,
    profile=ProfileKind.FEJER,
    analytic: bool = False,
    strict_lacunarity: bool = True,
) -> dict:
    """First j with ``||psihat_{j+1} - psihat_j||_inf <= eps/40`` along ``eta_j = eta_1 lac^(j-1)``.

    ``psihat_j`` is the FEJER train with ``q = q_{eta_j}`` and ``L = eta_j mu``.
    Pairs that cannot be materialized raise :class:`AnalyticOnlyError`,
    unless ``analytic=True``, in which case the pigeonhole worst case
    ``j = ceil(40 c2 / eps)`` is returned with ``scanned=False``.
    """
    if not (0 < epsilon <= 1):
        raise ValueError("epsilon must lie in (0, 1]")
    calib = calib or load_calibration()
    lac_max = epsilon / (40 * calib.c1)
    lac = lac_max if lacunarity is None else lacunarity
    if strict_lacunarity and lac > lac_max:
        raise ValueError(f"lacunarity {lac:.4g} exceeds eps/(40 c1) = {lac_max:.4g}")
    eta1 = epsilon / 100 if eta_1 is None else eta_1
    j_bound = math.ceil(40 * calib.c2 / epsilon)
    prof = make_profile(profile)
    sups = []

    def eta_j(j):
        return eta1 * lac ** (j - 1)

    def record(j, scanned):
        eta = eta_j(j)
        log_term = (1 / epsilon) * math.log(1 / epsilon)
        log_eta = math.log(eta1) + (j - 1) * math.log(lac)
        c_prime = -log_eta / log_term if log_term > 0 else None
        return {
            "eta": eta,
            "eta_prime": eta_j(j + 1),
            "j": j,
            "j_bound": j_bound,
            "scanned": scanned,
            "sups": sups,
            "c_prime_needed": c_prime,
            "lower_bound_holds": log_eta >= -calib.c_prime * log_term,
            "eta_much_less_than_eps": eta <= epsilon / 100,
        }

    for j in range(1, j_bound + 1):
        pair = [eta_j(j), eta_j(j + 1)]
        ok = all(e < 1 and _materializable(math.floor(1 / (e * e))) for e in pair)
        a, b = (EtaParams(pair[0]), EtaParams(pair[1])) if ok else (None, None)
        if not ok or not _pair_materializable(a, b, mu):
            if analytic:
                return record(j_bound, False)
            raise AnalyticOnlyError(
                f"eta_j = {eta_j(j):.3g}, eta_(j+1) = {eta_j(j + 1):.3g}: kernels not materializable at mu = {mu}"
            )
        ma, mb = _hat_pair(a, b, mu, prof)
        s = hat_difference_sup(ma, mb)
        sups.append(s)
        if s <= epsilon / 40:
            return record(j, True)
    raise ValueError(f"no j <= {j_bound} with sup <= eps/40 (miscalibrated c2?); sups = {sups}")
