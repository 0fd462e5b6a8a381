import math

import numpy as np
import pytest
from scipy import integrate

from sqdiff.calibration import load_calibration
from sqdiff.counting import IndicatorSet, intersect_count, lambda_direct, lambda_fourier
from sqdiff.dichotomy import (
    AnalyticOnlyError,
    Branch,
    EpsilonRegime,
    decompose,
    dichotomy_test,
    error_term_lambda,
    error_term_sup,
    eta_selection,
    hat_difference_energy,
    hat_difference_energy_oracle,
    main_term,
    main_term_checks,
    majorant_checks,
    scale_chain,
    scale_iteration,
    structured_energy,
    telescoping_sup,
)
from sqdiff.fourier import IntegerFunction, fourier_eval
from sqdiff.mollifier import DiscreteMollifier, mollifier_hat
from sqdiff.weyl import EtaParams, WeylParams, annuli, weyl_sum_grid

ETA_SQRT2 = EtaParams.from_inverse_square(2)
ETA_HALF = EtaParams.from_inverse_square(4)


def random_set(n, density, seed):
    return IndicatorSet.from_mask(np.random.default_rng(seed).random(n) < density)


# ---------------------------------------------------------------- regime


def test_regime_analytic_flag_and_override():
    r = EpsilonRegime(0.1)
    assert r.analytic_only and r.eta_eps < 1e-8
    with pytest.raises(AnalyticOnlyError):
        r.eta
    r2 = EpsilonRegime(0.1, eta_override=0.5)
    assert r2.eta.q_eta == 12


def test_regime_validation():
    with pytest.raises(ValueError):
        EpsilonRegime(0.0)
    with pytest.raises(ValueError):
        EpsilonRegime(0.1, mu_factor=0)


def test_regime_from_calibration_echoes_constants():
    c = load_calibration()
    r = EpsilonRegime.from_calibration(0.2, c)
    assert r.c_eta == c.c_eta and r.c_strength == c.c_strength
    assert r.eta_eps == EtaParams.eta_epsilon(0.2, c.c_eta)


# ---------------------------------------------------------------- decomposition


def test_decompose_zero():
    d = decompose(IntegerFunction.zero(), ETA_SQRT2, 10, 8)
    assert len(d.f1) == len(d.f2) == len(d.f3) == 0


def test_decompose_identity_random():
    rng = np.random.default_rng(0)
    f = IntegerFunction(1, rng.random(4096))
    d = decompose(f, ETA_SQRT2, 10, 8)
    assert d.identity_error() < 1e-9
    assert d.mass_defect() <= d.mass_tolerance()


def test_decompose_constant_interior():
    N = 200_000
    f = IntegerFunction(1, np.full(N, 0.7))
    d = decompose(f, ETA_SQRT2, 20, 10)
    n = N // 2
    assert d.f1(n) == pytest.approx(0.7, abs=1e-3)
    assert abs(d.f2(n)) < 1e-3 and abs(d.f3(n)) < 1e-3


def test_decompose_errors():
    f = IntegerFunction(1, np.ones(100))
    with pytest.raises(ValueError, match="periodization terms overlap"):
        decompose(f, ETA_HALF, 16, 4)
    with pytest.raises(AnalyticOnlyError):
        decompose(f, EtaParams.from_inverse_square(10), 100, 100)
    with pytest.raises(ValueError, match="1 <= mu <= lambda"):
        decompose(f, ETA_SQRT2, 5, 10)


# ---------------------------------------------------------------- main term


def test_main_term_full_interval():
    N = 100_000
    f = IntegerFunction(1, np.ones(N))
    d = decompose(f, ETA_SQRT2, 20, 10, n_ambient=N)
    p = WeylParams(20, 10, 2)
    assert main_term(d, p, epsilon=0.1) >= (1 - 0.05) * N


def test_main_term_zero():
    d = decompose(IntegerFunction.zero(), ETA_SQRT2, 20, 10, n_ambient=1000)
    assert main_term(d, WeylParams(20, 10, 2)) == 0.0


def test_main_term_two_routes():
    rng = np.random.default_rng(2)
    f = IntegerFunction(1, (rng.random(3000) < 0.5).astype(float))
    d = decompose(f, ETA_SQRT2, 20, 10, pad=2000)
    p = WeylParams(20, 10, 2)
    assert main_term(d, p) == pytest.approx(lambda_fourier(d.f1, d.f1, p), rel=1e-8)


def test_main_term_precondition_errors():
    f = IntegerFunction(1, np.ones(1000))
    d = decompose(f, ETA_SQRT2, 20, 10)
    with pytest.raises(ValueError, match="must equal q_eta"):
        main_term(d, WeylParams(20, 10, 1))
    with pytest.raises(ValueError, match="lambda \\+ mu <= 2 eta L1 violated"):
        main_term(d, WeylParams(40, 20, 2))
    with pytest.raises(ValueError, match="N >= 100 L1"):
        main_term(d, WeylParams(20, 10, 2), epsilon=0.1)


def test_main_term_checks_named():
    f = IntegerFunction(1, np.ones(10_000))
    d = decompose(f, ETA_SQRT2, 20, 10)
    names = [c.name for c in main_term_checks(d, WeylParams(20, 10, 2), 0.1)]
    assert names[0].startswith("params.q") and any("c_flat" in n for n in names)


# ---------------------------------------------------------------- energies and majorant


def test_hat_difference_energy_matches_oracle_and_quadrature():
    rng = np.random.default_rng(3)
    f = IntegerFunction(1, rng.standard_normal(40))
    q, ls, ll = 2, 3.0, 9.0
    a = hat_difference_energy(f, q, ls, ll)
    b = hat_difference_energy_oracle(f, q, ls, ll)
    m1 = DiscreteMollifier.fejer(q, ls, truncation_radius=0)
    m2 = DiscreteMollifier.fejer(q, ll, truncation_radius=0)

    def g(x):
        return abs(fourier_eval(f, x)) ** 2 * abs(mollifier_hat(m1, x) - mollifier_hat(m2, x))

    brk = sorted({(c + s * w) % 1 for c in np.arange(4) / 4 for w in (0, 1 / ls**2, 1 / ll**2) for s in (-1, 1)})
    quad = integrate.quad(g, 0, 1, points=brk, limit=1000, epsabs=1e-11)[0]
    assert a == pytest.approx(b, rel=1e-10)
    assert a == pytest.approx(quad, rel=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_majorant_inequality(seed):
    f = IntegerFunction(1, (np.random.default_rng(seed).random(2000) < 0.5).astype(float))
    d = decompose(f, ETA_SQRT2, 10, 8)
    out = majorant_checks(d, WeylParams(10, 8, d.q))
    assert out["check"].holds
    assert out["majorant"] == pytest.approx(out["majorant_oracle"], rel=1e-10)


def test_triangle_bookkeeping():
    f = IntegerFunction(1, (np.random.default_rng(4).random(3000) < 0.4).astype(float))
    d = decompose(f, ETA_SQRT2, 10, 8)
    p = WeylParams(10, 8, 2)
    full = lambda_direct(d.f, d.f, p).value
    mt = lambda_direct(d.f1, d.f1, p).value
    e3 = abs(lambda_direct(d.f3, d.f1, p).value + lambda_direct(d.f, d.f3, p).value)
    assert e3 >= abs(full - mt) - error_term_lambda(d, p) - 1e-9


def test_error_term_lambda_transform_majorant():
    rng = np.random.default_rng(5)
    f = IntegerFunction(1, rng.random(300))
    d = decompose(f, ETA_SQRT2, 10, 8, pad=3000)
    p = WeylParams(10, 8, 2)
    lam21 = abs(lambda_direct(d.f2, d.f1, p).value)
    M = 1 << 16
    al = np.arange(M) / M
    m2 = DiscreteMollifier.fejer(2, d.l2, truncation_radius=0)
    rhs = np.mean(np.abs(fourier_eval(f, al)) ** 2 * np.abs(1 - mollifier_hat(m2, al)) * np.abs(weyl_sum_grid(10, 8, M, 2)))
    assert lam21 <= rhs + 1e-8 * max(1, f.l2sq())


def test_error_term_lambda_vanishes_when_f2_vanishes():
    d = decompose(IntegerFunction.zero(), ETA_SQRT2, 10, 8)
    assert error_term_lambda(d, WeylParams(10, 8, 2)) == 0.0


def test_error_term_sup_decreases_with_eta_prime():
    p = WeylParams(200, 200, 1)
    sups = [error_term_sup(0.9, ep, p) for ep in (0.9, 0.7, 0.5)]
    assert sups[0] > sups[1] > sups[2]
    assert sups[2] <= 2 * load_calibration().c1 * 0.5 / 0.9


def test_error_term_lambda_bounded_by_sup():
    f = IntegerFunction(1, (np.random.default_rng(6).random(20000) < 0.5).astype(float))
    d = decompose(f, ETA_SQRT2, 20, 10)
    p = WeylParams(20, 10, 2)
    sup = error_term_sup(d.eta, d.eta, p)
    assert error_term_lambda(d, p) <= 2 * sup * f.l2sq()


def test_error_term_sup_grid_refinement():
    p = WeylParams(200, 200, 1)
    coarse = error_term_sup(0.9, 0.7, p)
    fine = error_term_sup(0.9, 0.7, p, grid=2 * 10**6 + 2)
    assert abs(fine - coarse) <= 0.05 * fine


# ---------------------------------------------------------------- structured energy


def test_structured_energy_interval_small_and_matches_quadrature():
    N = 10**5
    a = IndicatorSet.full(N)
    e = structured_energy(a, EpsilonRegime(0.1), ETA_HALF, 36, 36)
    om = annuli(ETA_HALF, 36, 36).expanded()

    def dirichlet(x):
        s = np.sin(np.pi * x)
        return np.where(np.abs(s) < 1e-14, float(N * N), np.sin(np.pi * N * x) ** 2 / np.where(s == 0, 1, s) ** 2)

    quad = 0.0
    for lo, hi in om.intervals:
        lo, hi = float(lo), float(hi)
        n = max(2001, int((hi - lo) * N * 64) | 1)
        xs = np.linspace(lo, hi, n)
        quad += integrate.simpson(dirichlet(xs), x=xs)
    assert e.annulus == pytest.approx(quad, rel=1e-5)
    assert e.annulus < 0.01 * N
    assert e.smooth == pytest.approx(e.smooth_oracle, rel=1e-9)


def test_structured_energy_congruence_excluded_by_holes():
    N = 12000
    a = IndicatorSet.from_mask(np.arange(1, N + 1) % 6 == 0)
    e = structured_energy(a, EpsilonRegime(0.01), ETA_HALF, 36, 36)
    assert e.annulus < 0.25 * len(a)


def test_structured_energy_random_small():
    for seed in range(20):
        a = random_set(10**5, 0.3, seed)
        e = structured_energy(a, EpsilonRegime(0.05), ETA_HALF, 240, 240)
        assert e.annulus <= 0.05 * a.n_ambient
        assert e.implication_holds


def test_structured_energy_analytic_only():
    with pytest.raises(AnalyticOnlyError):
        structured_energy(IndicatorSet.full(100), EpsilonRegime(0.1), EtaParams.from_inverse_square(9), 10**5, 10**5)


# ---------------------------------------------------------------- dichotomy


def test_dichotomy_random_set():
    a = random_set(10**5, 0.3, 11)
    reg = EpsilonRegime(0.05, mu_factor=1.5, n_factor=1, eta_override=0.5)
    out = dichotomy_test(a, reg, 36, 36)
    assert out.branch is Branch.RANDOM
    assert out.witness_t % 12 == 0
    assert intersect_count(a, out.witness_t) == out.witness_count > out.threshold_used
    assert out.strengthened_count >= 2


def test_dichotomy_half_interval():
    N = 10**5
    a = IndicatorSet.from_members(N, np.arange(1, N // 2 + 1))
    reg = EpsilonRegime(0.01, mu_factor=1.5, n_factor=1, eta_override=0.5)
    out = dichotomy_test(a, reg, 36, 36)
    assert out.branch is Branch.RANDOM


def test_dichotomy_odd_numbers():
    N = 10**4
    a = IndicatorSet.from_mask(np.arange(1, N + 1) % 2 == 1)
    reg = EpsilonRegime(0.05, mu_factor=1.5, n_factor=1, eta_override=0.5)
    out = dichotomy_test(a, reg, 36, 36, strict=False)
    assert out.branch is Branch.RANDOM
    for t, c in out.diagnostics["counts"].items():
        assert c == N // 2 - (t * t) // 2


def test_dichotomy_structured_branch_reports_energy():
    a = IndicatorSet.from_mask(np.arange(1, 10**4 + 1) % 7 == 0)
    reg = EpsilonRegime(0.02, mu_factor=1.5, n_factor=1, eta_override=0.5)
    out = dichotomy_test(a, reg, 36, 36, strict=False)
    assert out.branch is Branch.STRUCTURED
    assert out.annulus_energy is not None
    assert out.passed == (out.annulus_energy >= 0.02 * 10**4 / 10)


def test_dichotomy_preconditions_named():
    a = random_set(10**4, 0.3, 0)
    reg = EpsilonRegime(0.05, eta_override=0.5)
    with pytest.raises(ValueError, match="precondition violated: mu >= mu_factor"):
        dichotomy_test(a, reg, 36, 36)


# ---------------------------------------------------------------- scale iteration


def test_scale_chain_growth():
    chain = scale_chain(ETA_HALF, 12, 1.5, 10**8, 1, 10)
    assert chain[0] == 36
    assert all(b == math.ceil(a * 4) for a, b in zip(chain, chain[1:]))


def test_scale_iteration_too_small():
    with pytest.raises(ValueError, match="N too small for one scale"):
        scale_iteration(random_set(1000, 0.5, 0), EpsilonRegime(0.1, eta_override=0.5), 5)


def test_scale_iteration_ceiling_and_disjointness():
    a = random_set(10**6, 0.3, 1)
    reg = EpsilonRegime(0.05, mu_factor=1.5, n_factor=1, eta_override=0.5)
    it = scale_iteration(a, reg, 5, stop_at_witness=False)
    assert len(it.scales) == 2 and it.disjoint
    assert it.energy_sum <= len(a) + 1e-6
    assert it.witness is not None and it.witness_scale == 1


def test_scale_iteration_multiples_of_12():
    N = 10**5
    a = IndicatorSet.from_mask(np.arange(1, N + 1) % 12 == 0)
    reg = EpsilonRegime(0.005, mu_factor=1.5, n_factor=1, eta_override=0.5)
    it = scale_iteration(a, reg, 5)
    t, c = it.witness
    assert t % 12 == 0 and intersect_count(a, t) == c


def test_scale_iteration_degenerate_epsilon_flag():
    a = random_set(10**5, 0.3, 2)
    it = scale_iteration(a, EpsilonRegime(0.1, mu_factor=1.5, n_factor=1, eta_override=0.5), 3)
    assert it.degenerate_epsilon


# ---------------------------------------------------------------- eta selection


def test_telescoping_sup_within_c2():
    chain = [EtaParams.from_inverse_square(k) for k in (2, 4, 8)]
    assert telescoping_sup(chain, 4000) <= load_calibration().c2


def test_eta_selection_loose_epsilon():
    rec = eta_selection(1.0, 4000, lacunarity=0.999, eta_1=0.9, strict_lacunarity=False)
    assert rec["j"] == 1 and rec["scanned"]


def test_eta_selection_analytic_fallback():
    rec = eta_selection(0.2, 1000, analytic=True)
    assert not rec["scanned"]
    assert rec["j"] == rec["j_bound"] >= 40 * load_calibration().c2 / 0.2
    with pytest.raises(AnalyticOnlyError):
        eta_selection(0.2, 1000)


def test_eta_selection_lacunarity_guard():
    with pytest.raises(ValueError, match="lacunarity"):
        eta_selection(0.2, 1000, lacunarity=0.5)


def test_error_term_sup_desk_example_substitute():
    # q_{0.05} = lcm(1..400) cannot be materialized; eta'^-2 = 6 is the smallest
    # scale whose kernel train does not overlap at mu = 840
    p = WeylParams(840, 840, 12)
    with pytest.raises(AnalyticOnlyError):
        error_term_sup(0.5, 0.05, p)
    c1 = load_calibration().c1
    for k in (4, 6):
        ep = EtaParams.from_inverse_square(k)
        assert error_term_sup(0.5, ep, p) <= 2 * c1 * ep.eta / 0.5
