import cmath
import math
import warnings
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqdiff.calibration import load_calibration
from sqdiff.weyl import (
    EmptySumWarning,
    EtaParams,
    NoMinorArcError,
    WeylParams,
    annuli,
    default_grid_size,
    lcm_up_to,
    major_arc_mask,
    major_arcs,
    minor_arc_sup,
    weyl_rescale_check,
    weyl_sum,
    weyl_sum_grid,
    weyl_sum_q,
)


def naive(lam, mu, alpha, q=1):
    ts = [t for t in range(int(math.floor(lam)) + 1, int(math.floor(lam + mu)) + 1) if t % q == 0]
    return q * sum(cmath.exp(2j * math.pi * t * t * alpha) for t in ts) / mu


def test_weyl_at_zero_is_one():
    assert weyl_sum(10, 5, 0.0) == 1.0
    assert weyl_sum(WeylParams(7, 3), 0.0) == 1.0


def test_weyl_parity_cancellation():
    assert abs(weyl_sum(2, 2, 0.5)) < 1e-15


def test_weyl_matches_extended_precision():
    mpmath.mp.dps = 40
    alpha = math.sqrt(2) - 1
    a = mpmath.mpf(alpha)
    want = sum(mpmath.expjpi(2 * t * t * a) for t in range(101, 151)) / 50
    got = weyl_sum(100, 50, alpha)
    assert abs(got - complex(want)) < 1e-12


def test_weyl_q_examples():
    assert weyl_sum_q(4, 4, 2, 0.0) == pytest.approx(1.0)
    assert weyl_sum_q(3, 3, 3, 0.0) == pytest.approx(1.0)


def test_weyl_q_empty_warns():
    with pytest.warns(EmptySumWarning):
        assert weyl_sum_q(5, 1, 4, 0.3) == 0


@given(st.integers(1, 40), st.integers(1, 40), st.floats(0, 1))
def test_weyl_normalized_and_matches_naive(lam, mu, alpha):
    s = weyl_sum(lam, mu, alpha)
    assert abs(s) <= 1 + 1e-12
    assert abs(s - naive(lam, mu, alpha)) < 1e-10


@given(st.integers(1, 200), st.integers(1, 200), st.floats(0, 1))
def test_shifted_form(lam, mu, alpha):
    alt = sum(cmath.exp(2j * math.pi * ((t * t + 2 * lam * t + lam * lam) * alpha % 1.0)) for t in range(1, mu + 1)) / mu
    assert abs(weyl_sum(lam, mu, alpha) - alt) < 1e-9


@given(st.integers(1, 6), st.integers(1, 20), st.integers(1, 20), st.floats(0, 1))
def test_rescaling_identity(q, a, b, alpha):
    lam, mu = q * max(a, b), q * min(a, b)
    assert weyl_rescale_check(lam, mu, q, alpha) < 1e-10


def test_rescaling_examples():
    rng = np.random.default_rng(1)
    assert weyl_rescale_check(10, 5, 1, 0.3) == 0.0
    assert max(weyl_rescale_check(12, 6, 3, a) for a in rng.random(20)) < 1e-10
    a = float(rng.random())
    direct = weyl_sum_q(60, 60, 6, a)
    assert abs(direct - weyl_sum(10, 10, (36 * Fraction(a)) % 1)) < 1e-12


def test_rescaling_requires_divisibility():
    with pytest.raises(ValueError, match="identity requires q\\|lambda and q\\|mu"):
        weyl_rescale_check(10, 5, 3, 0.1)


@pytest.mark.parametrize("q", [1, 2, 3])
def test_grid_matches_direct(q):
    G = 257
    got = weyl_sum_grid(30, 20, G, q)
    want = np.array([naive(30, 20, k / G, q) for k in range(G)])
    assert np.max(np.abs(got - want)) < 1e-10


@pytest.mark.parametrize("k,want", [(1, 1), (2, 2), (4, 12), (8, 840), (10, 2520)])
def test_lcm_examples(k, want):
    assert lcm_up_to(k) == want


@pytest.mark.parametrize("k", [30, 43, 100])
def test_lcm_prime_power_oracle(k):
    primes = [p for p in range(2, k + 1) if all(p % d for d in range(2, math.isqrt(p) + 1))]
    want = 1
    for p in primes:
        e = 1
        while p ** (e + 1) <= k:
            e += 1
        want *= p**e
    assert lcm_up_to(k) == want == math.lcm(*range(1, k + 1))
    assert all(want % d == 0 for d in range(1, k + 1))


def test_lcm_rejects_huge():
    with pytest.raises(ValueError, match="beyond desk scale"):
        lcm_up_to(10**6 + 1)


def test_eta_params_desk_values():
    assert EtaParams(0.5).q_eta == 12
    assert EtaParams(1 / math.sqrt(2)).q_eta == 2
    assert EtaParams(1 / math.sqrt(2)).eta_sq == Fraction(1, 2)
    assert EtaParams.from_inverse_square(8).q_eta == 840


def test_major_arcs_single_rational():
    e = EtaParams(0.99)
    arcs = major_arcs(e, 10)
    r = 1 / (e.eta**2 * 100)
    assert arcs.contains(0.0) and arcs.contains(r * 0.99) and not arcs.contains(0.5)


def test_major_arc_center_membership():
    assert major_arcs(EtaParams(0.5), 100).contains(1 / 9)


def test_major_arc_measure_matches_grid_scan():
    e = EtaParams(0.5)
    arcs = major_arcs(e, 100)
    G = 10**6
    mask = major_arc_mask(e, 100, G)
    assert abs(float(arcs.measure()) - mask.mean()) < 1e-4


def test_major_arc_mask_matches_brute_force():
    e = EtaParams(0.5)
    mu, G = 37, 5003
    r = 1 / (e.eta_sq * Fraction(mu) ** 2)
    want = np.zeros(G, dtype=bool)
    for k in range(G):
        x = Fraction(k, G)
        for q in range(1, 5):
            d = q * q
            a = round(x * d)
            if abs(x - Fraction(a, d)) <= r:
                want[k] = True
                break
    assert np.array_equal(major_arc_mask(e, mu, G), want)


def test_major_arcs_full_circle_is_degenerate():
    assert major_arcs(EtaParams(0.9), 1).degenerate


def test_annulus_membership():
    e = EtaParams(0.5)
    lam = mu = 64
    om = annuli(e, lam, mu)
    Q = e.q_eta**2
    mid = 0.5 * (float(e.eta_sq) / lam**2 + 1 / (float(e.eta_sq) * mu**2))
    for a in (0, 5, 143):
        assert not om.contains(a / Q)
        assert om.contains(a / Q + mid)
        assert om.contains(a / Q - mid)


def test_annuli_disjoint_chain():
    e = EtaParams(0.5)
    oms = [annuli(e, lam, lam) for lam in (64, 256, 1024)]
    for i in range(3):
        for j in range(i + 1, 3):
            assert oms[i].overlap_measure(oms[j]) == 0


def test_annulus_errors():
    with pytest.raises(ValueError, match="empty annulus"):
        annuli(EtaParams(0.9), 10, 100)
    with pytest.raises(ValueError, match="annulus arcs overlap"):
        annuli(EtaParams(0.5), 24, 24)


def test_minor_arc_sup_matches_direct_scan():
    e = EtaParams(0.4)
    lam = mu = 30
    G = 9001
    mask = major_arc_mask(e, mu, G)
    vals = [abs(weyl_sum(lam, mu, k / G)) for k in range(G) if not mask[k]]
    assert minor_arc_sup(lam, mu, e, G) == pytest.approx(max(vals), rel=1e-12)


def test_minor_arc_full_coverage_error():
    with pytest.raises(NoMinorArcError, match="no minor arc points"):
        minor_arc_sup(200, 200, EtaParams(0.1))


def test_perturbed_sum_bound():
    c1 = load_calibration().c1
    e = EtaParams(0.4)
    s = minor_arc_sup(200.5, 200.25, e)
    assert s <= 2 * c1 * e.eta


def test_default_grid_size():
    assert default_grid_size(100) == 10**6
    assert default_grid_size(1000) == 10**7
