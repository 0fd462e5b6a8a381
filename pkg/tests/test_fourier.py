import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from sqdiff.fourier import (
    ArcSystem,
    IntegerFunction,
    autocorrelation,
    convolve,
    dft_grid,
    fourier_eval,
    integrate_energy,
    integrate_weighted_energy,
    to_torus,
)

values = st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=40)
starts = st.integers(-30, 30)


def naive_hat(f, alpha):
    return sum(v * cmath.exp(-2j * math.pi * n * alpha) for n, v in zip(f.indices, f.values))


def quad_energy(f, lo, hi):
    fn = lambda a: abs(naive_hat(f, a)) ** 2
    return integrate.quad(fn, lo, hi, limit=400, epsabs=1e-12, epsrel=1e-12)[0]


def test_point_mass_transform():
    f = IntegerFunction.point_mass(3, 2.0)
    assert fourier_eval(f, 0.25) == pytest.approx(2.0 * cmath.exp(-2j * math.pi * 0.75), abs=1e-15)


@given(starts, values, st.floats(0, 1, exclude_max=True))
def test_fourier_eval_matches_naive(start, vals, alpha):
    f = IntegerFunction(start, np.array(vals))
    assert abs(fourier_eval(f, alpha) - naive_hat(f, alpha)) <= 1e-9 * (1 + f.l1())


@given(starts, values)
def test_dft_grid_matches_eval(start, vals):
    f = IntegerFunction(start, np.array(vals))
    M = 64
    got = dft_grid(f, M)
    want = fourier_eval(f, np.arange(M) / M)
    assert np.max(np.abs(got - want)) <= 1e-9 * (1 + f.l1())


@given(starts, values, starts, values, st.floats(0, 1))
def test_convolution_theorem(s1, v1, s2, v2, alpha):
    f, g = IntegerFunction(s1, np.array(v1)), IntegerFunction(s2, np.array(v2))
    lhs = fourier_eval(convolve(f, g), alpha)
    rhs = fourier_eval(f, alpha) * fourier_eval(g, alpha)
    assert abs(lhs - rhs) <= 1e-9 * (1 + f.l1() * g.l1())


@given(starts, values)
def test_autocorrelation_is_even_with_l2_at_zero(start, vals):
    f = IntegerFunction(start, np.array(vals))
    r = autocorrelation(f)
    assert r.start == -(len(f) - 1)
    assert np.allclose(r.values, r.values[::-1])
    assert r(0) == pytest.approx(f.l2sq(), rel=1e-12, abs=1e-12)


@given(starts, values, st.lists(st.floats(0, 1), min_size=1, max_size=6))
def test_energy_over_partition_sums_to_l2(start, vals, cuts):
    f = IntegerFunction(start, np.array(vals))
    pts = sorted(set([0.0, 1.0] + cuts))
    total = sum(integrate_energy(f, ArcSystem(((a, b),))) for a, b in zip(pts, pts[1:]))
    assert total == pytest.approx(f.l2sq(), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("lo,hi", [(0.1, 0.35), (0.9, 1.05), (0.0, 0.001), (0.4, 0.4)])
def test_energy_matches_quadrature(lo, hi):
    rng = np.random.default_rng(7)
    f = IntegerFunction(-5, rng.standard_normal(25))
    got = integrate_energy(f, ArcSystem(((lo, hi),)))
    want = quad_energy(f, lo, hi)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-10)


def test_periodic_energy_matches_expanded():
    rng = np.random.default_rng(3)
    f = IntegerFunction(1, (rng.random(200) < 0.4).astype(float))
    arcs = ArcSystem(((Fraction(-1, 200), Fraction(1, 300)),), period=4)
    assert integrate_energy(f, arcs) == pytest.approx(integrate_energy(f, arcs.expanded()), rel=1e-10)


def test_weighted_energy_triangle_matches_quadrature():
    rng = np.random.default_rng(11)
    f = IntegerFunction(0, rng.standard_normal(15))
    pieces = [(-0.1, 0.0, 0.0, 1.0), (0.0, 0.1, 1.0, 0.0)]
    want = integrate.quad(lambda a: abs(naive_hat(f, a)) ** 2 * max(0.0, 1 - abs(a) / 0.1), -0.1, 0.1,
                          points=[0.0], limit=400, epsabs=1e-12)[0]
    assert integrate_weighted_energy(f, pieces) == pytest.approx(want, rel=1e-9)


def test_arc_system_normalizes_and_wraps():
    a = ArcSystem(((0.9, 1.1), (0.05, 0.2)))
    n = a.normalized()
    assert n.measure() == pytest.approx(0.3)
    assert n.contains(0.95) and n.contains(0.02) and n.contains(0.15) and not n.contains(0.5)


def test_arc_system_exact_intersection():
    a = ArcSystem(((Fraction(0), Fraction(1, 4)),))
    b = ArcSystem(((Fraction(1, 4), Fraction(1, 2)),))
    assert a.overlap_measure(b) == 0
    assert a.union(b).measure() == Fraction(1, 2)


def test_arc_system_json_round_trip():
    a = ArcSystem(((0.1, 0.2), (0.5, 0.7)))
    assert ArcSystem.from_json(a.to_json()).intervals == a.normalized().intervals


def test_full_torus_is_degenerate():
    assert ArcSystem.full().degenerate
    assert ArcSystem.full().measure() == 1


def test_reversed_interval_rejected():
    with pytest.raises(ValueError):
        ArcSystem(((0.3, 0.2),))


def test_to_torus_range():
    assert to_torus(-0.25) == 0.75
    assert to_torus(3.0) == 0.0
