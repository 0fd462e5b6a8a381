"""Invariant suite behind ``sqdf verify``.

Every check keeps both sides.  Inputs are fixed seeded sets and the exact
vectors in ``data/vectors.json``.
"""

from __future__ import annotations

import json
import math
import time
from importlib import resources

import numpy as np

from . import counting, dichotomy, fourier, mollifier, weyl
from .calibration import CalibrationConstants, load_calibration
from .counting import IndicatorSet
from .weyl import WeylParams
from .report import Check, RunReport, check_eq, check_le

__all__ = ["run_suite", "load_vectors"]


def load_vectors() -> dict:
    return json.loads((resources.files("sqdiff") / "data" / "vectors.json").read_text())


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def _vector_checks(vec: dict) -> list:
    out = []
    for k, v in vec["lcm_up_to"].items():
        out.append(check_eq(f"lcm_up_to({k})", float(weyl.lcm_up_to(int(k))), float(int(v)), 0.0))
    for case in vec["weyl_sum"]:
        got = weyl.weyl_sum(case["lambda"], case["mu"], case["alpha"])
        want = complex(case["re"], case["im"])
        out.append(check_le(f"weyl_sum{(case['lambda'], case['mu'], case['alpha'])}", abs(got - want), 1e-12))
    for case in vec["intersect_count"]:
        a = IndicatorSet.from_members(case["n"], case["members"])
        out.append(check_eq(f"intersect_count(t={case['t']})", counting.intersect_count(a, case["t"]), case["count"], 0.0))
    for case in vec["varnavides_full"]:
        n = case["n"]
        out.append(check_eq(f"varnavides_sum(full {n})", counting.varnavides_sum(IndicatorSet.full(n)), case["value"], 0.0))
    return out


def run_suite(quick: bool = False, calib: CalibrationConstants | None = None, seed: int = 20240611) -> RunReport:
    calib = calib or load_calibration()
    rng = np.random.default_rng(seed)
    rep = RunReport("verify", {"quick": quick, "seed": seed}, calib.numbers())
    t0 = time.perf_counter()
    reps = 20 if quick else 200

    # Fourier identities
    worst_pl = worst_conv = 0.0
    for _ in range(reps):
        n = int(rng.integers(1, 300))
        f = fourier.IntegerFunction(int(rng.integers(-50, 50)), rng.standard_normal(n))
        g = fourier.IntegerFunction(int(rng.integers(-50, 50)), rng.standard_normal(int(rng.integers(1, 200))))
        worst_pl = max(worst_pl, abs(fourier.integrate_energy(f, fourier.ArcSystem.full()) - f.l2sq()) / (1 + f.l2sq()))
        al = rng.random(5)
        lhs = fourier.fourier_eval(fourier.convolve(f, g), al)
        rhs = fourier.fourier_eval(f, al) * fourier.fourier_eval(g, al)
        worst_conv = max(worst_conv, float(np.max(np.abs(lhs - rhs))) / (1 + f.l1() * g.l1()))
    rep.add(check_le("Plancherel relative error", worst_pl, 1e-10), check_le("convolution theorem error", worst_conv, 1e-9))

    # counting identity and Lambda identity
    worst_cnt = worst_lam = worst_resc = 0.0
    for _ in range(reps // 4 or 1):
        n = int(rng.integers(64, 1024))
        a = IndicatorSet.from_mask(rng.random(n) < rng.random())
        lam = int(rng.integers(1, math.isqrt(n // 4) + 1))
        mu = int(rng.integers(1, lam + 1))
        avg = counting.average_count(a, lam, mu)
        worst_cnt = max(worst_cnt, _rel(avg, counting.lambda_fourier(a, a, WeylParams(lam, mu, 1))))
        q = int(rng.integers(1, 4))
        g = fourier.IntegerFunction(1, rng.random(n))
        h = fourier.IntegerFunction(1, rng.random(n))
        p = WeylParams(lam, mu, q)
        worst_lam = max(worst_lam, _rel(counting.lambda_direct(g, h, p).value, counting.lambda_fourier(g, h, p)))
        qq = int(rng.integers(1, 6))
        worst_resc = max(worst_resc, weyl.weyl_rescale_check(qq * lam, qq * mu, qq, float(rng.random())))
    rep.add(
        check_le("average_count vs Fourier side", worst_cnt, 1e-8),
        check_le("lambda_direct vs lambda_fourier", worst_lam, 1e-8),
        check_le("rescaling identity", worst_resc, 1e-10),
    )

    # mollifier support, centres and mass
    m = mollifier.DiscreteMollifier.fejer(2, 20)
    centers = np.arange(m.q2) / m.q2
    far = rng.random(2000 if quick else 10**4)
    d = (far * m.q2 - np.round(far * m.q2)) / m.q2
    outside = far[np.abs(d) > 1 / m.L**2]
    rep.add(
        check_le("psihat outside M_{q,L}", float(np.max(mollifier.mollifier_hat(m, outside))), 0.0),
        check_eq("psihat at centres", float(np.min(mollifier.mollifier_hat(m, centers))), 1.0, 0.0),
        check_eq("FEJER mass (q=3, L=90)", mollifier.kernel_mass(mollifier.DiscreteMollifier.fejer(3, 90)), 1.0, 1e-6),
    )

    # decomposition, majorant, bookkeeping
    eta = weyl.EtaParams.from_inverse_square(2)
    n = 512 if quick else 2048
    f = fourier.IntegerFunction(1, (rng.random(n) < 0.5).astype(float))
    dec = dichotomy.decompose(f, eta, 10, 8)
    p = WeylParams(10, 8, dec.q)
    maj = dichotomy.majorant_checks(dec, p)
    rep.add(check_le("f - (f1+f2+f3)", dec.identity_error(), 1e-9), maj["check"])
    full = counting.lambda_direct(dec.f, dec.f, p).value
    mt = counting.lambda_direct(dec.f1, dec.f1, p).value
    e3 = abs(counting.lambda_direct(dec.f3, dec.f1, p).value + counting.lambda_direct(dec.f, dec.f3, p).value)
    e2 = dichotomy.error_term_lambda(dec, p)
    rep.add(Check("triangle bookkeeping", e3, ">=", abs(full - mt) - e2 - 1e-9, e3 >= abs(full - mt) - e2 - 1e-9))

    # scale iteration ceiling and disjointness
    a = IndicatorSet.from_mask(np.random.default_rng(seed).random(10**5 if quick else 10**6) < 0.3)
    reg = dichotomy.EpsilonRegime(0.05, mu_factor=1.5, n_factor=1, eta_override=0.5)
    it = dichotomy.scale_iteration(a, reg, j_max=3, stop_at_witness=False)
    rep.add(*it.checks)

    # congruence obstruction
    nn = 2000 if quick else 10**4
    bad = 0
    for dmod in range(1, 13):
        c = IndicatorSet.from_mask(np.arange(1, nn + 1) % dmod == 0)
        for t in range(1, math.isqrt(nn)):
            if (t * t) % dmod and counting.intersect_count(c, t):
                bad += 1
    rep.add(check_eq("congruence obstruction violations", bad, 0, 0))

    rep.add(*_vector_checks(load_vectors()))
    rep.timings["total_s"] = time.perf_counter() - t0
    rep.results = {"checks_run": len(rep.checks), "failures": [c.name for c in rep.checks if not c.holds]}
    return rep
