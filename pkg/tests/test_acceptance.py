"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`.  The stochastic criteria
use fixed seeds, so a passing suite is reproducible.
"""

import cmath
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from freeprobe.asymptotics import (omega_eval, omega_via_r_integral,
                                   smoothness_report)
from freeprobe.combinatorics import (CumulantSeq, CycleClass, bell_number,
                                     catalan_number, count_noncrossing,
                                     count_partitions,
                                     free_cumulants_from_moments,
                                     gamma_profile_estimate,
                                     moments_from_free_cumulants)
from freeprobe.coulomb import (avg_char_poly_check, dh_rank_one,
                               dh_rank_one_signed_log, fermionic_char,
                               mc_char_rank1)
from freeprobe.equilibrium import Potential, solve_equilibrium
from freeprobe.scattering import (ScatteringModel, matched_coupling,
                                  mc_s_correlation, sample_hamiltonians)
from freeprobe.transforms import (SpectralMeasure, boson_blue, boson_density,
                                  boson_g, r_eval)

GUE = Potential.gaussian()
QUARTIC = Potential.quartic(0.1)
ASYM = Potential.quartic(0.1, cubic=0.3)


def _report(num, message):
    print(f"\nPASS criterion {num}: {message}")


# ---------------------------------------------------------------------------
# 1. combinatorics exactness
# ---------------------------------------------------------------------------

def test_criterion_1_combinatorics_exactness():
    start = time.time()
    for n in range(1, 13):
        assert count_partitions(n) == bell_number(n)
        assert count_noncrossing(n) == catalan_number(n)
    rnd = random.Random(20240817)
    for trial in range(50):
        order = 10
        cums = tuple(Fraction(rnd.randint(-9, 9), rnd.randint(1, 7))
                     for _ in range(order))
        seq = CumulantSeq(order, cums)
        moments = [moments_from_free_cumulants(seq, n) for n in range(1, order + 1)]
        back = free_cumulants_from_moments(moments, order)
        assert back.values == seq.values, f"roundtrip broke on trial {trial}"
    wall = time.time() - start
    assert wall < 120.0
    _report(1, f"Bell/Catalan counts exact to n = 12, 50 exact rational "
               f"roundtrips at order 10 ({wall:.0f}s)")


# ---------------------------------------------------------------------------
# 2. GUE closed forms
# ---------------------------------------------------------------------------

def test_criterion_2_gue_closed_forms():
    sol = solve_equilibrium(GUE)
    m = sol.measure
    assert abs(m.a + 2.0) < 1e-8 and abs(m.b - 2.0) < 1e-8
    nodes = np.linspace(-2.0, 2.0, 513)
    density_err = float(np.max(np.abs(
        m.density(nodes) - np.sqrt(np.clip(4 - nodes ** 2, 0, None)) / (2 * np.pi))))
    assert density_err < 1e-8
    ks = np.concatenate([np.linspace(-3, -1.5e-3, 200),
                         np.linspace(1.5e-3, 3, 200)])
    r_err = max(abs(r_eval(GUE, m, float(k)) - k) for k in ks)
    assert r_err < 1e-8
    _report(2, f"endpoints -2,2 within 1e-8; density error {density_err:.1e}; "
               f"max |R(k) - k| = {r_err:.1e} on [-3, 3]")


# ---------------------------------------------------------------------------
# 3. cube-root reference ensemble
# ---------------------------------------------------------------------------

def test_criterion_3_boson_example():
    worst = 0.0
    for radius in np.linspace(2.0, 20.0, 19):
        for phase in (math.pi / 6, math.pi / 3, math.pi / 2, 2 * math.pi / 3):
            z = radius * cmath.exp(1j * phase)
            worst = max(worst, abs(boson_blue(boson_g(z)) - z))
    for z in np.linspace(2.7, 20.0, 19):
        worst = max(worst, abs(boson_blue(boson_g(float(z))) - z))
    assert worst < 1e-10
    xs = np.logspace(-4, -2, 25)
    dens = [boson_density(float(x)) for x in xs]
    slope = float(np.polyfit(np.log(xs), np.log(dens), 1)[0])
    assert abs(slope + 1.0 / 3.0) < 0.02
    _report(3, f"composition residual {worst:.1e} on |z| in [2, 20]; "
               f"density log-log slope {slope:.4f}")


# ---------------------------------------------------------------------------
# 4. branch smoothness
# ---------------------------------------------------------------------------

def test_criterion_4_branch_smoothness():
    details = []
    for name, pot in (("GUE", GUE), ("quartic", QUARTIC)):
        sol = solve_equilibrium(pot)
        rows = smoothness_report(sol, pot)
        for row in rows:
            assert row["value_gap"] < 1e-8, (name, row)
            assert row["deriv1_gap"] < 1e-6, (name, row)
        k_hi = rows[0]["k"]
        grid = np.concatenate([np.linspace(0.05, k_hi - 0.01, 12),
                               np.linspace(k_hi + 0.01, k_hi + 1.2, 8),
                               np.linspace(-k_hi - 1.2, -0.05, 10)])
        gap = max(abs(omega_eval(sol, pot, float(k)).value
                      - omega_via_r_integral(pot, sol, float(k))) for k in grid)
        assert gap < 1e-8, name
        details.append(f"{name}: value gap {rows[0]['value_gap']:.1e}, "
                       f"deriv gap {rows[0]['deriv1_gap']:.1e}, "
                       f"saddle-vs-integral {gap:.1e}")
    _report(4, "; ".join(details))


# ---------------------------------------------------------------------------
# 5. finite-N characteristic function converges to the R-integral
# ---------------------------------------------------------------------------

def test_criterion_5_mc_char_convergence():
    start = time.time()
    k = 0.5
    sol = solve_equilibrium(QUARTIC)
    target = omega_via_r_integral(QUARTIC, sol, k)
    results = {}
    for n_dim in (32, 64, 128):
        est, err = mc_char_rank1(QUARTIC, n_dim, k, samples=320, n_chains=32,
                                 seed=1300 + n_dim)
        assert err > 0.0
        results[n_dim] = (est, err)
    e64, s64 = results[64]
    e128, s128 = results[128]
    extrapolated = 2.0 * e128 - e64
    sigma = math.sqrt(4 * s128 ** 2 + s64 ** 2)
    assert abs(extrapolated - target) < 2e-2
    wall = time.time() - start
    assert wall < 1200.0
    pretty = ", ".join(f"N={n}: {v[0]:.5f}+-{v[1]:.5f}" for n, v in results.items())
    _report(5, f"{pretty}; 1/N extrapolation {extrapolated:.5f}+-{sigma:.5f} vs "
               f"R-integral {target:.5f} ({wall:.0f}s)")


# ---------------------------------------------------------------------------
# 6. deterministic anticommuting-sector transform negates the R-integral
# ---------------------------------------------------------------------------

def test_criterion_6_fermionic_negation():
    start = time.time()
    sol = solve_equilibrium(QUARTIC)
    details = []
    for k in (0.2, 0.4):
        target = -omega_via_r_integral(QUARTIC, sol, k)
        dev64 = abs(fermionic_char(QUARTIC, 64, k) - target)
        dev128 = abs(fermionic_char(QUARTIC, 128, k) - target)
        assert dev128 < 1e-2
        assert dev128 < dev64
        details.append(f"k={k}: dev(64)={dev64:.2e} -> dev(128)={dev128:.2e}")
    wall = time.time() - start
    assert wall < 300.0
    _report(6, "; ".join(details) + f" ({wall:.0f}s)")


# ---------------------------------------------------------------------------
# 7. localization-sum exactness
# ---------------------------------------------------------------------------

def test_criterion_7_dh_exactness():
    x2 = np.array([-0.7, 1.3])
    k = 1.1
    exact = (math.exp(k * x2[0]) - math.exp(k * x2[1])) / (k * (x2[0] - x2[1]))
    assert abs(dh_rank_one(x2, k) - exact) < 1e-10
    x3 = np.array([0.0, 1.0, 2.0])
    quad, _ = integrate.dblquad(
        lambda v, u: math.exp(x3[0] * u + x3[1] * v + x3[2] * (1 - u - v)),
        0, 1, 0, lambda u: 1 - u, epsabs=1e-13, epsrel=1e-13)
    dev3 = abs(dh_rank_one(x3, 1.0) - 2.0 * quad)
    assert dev3 < 1e-10
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(25):
        x = rng.normal(size=9) * 1.5
        kk = float(rng.uniform(-6, 6))
        s1, l1 = dh_rank_one_signed_log(x, kk)
        s2, l2 = dh_rank_one_signed_log(rng.permutation(x), kk)
        assert s1 == s2
        worst = max(worst, abs(l1 - l2) / max(1.0, abs(l1)))
    assert worst < 1e-12
    _report(7, f"3-point deviation from simplex quadrature {dev3:.1e}; "
               f"permutation symmetry to {worst:.1e}")


# ---------------------------------------------------------------------------
# 8. average characteristic polynomial equals the recurrence polynomial
# ---------------------------------------------------------------------------

def test_criterion_8_avg_char_poly():
    start = time.time()
    z4 = avg_char_poly_check(QUARTIC, 4, [3.0, 4.0, 5.0], samples=10 ** 6,
                             seed=88, n_chains=512)
    assert z4 < 3.0
    z8 = avg_char_poly_check(GUE, 8, [4.0], samples=10 ** 6, seed=99,
                             n_chains=512)
    assert z8 < 3.0
    wall = time.time() - start
    assert wall < 600.0
    _report(8, f"quartic N=4 worst z = {z4:.2f}, GUE N=8 worst z = {z8:.2f} "
               f"at 1e6 samples ({wall:.0f}s)")


# ---------------------------------------------------------------------------
# 9. large-N trend of the cumulant-tensor classes
# ---------------------------------------------------------------------------

def test_criterion_9_gamma_trends():
    start = time.time()
    sol = solve_equilibrium(ASYM)
    cums = sol.measure.free_cumulants(3)
    c2, c3 = float(cums[1]), float(cums[2])
    sample_counts = {8: 8000, 16: 8000, 32: 12000}
    est = {}
    for n_dim, count in sample_counts.items():
        hs = sample_hamiltonians(ASYM, n_dim, count, seed=9000 + n_dim)
        est[n_dim] = {
            ("irr", 2): gamma_profile_estimate(hs, 2, CycleClass(2, (2,)), patterns=256),
            ("split", 2): gamma_profile_estimate(hs, 2, CycleClass(2, (1, 1)), patterns=256),
            ("irr", 3): gamma_profile_estimate(hs, 3, CycleClass(3, (3,)), patterns=256),
            ("split", 3): gamma_profile_estimate(hs, 3, CycleClass(3, (1, 2)), patterns=256),
        }
    for n, limit in ((2, c2), (3, c3)):
        # the irreducible class converges to the free cumulant
        v32, s32 = est[32][("irr", n)]
        assert abs(v32 - limit) < 3 * s32 + 0.01, (n, v32, limit)
        for n_dim in (8, 16, 32):
            v, s = est[n_dim][("irr", n)]
            assert abs(v - limit) < 3 * s + 0.05
        # the split class decays like 1/N, monotonically within error bars
        devs = [(abs(est[n_dim][("split", n)][0]), est[n_dim][("split", n)][1])
                for n_dim in (8, 16, 32)]
        assert devs[0][0] > 3 * devs[0][1], f"n={n} split not resolved at N=8"
        for (va, sa), (vb, sb) in zip(devs, devs[1:]):
            assert vb < va + 2 * math.hypot(sa, sb), (n, devs)
        assert devs[2][0] < 0.5 * devs[0][0] + 3 * devs[2][1], (n, devs)
    wall = time.time() - start
    assert wall < 900.0
    rows = "; ".join(
        f"n={n} irr(32)={est[32][('irr', n)][0]:+.4f} (limit {l:+.4f}), "
        f"split |8|->|32| {abs(est[8][('split', n)][0]):.4f}->"
        f"{abs(est[32][('split', n)][0]):.4f}"
        for n, l in ((2, c2), (3, c3)))
    _report(9, rows + f" ({wall:.0f}s)")


# ---------------------------------------------------------------------------
# 10 + 11. scattering universality with matched coupling; unitarity throughout
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def universality_run():
    start = time.time()
    n_dim, n_ch = 200, 2
    eps_grid = list(np.linspace(0.0, 4.0, 12))
    model_g = ScatteringModel.diagonal_coupling(n_dim, n_ch, [1.0, 0.7], 0.0, GUE)
    model_q = ScatteringModel.diagonal_coupling(n_dim, n_ch, [1.0, 0.7], 0.0,
                                                QUARTIC)
    matched, scales, report = matched_coupling(model_g, model_q,
                                               samples=3000, seed=21)
    est_g, diag_g = mc_s_correlation(model_g, eps_grid, 10 ** 4, seed=101,
                                     n_chains=32)
    est_q, diag_q = mc_s_correlation(matched, eps_grid, 10 ** 4, seed=202,
                                     n_chains=32)
    detuned = model_q.with_scales([1.5, 1.5])
    est_d, diag_d = mc_s_correlation(detuned, eps_grid, 10 ** 4, seed=303,
                                     n_chains=32)
    return {"eps": eps_grid, "gue": est_g, "quartic": est_q, "detuned": est_d,
            "match_report": report, "scales": scales,
            "defects": [diag_g["unitarity_defect"], diag_q["unitarity_defect"],
                        diag_d["unitarity_defect"]],
            "samples": [diag_g["samples"], diag_q["samples"], diag_d["samples"]],
            "wall": time.time() - start}


def _zscores(a, b):
    return [abs(x.value - y.value) / math.hypot(x.stderr, y.stderr)
            for x, y in zip(a, b)]


def test_criterion_10_scattering_universality(universality_run):
    run = universality_run
    assert max(run["match_report"]["achieved_gap"]) < 0.01
    assert all(s >= 10 ** 4 for s in run["samples"])
    zs = _zscores(run["gue"], run["quartic"])
    assert max(zs) < 3.0, zs
    zs_neg = _zscores(run["gue"], run["detuned"])
    assert max(zs_neg) > 3.0
    assert run["wall"] < 3600.0
    _report(10, f"matched coupling gap {max(run['match_report']['achieved_gap']):.4f}; "
                f"universality max |z| = {max(zs):.2f} over 12 points; "
                f"negative control max |z| = {max(zs_neg):.1f} "
                f"({run['wall']:.0f}s)")


def test_criterion_11_unitarity(universality_run):
    worst = max(universality_run["defects"])
    assert worst < 1e-10
    _report(11, f"worst unitarity defect across all sampled S matrices "
                f"= {worst:.2e}")
