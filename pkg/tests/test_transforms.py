import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freeprobe.combinatorics import CumulantSeq, free_cumulants_from_moments
from freeprobe.errors import BranchError, DomainError, ModelError, PoleError
from freeprobe.transforms import (BOSON_EDGE, BranchPoint, PowerSeries,
                                  SpectralMeasure, blue_fn, boson_blue,
                                  boson_density, boson_g, boson_r, cauchy_g,
                                  cauchy_g_quadrature, g_at_edge, g_boundary,
                                  g_inverse, h_branch, h_inverse, r_eval,
                                  r_series, r_series_eval)

SEMI = SpectralMeasure.semicircle()


# ---------------------------------------------------------------------------
# spectral measure plumbing
# ---------------------------------------------------------------------------

def test_semicircle_mass_and_density():
    assert abs(SEMI.mass - 1.0) < 1e-12
    x = np.linspace(-2, 2, 101)
    assert np.allclose(SEMI.density(x), np.sqrt(4 - x ** 2) / (2 * np.pi))
    assert SEMI.density(2.5) == 0.0


def test_measure_rejects_bad_mass_and_negative_density():
    with pytest.raises(ModelError):
        SpectralMeasure(-2.0, 2.0, np.array([1.0]))
    with pytest.raises(ModelError):
        # mass balanced but strongly negative at the center
        SpectralMeasure(-2.0, 2.0, np.array([1 / (2 * np.pi), 0.0, 1.0]))


def test_measure_json_roundtrip_bit_exact():
    m2 = SpectralMeasure.from_json(SEMI.to_json())
    assert m2.a == SEMI.a and m2.b == SEMI.b
    assert np.array_equal(m2.density_coeffs, SEMI.density_coeffs)


def test_cdf_matches_quadrature(quartic_solution):
    m = quartic_solution.measure
    for x in (-1.2, -0.3, 0.4, 1.1):
        grid = np.linspace(m.a, x, 160001)
        num = np.trapezoid(m.density(grid), grid)
        assert abs(float(m.cdf(x)) - num) < 1e-7
    assert float(m.cdf(m.b + 1)) == 1.0 and float(m.cdf(m.a - 1)) == 0.0


def test_moments_match_direct_integration():
    # semicircle even moments are Catalan numbers
    assert np.allclose(SEMI.moments(8), [0, 1, 0, 2, 0, 5, 0, 14], atol=1e-12)


# ---------------------------------------------------------------------------
# Cauchy transform and branches
# ---------------------------------------------------------------------------

def test_semicircle_closed_forms():
    assert abs(cauchy_g(SEMI, 2j) - 1j * (1 - math.sqrt(2))) < 1e-14
    assert abs(cauchy_g(SEMI, 3.0) - (3 - math.sqrt(5)) / 2) < 1e-14


def test_pole_normalization_at_infinity():
    for z in (1e5, -3e4, 2e3 + 1e3j):
        assert abs(z * cauchy_g(SEMI, z) - 1.0) < 1e-5


def test_on_support_rejected():
    with pytest.raises(DomainError):
        cauchy_g(SEMI, 0.5)


def test_quadrature_oracle_agrees(quartic_solution):
    m = quartic_solution.measure
    rng = np.random.default_rng(7)
    for _ in range(25):
        z = complex(rng.uniform(-4, 4), rng.uniform(0.05, 3))
        a = cauchy_g(m, z)
        b = cauchy_g_quadrature(m, z)
        assert abs(a - b) < 1e-10 * max(1.0, abs(a))


def test_herglotz_and_conjugation(quartic_solution):
    m = quartic_solution.measure
    rng = np.random.default_rng(11)
    for _ in range(1000):
        z = complex(rng.uniform(-5, 5), rng.uniform(1e-4, 4))
        g = cauchy_g(m, z)
        assert g.imag < 0
        assert cauchy_g(m, z.conjugate()) == g.conjugate()


def test_boundary_value_gives_density(quartic_solution):
    m = quartic_solution.measure
    for x in (-1.0, 0.0, 0.9):
        nu = -g_boundary(m, x, side="upper").imag / np.pi
        assert abs(nu - float(m.density(x))) < 1e-12


def test_g_inverse_closed_forms():
    assert abs(g_inverse(SEMI, 1.0) - 2.0) < 1e-12
    assert abs(g_inverse(SEMI, (3 - math.sqrt(5)) / 2) - 3.0) < 1e-10
    for k in (1e-4, -2e-5):
        assert abs(k * g_inverse(SEMI, k) - 1.0) < 1e-3


def test_g_inverse_residual_and_errors():
    for k in (0.3, -0.77, 0.999):
        z0 = g_inverse(SEMI, k)
        assert abs(cauchy_g(SEMI, z0).real - k) < 1e-12
    with pytest.raises(PoleError):
        g_inverse(SEMI, 0.0)
    with pytest.raises(BranchError) as exc:
        g_inverse(SEMI, 1.5)
    assert exc.value.redirect == "h_inverse"


def test_h_branch_gue(gue_potential):
    assert abs(h_branch(gue_potential, SEMI, 3.0) - (3 + math.sqrt(5)) / 2) < 1e-12
    assert abs(h_branch(gue_potential, SEMI, 2.0) - 1.0) < 1e-12
    with pytest.raises(DomainError):
        h_branch(gue_potential, SEMI, 0.3)


def test_h_inverse_gue(gue_potential):
    assert abs(h_inverse(gue_potential, SEMI, (3 + math.sqrt(5)) / 2) - 3.0) < 1e-10
    assert abs(h_inverse(gue_potential, SEMI, -(3 + math.sqrt(5)) / 2) + 3.0) < 1e-10
    assert abs(h_inverse(gue_potential, SEMI, 1.0) - 2.0) < 1e-9
    with pytest.raises(BranchError) as exc:
        h_inverse(gue_potential, SEMI, 0.5)
    assert exc.value.redirect == "g_inverse"
    for k in (1.7, -2.4):
        x0 = h_inverse(gue_potential, SEMI, k)
        assert abs(h_branch(gue_potential, SEMI, x0) - k) < 1e-12


def test_branch_junction_continuity(quartic_potential, quartic_solution):
    m = quartic_solution.measure
    edges = BranchPoint.from_measure(m)
    for e in (edges.k_hi, edges.k_lo):
        k_in = e - math.copysign(1e-4, e)
        k_out = e + math.copysign(1e-4, e)
        assert abs(g_inverse(m, k_in)
                   - h_inverse(quartic_potential, m, k_out)) < 1e-6


def test_branch_point_invariant():
    edges = BranchPoint.from_measure(SEMI)
    assert edges.k_lo == -1.0 and edges.k_hi == 1.0
    with pytest.raises(ValueError):
        BranchPoint(0.5, 1.0)
    assert g_at_edge(SEMI, "upper") == 1.0


# ---------------------------------------------------------------------------
# R-transform
# ---------------------------------------------------------------------------

def test_r_eval_identity_on_gue(gue_potential):
    ks = np.concatenate([np.linspace(-3, -1.5e-3, 150),
                         np.linspace(1.5e-3, 3, 150)])
    err = max(abs(r_eval(gue_potential, SEMI, float(k)) - k) for k in ks)
    assert err < 1e-8


def test_r_eval_series_window(gue_potential):
    assert abs(r_eval(gue_potential, SEMI, 1e-4) - 1e-4) < 1e-10
    # leading series term is the first cumulant
    assert abs(r_eval(gue_potential, SEMI, 0.0) - SEMI.free_cumulants(2)[0]) < 1e-12


def test_blue_is_inverse_of_g(quartic_potential, quartic_solution):
    m = quartic_solution.measure
    for z in (1.8, 2.5, 4.0, -2.2, -6.0):
        k = cauchy_g(m, z).real
        assert abs(blue_fn(quartic_potential, m, k) - z) < 1e-8
    with pytest.raises(PoleError):
        blue_fn(quartic_potential, m, 0.0)


def test_blue_gue_value(gue_potential):
    assert abs(blue_fn(gue_potential, SEMI, 1.0) - 2.0) < 1e-10


def test_r_series_semicircle_and_shift():
    ps = PowerSeries((0, 1, 0, 2, 0, 5, 0, 14), 8)
    assert r_series(ps).coeffs == (0, 1, 0, 0, 0, 0, 0, 0)
    shifted = PowerSeries((Fraction(1, 2), Fraction(5, 4), 1, 2), 4)
    assert r_series(shifted).coeffs[0] == Fraction(1, 2)  # mean shifts c_1 only


def test_r_series_boson_pattern():
    ps = PowerSeries((0, 1, 0, 3, 0, 12), 6)
    assert r_series(ps).coeffs == (0, 1, 0, 1, 0, 1)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.fractions(min_value=-1, max_value=1), min_size=10, max_size=10))
def test_r_series_agrees_with_partition_recursion(ms):
    ps = PowerSeries(tuple(ms), 10)
    by_reversion = r_series(ps).coeffs
    by_partitions = free_cumulants_from_moments(list(ms), 10).values
    assert by_reversion == by_partitions


def test_power_series_validation():
    with pytest.raises(ValueError):
        PowerSeries((1, 2, 3), 2)
    with pytest.raises(ValueError):
        r_series(PowerSeries((1,), 1))
    ps = PowerSeries((Fraction(1), Fraction(2)), 2)
    assert ps.is_exact()
    assert not PowerSeries((1.0, 2.0), 2).is_exact()


# ---------------------------------------------------------------------------
# cube-root reference ensemble
# ---------------------------------------------------------------------------

def test_boson_asymptotics():
    g = boson_g(10.0)
    assert abs(g - 0.1) < 1e-2 and abs(10.0 * g - 1.0) < 0.02


def test_boson_composition_identity():
    rng = np.random.default_rng(3)
    for _ in range(60):
        r = rng.uniform(2.0, 20.0)
        phase = rng.uniform(0.15, math.pi - 0.15)
        z = r * cmath.exp(1j * phase)
        assert abs(boson_blue(boson_g(z)) - z) < 1e-10
    for z in np.linspace(2.7, 20.0, 30):
        assert abs(boson_blue(boson_g(float(z))) - z) < 1e-10


def test_boson_blue_vs_r():
    k = 0.5
    assert abs(boson_r(k) - 2.0 / 3.0) < 1e-15
    assert abs(boson_blue(k) - (1 / k + 2.0 / 3.0)) < 1e-15


def test_boson_density_cube_root_slope():
    xs = np.logspace(-4, -2, 25)
    dens = np.array([boson_density(float(x)) for x in xs])
    slope = np.polyfit(np.log(xs), np.log(dens), 1)[0]
    assert abs(slope + 1.0 / 3.0) < 0.02


def test_boson_domain_errors():
    with pytest.raises(DomainError):
        boson_g(0)
    with pytest.raises(DomainError):
        boson_g(1.0)  # real point inside the support
    with pytest.raises(DomainError):
        boson_density(BOSON_EDGE + 0.5)


def test_boson_herglotz_sign():
    for z in (2j, 1.0 + 0.5j, -3.0 + 2.0j):
        assert boson_g(z).imag < 0
        assert boson_g(np.conj(z)).imag > 0


def test_r_series_eval_truncation():
    assert r_series_eval([2.0, 3.0], 0.1) == 2.0 + 0.3


def test_g_inverse_monotone_each_side(quartic_solution):
    m = quartic_solution.measure
    edges = BranchPoint.from_measure(m)
    pos = [g_inverse(m, float(k)) for k in np.linspace(0.05, edges.k_hi, 40)]
    assert all(a > b for a, b in zip(pos, pos[1:]))  # decreasing toward b
    neg = [g_inverse(m, float(k)) for k in np.linspace(edges.k_lo, -0.05, 40)]
    assert all(a > b for a, b in zip(neg, neg[1:]))
