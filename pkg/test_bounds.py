#!/usr/bin/env python3
"""
Tests for the closed-form density bounds and the asymptotic fits.
"""

import math
import os
import sys

import numpy as np
import pandas as pd
import pytest
from scipy.optimize import brentq

# Add the src directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from polypack.utils.bounds import (
    GROEMER_KAPPA, GROEMER_LAMBDA, base_to_outer, bounds_report, fit_asymptotics,
    fit_cell_fractions, nb_upper_asym, oler_capacity, oler_radius, oler_radius_asym,
    outer_to_base, rho_upper, rho_upper_asym,
)
from polypack.utils.metrics import RHO_PLANE, packing_fraction


def test_groemer_constants():
    assert round(GROEMER_KAPPA, 6) == 0.133975
    assert round(GROEMER_LAMBDA, 4) == 1.1643


def test_oler_radius_saturates_capacity():
    for sigma in (3, 4, 5, 6, 9, 16):
        for n in (2, 7, 30, 200):
            r = oler_radius(n, sigma)
            assert oler_capacity(r, sigma) == pytest.approx(n, rel=1e-10)
            # independent root of the same equation
            root = brentq(lambda x: oler_capacity(x, sigma) - n, 1e-9, math.cos(math.pi / sigma) - 1e-12)
            assert r == pytest.approx(root, rel=1e-9)


def test_hexagon_seven_is_tight():
    report = bounds_report(7, 6)
    assert report.r_upper_base == pytest.approx(0.5, rel=1e-12)
    assert report.r_upper == pytest.approx(0.5 / (1.0 + 0.5 / math.cos(math.pi / 6)), rel=1e-12)
    assert report.oler_max_disks == pytest.approx(7.0, rel=1e-10)
    assert report.rho_upper == pytest.approx(packing_fraction(7, 0.5, 6), rel=1e-12)
    assert report.fejes_toth_ok
    assert report.groemer_margin > 0.0


def test_rho_upper_matches_oler_radius():
    # the density bound is the packing fraction at the Oler radius
    for sigma in (3, 5, 8, 12):
        for n in (2, 10, 57):
            r_base = outer_to_base(oler_radius(n, sigma), sigma)
            assert rho_upper(n, sigma) == pytest.approx(packing_fraction(n, r_base, sigma), rel=1e-12)


def test_rho_upper_triangle_ten():
    # direct evaluation of 4*pi*N / Delta for sigma = 3, N = 10
    st = 3.0 * math.tan(math.pi / 3)
    m = 8.0 * math.sqrt(3.0) * 9
    delta = (m + 2.0 * (5.0 - 2.0 * math.sqrt(3.0)) * st
             + 2.0 * (2.0 - math.sqrt(3.0)) * math.sqrt(st * (m + 3.0 * st)))
    assert rho_upper(10, 3) == pytest.approx(40.0 * math.pi / delta, rel=1e-14)


def test_asymptotic_bounds_converge():
    for sigma in (3, 6, 12):
        gaps = [abs(rho_upper(n, sigma) - rho_upper_asym(n, sigma)) for n in (100, 10000, 1000000)]
        assert gaps[0] > gaps[1] > gaps[2]
        # the expansion error falls roughly like 1/N
        assert gaps[1] / gaps[0] < 0.05
        assert rho_upper(10 ** 8, sigma) == pytest.approx(RHO_PLANE, abs=1e-3)
        assert oler_radius(10 ** 6, sigma) == pytest.approx(oler_radius_asym(10 ** 6, sigma), rel=1e-5)


def test_peripheral_bounds():
    report = bounds_report(100, 6)
    assert report.nb_upper > 0.0
    assert report.nb_upper_asym == pytest.approx(nb_upper_asym(100, 6))
    assert report.nb_upper == pytest.approx(report.nb_upper_asym, rel=0.25)


def test_radius_conversions_are_inverse():
    for sigma in (3, 7):
        assert outer_to_base(base_to_outer(0.2, sigma), sigma) == pytest.approx(0.2, rel=1e-14)
    with pytest.raises(ValueError):
        outer_to_base(math.cos(math.pi / 5), 5)


def test_report_at_measured_radius():
    # a radius well above the Oler radius cannot hold the disks
    report = bounds_report(20, 4, r=0.5)
    assert report.r_evaluated == 0.5
    assert report.oler_max_disks < 20
    assert not report.fejes_toth_ok


def test_bounds_reject_bad_input():
    with pytest.raises(ValueError):
        bounds_report(1, 6)
    with pytest.raises(ValueError):
        rho_upper(10, 2)
    with pytest.raises(ValueError):
        bounds_report(10, 6, r=-1.0)


def test_fit_asymptotics_recovers_coefficients():
    N = np.arange(10, 60, 5, dtype=float)
    frame = pd.DataFrame({
        'N': N,
        'rho': RHO_PLANE - 0.4 / np.sqrt(N) + 0.3 / N,
        'N_b': 2.1 * np.sqrt(N) - 1.5 + 0.7 / np.sqrt(N),
    })
    fit = fit_asymptotics(frame)
    assert fit.a1 == pytest.approx(-0.4, abs=1e-8)
    assert fit.a2 == pytest.approx(0.3, abs=1e-8)
    assert fit.b1 == pytest.approx(2.1, abs=1e-8)
    assert fit.b2 == pytest.approx(-1.5, abs=1e-8)
    assert fit.b3 == pytest.approx(0.7, abs=1e-8)


def test_fit_asymptotics_needs_distinct_n():
    frame = pd.DataFrame({'N': [10] * 6, 'rho': [0.8] * 6, 'N_b': [8] * 6})
    with pytest.raises(ValueError):
        fit_asymptotics(frame)
    with pytest.raises(ValueError):
        fit_asymptotics(frame.head(3))


def test_fit_cell_fractions():
    N = np.array([20.0, 40.0, 80.0, 160.0])
    records = [(n, 1.2 / math.sqrt(n) + 0.5 / n, 1.0 - 1.4 / math.sqrt(n) - 0.2 / n) for n in N]
    fit = fit_cell_fractions(records)
    assert fit['pentagon'] == pytest.approx((1.2, 0.5), abs=1e-8)
    assert fit['hexagon'] == pytest.approx((1.4, 0.2), abs=1e-8)


def main():
    """Run all tests without pytest."""
    tests = [obj for name, obj in sorted(globals().items()) if name.startswith('test_') and callable(obj)]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"✅ {test.__name__}")
        except Exception as e:
            failed += 1
            print(f"❌ {test.__name__}: {e}")
    print(f"\n{len(tests) - failed}/{len(tests)} passed")
    return failed == 0


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
