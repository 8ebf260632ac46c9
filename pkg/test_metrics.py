#!/usr/bin/env python3
"""
Tests for packing metrics: density, border and vertex occupation,
contacts and the necklace tour.
"""

import math
import os
import sys

import numpy as np
import pytest

# Add the src directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from packing_optimizer import SolverParams, multi_restart
from polypack.exceptions import OverlapError
from polypack.models.configuration import Configuration
from polypack.models.geometry import PolygonSpec, polygon_vertices
from polypack.utils.metrics import (
    RHO_PLANE, compute_metrics, contact_counts, contact_pairs, contact_statistics,
    necklace_tour, packing_fraction, shortest_tour, varsigma,
)


def hexagon_seven():
    """Triangular-lattice packing of 7 disks in the hexagon (r = 1/2)."""
    points = np.vstack([[0.0, 0.0], polygon_vertices(6)])
    return Configuration.from_points(6, points)


def square_lattice_nine():
    """3 x 3 square lattice filling the square, which has a vertex at angle 0."""
    e1, e2 = np.array([0.5, 0.5]), np.array([-0.5, 0.5])
    points = [i * e1 + j * e2 for i in (-1, 0, 1) for j in (-1, 0, 1)]
    return Configuration.from_points(4, points)


def test_packing_fraction_closed_form():
    # the plane-density radius reproduces pi/sqrt(12) exactly
    for sigma in range(3, 17):
        for n in (2, 10, 100, 10000):
            r = varsigma(n, sigma)
            assert packing_fraction(n, r, sigma) == pytest.approx(RHO_PLANE, rel=1e-12)


def test_hexagon_seven_metrics():
    cfg = hexagon_seven()
    assert cfg.r == pytest.approx(0.5, abs=1e-12)
    metrics = compute_metrics(cfg)
    assert metrics.rho == pytest.approx(packing_fraction(7, 0.5, 6), rel=1e-12)
    assert metrics.rho == pytest.approx(0.8505106, abs=1e-6)
    assert metrics.border_count == 6
    assert metrics.border_fraction == pytest.approx(0.5, abs=1e-12)
    assert metrics.vertex_count == 6
    assert metrics.vertex_occupancy == pytest.approx(1.0)
    assert metrics.rattler_count == 0
    assert metrics.is_necklace
    assert abs(metrics.necklace_excess) <= 1e-10
    assert 0.0 < metrics.efficiency < 1.0


def test_contact_counts_hexagon_seven():
    cfg = hexagon_seven()
    counts = contact_counts(cfg.points, 6, cfg.r, 1e-9)
    # center touches the six ring disks; each ring disk two neighbours, the center and two edges
    assert counts.tolist() == [6, 5, 5, 5, 5, 5, 5]
    assert len(contact_pairs(cfg.points, cfg.r, 1e-9)) == 12


def test_contact_statistics_of_exact_lattice():
    stats = contact_statistics(hexagon_seven())
    assert stats['pair_count'] == 12
    assert stats['mean_d2'] == pytest.approx(1.0, abs=1e-12)
    assert stats['variance'] < 1e-20


def test_square_lattice_is_not_a_necklace():
    cfg = square_lattice_nine()
    report = necklace_tour(cfg)
    # an odd bipartite lattice needs one diagonal step
    expected = (8.0 + math.sqrt(2.0)) / 9.0 - 1.0
    assert not report.is_necklace
    assert report.necklace_excess == pytest.approx(expected, abs=1e-9)


def test_small_pentagon_packings_are_necklaces():
    for n in range(2, 7):
        cfg = multi_restart(PolygonSpec(5), n, SolverParams(restarts=20, seed=0, threads=1))
        report = necklace_tour(cfg)
        # N = 6 is the first pentagon optimum without a closed contact tour
        assert report.is_necklace == (n <= 5), (n, report.necklace_excess)


def test_contact_cycle_search_beyond_exact_limit():
    hexagon = necklace_tour(hexagon_seven(), exact_limit=4)
    assert hexagon.is_necklace
    assert hexagon.tour_length == pytest.approx(7.0, abs=1e-9)

    lattice = necklace_tour(square_lattice_nine(), exact_limit=4)
    assert not lattice.is_necklace
    assert lattice.necklace_excess > 0.0


def test_shortest_tour_of_a_square():
    length, tour = shortest_tour(polygon_vertices(4))
    assert length == pytest.approx(4.0 * math.sqrt(2.0))
    assert sorted(tour) == [0, 1, 2, 3]


def test_two_disks_on_the_diagonal():
    cfg = Configuration.from_points(4, [[1.0, 0.0], [-1.0, 0.0]])
    metrics = compute_metrics(cfg)
    assert cfg.r == pytest.approx(1.0)
    assert metrics.rho == pytest.approx(2.0 * math.pi / (4.0 * (1.0 + math.cos(math.pi / 4)) ** 2))
    assert metrics.vertex_count == 2
    assert metrics.is_necklace


def test_overlap_detection():
    cfg = hexagon_seven().replace(r=0.6)
    with pytest.raises(OverlapError):
        compute_metrics(cfg)


def test_rattler_is_counted():
    # one disk far from the others and from the border
    cfg = Configuration.from_points(4, [[1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]], r=0.3)
    metrics = compute_metrics(cfg)
    assert metrics.rattler_count == 1
    assert metrics.border_count == 2


def test_single_disk_metrics():
    cfg = Configuration.from_points(5, [[0.0, 0.0]], r=0.2)
    metrics = compute_metrics(cfg)
    assert metrics.rho == pytest.approx(packing_fraction(1, 0.2, 5))
    assert not metrics.is_necklace
    with pytest.raises(ValueError):
        necklace_tour(cfg)


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
