#!/usr/bin/env python3
"""
Tests for shake, contact-variance refinement and hole filling.
"""

import math
import os
import sys

import numpy as np
import pytest

# Add the src directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from packing_optimizer import SolverParams, multi_restart
from packing_refiner import PackingRefiner, RefineParams, contact_set, fill_holes, find_holes, shake, variance_refine
from polypack.exceptions import NoContactsError
from polypack.models.configuration import Configuration
from polypack.models.geometry import PolygonSpec, border_gaps, polygon_vertices, sample_points
from polypack.utils.metrics import contact_statistics, packing_fraction


def quick_params(**overrides):
    schedule = SolverParams(s_in=10.0, s_fin=200.0, kappa=2.0, alpha0=0.0, restarts=1,
                            max_iter_per_s=200, threads=1)
    values = dict(max_shakes=4, runs_per_cycle=2, shake_schedule=schedule)
    values.update(overrides)
    return RefineParams(**values)


def hexagon_seven(center=(0.0, 0.0)):
    return Configuration.from_points(6, np.vstack([center, polygon_vertices(6)]))


def hexagon_lattice(rings):
    """Triangular lattice filling the hexagon with spacing 1/rings."""
    e1 = np.array([1.0, 0.0]) / rings
    e2 = np.array([0.5, math.sqrt(3.0) / 2.0]) / rings
    return np.array([a * e1 + b * e2
                     for a in range(-rings, rings + 1)
                     for b in range(-rings, rings + 1)
                     if abs(a + b) <= rings])


def test_refine_params_validation():
    with pytest.raises(ValueError):
        RefineParams(eta=0.0)
    with pytest.raises(ValueError):
        RefineParams(shrink_factor=1.0)
    with pytest.raises(ValueError):
        RefineParams(step_scale=-1.0)


def test_contact_set_of_hexagon():
    contacts = contact_set(hexagon_seven(), 1e-3)
    assert len(contacts.pairs) == 12
    assert contacts.border_indices == {1, 2, 3, 4, 5, 6}
    assert contacts.free_indices == set()
    assert contacts.moving_indices == [0]
    assert contacts.sliding_indices == [1, 2, 3, 4, 5, 6]


def test_shake_never_lowers_density():
    cfg = Configuration.from_points(5, sample_points(6, 5, 3))
    result = shake(cfg, quick_params(), seed=1)
    assert result.rho >= cfg.rho
    assert result.n == cfg.n
    assert np.all(border_gaps(result.points, 5) >= -1e-12)


def test_variance_refine_recenters_hexagon():
    cfg = hexagon_seven(center=(5e-5, 0.0))
    result = variance_refine(cfg)
    assert result.rho > cfg.rho
    assert result.r > cfg.r
    assert result.r <= 0.5 + 1e-9
    history = result.provenance['variance_history']
    assert history[0]['variance'] > history[-1]['variance']
    assert all(b['rho'] > a['rho'] for a, b in zip(history, history[1:]))


def test_variance_refine_keeps_exact_lattice():
    cfg = hexagon_seven()
    result = PackingRefiner().variance_refine(cfg)
    assert result.rho == cfg.rho
    assert contact_statistics(result)['variance'] < 1e-20


def test_variance_refine_without_contacts():
    single = Configuration.from_points(6, [[0.0, 0.0]], r=0.2)
    with pytest.raises(NoContactsError):
        variance_refine(single, RefineParams(eta=1e-3))


def test_find_holes_locates_missing_center():
    ring = Configuration.from_points(6, polygon_vertices(6))
    holes = find_holes(ring)
    assert len(holes) == 1
    assert holes[0].x == pytest.approx(0.0, abs=1e-9)
    assert holes[0].y == pytest.approx(0.0, abs=1e-9)
    assert find_holes(hexagon_seven()) == []


def test_fill_holes_adds_disks():
    ring = Configuration.from_points(6, polygon_vertices(6))
    grown = fill_holes(ring, quick_params(), seed=0, extra_disks=1)
    assert grown.n == 7
    assert grown.rho >= packing_fraction(7, 0.5, 6) * (1.0 - 1e-9)
    assert grown.provenance['filled_holes'] == 1


def test_fill_holes_without_holes_returns_input():
    cfg = hexagon_seven()
    assert fill_holes(cfg, quick_params()) is cfg


def test_fill_holes_relocates_a_border_disk():
    points = hexagon_lattice(3)
    vacancy = np.array([1.0 / 3.0, 0.0])
    cfg = Configuration.from_points(6, points[np.hypot(*(points - vacancy).T) > 1e-9])
    assert cfg.n == 36

    holes = find_holes(cfg)
    assert len(holes) == 1
    assert holes[0].x == pytest.approx(vacancy[0], abs=1e-9)
    assert holes[0].y == pytest.approx(vacancy[1], abs=1e-9)

    chosen = PackingRefiner(quick_params())._pick_border_disks(cfg, 1, seed=0)
    assert len(chosen) == 1
    assert border_gaps(cfg.points[chosen], 6).min() <= 1e-12

    result = fill_holes(cfg, quick_params(), seed=0)
    assert result.n == cfg.n
    assert result.rho >= cfg.rho


def test_border_disks_are_found_on_solver_output():
    params = SolverParams(restarts=3, seed=0, s_in=10.0, s_fin=2000.0, kappa=2.0,
                          max_iter_per_s=300, threads=1)
    cfg = multi_restart(PolygonSpec(6), 7, params)
    chosen = PackingRefiner()._pick_border_disks(cfg, 2, seed=0)
    assert len(chosen) == 2
    assert np.all(border_gaps(cfg.points[chosen], 6).min(axis=1) <= 1e-6 * cfg.r)


def test_variance_refine_equalizes_annealed_contacts():
    # a raw anneal of 100 disks in the pentagon, stopped before the contact polish
    params = SolverParams(restarts=1, seed=3, polish=False, threads=1)
    cfg = multi_restart(PolygonSpec(5), 100, params)
    result = variance_refine(cfg)
    history = result.provenance['variance_history']
    assert result.rho > cfg.rho
    assert result.provenance['variance'] <= history[0]['variance'] * 1e-10
    assert np.all(border_gaps(result.points, 5) >= -1e-12)


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
