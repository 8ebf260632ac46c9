#!/usr/bin/env python3
"""
Tests for the annealed repulsion optimizer: energy gradient, schedule
handling and small-N solutions with known optima.
"""

import math
import os
import sys
import tempfile

import numpy as np
import pandas as pd
import pytest

# Add the src directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from packing_optimizer import (
    PackingOptimizer, SolverParams, anneal_run, contact_polish, derive_run_seed, energy, local_minimize,
    multi_restart,
)
from polypack.exceptions import DegenerateConfigurationError
from polypack.models.configuration import minimal_distance
from polypack.models.geometry import (
    ParamPoint, PolygonSpec, border_gaps, interior_points, polygon_vertices, sample_points,
)
from polypack.utils.metrics import packing_fraction

QUICK = dict(s_in=10.0, s_fin=2000.0, kappa=2.0, max_iter_per_s=300, threads=1)


def _random_params(rng, n, sigma):
    """(t, u) rows away from the center and from the polygon vertices."""
    t = rng.uniform(0.3, 1.2, n)
    sector = 2.0 * math.pi / sigma
    u = rng.integers(0, sigma, n) * sector + rng.uniform(0.1, sector - 0.1, n)
    return np.column_stack([t, u])


def _separated_params(rng, n, sigma, min_gap=0.1):
    """Random (t, u) rows whose centers are at least min_gap apart."""
    while True:
        params = _random_params(rng, n, sigma)
        if minimal_distance(interior_points(params[:, 0], params[:, 1], sigma)) >= min_gap:
            return params


def test_solver_params_validation():
    with pytest.raises(ValueError):
        SolverParams(kappa=1.0)
    with pytest.raises(ValueError):
        SolverParams(s_in=10.0, s_fin=5.0)
    with pytest.raises(ValueError):
        SolverParams(alpha0=0.5)
    with pytest.raises(ValueError):
        SolverParams(restarts=0)
    with pytest.raises(ValueError):
        SolverParams(polish_trust=0.5)


def test_schedule_ends_at_s_fin():
    params = SolverParams(s_in=10.0, s_fin=1000.0, kappa=1.8)
    stages = params.schedule()
    assert stages[0] == 10.0
    assert stages[-1] == 1000.0
    assert all(b > a for a, b in zip(stages, stages[1:]))
    assert params.alpha(10.0) == pytest.approx(params.alpha0)
    assert params.alpha(1000.0) == pytest.approx(params.alpha0 / 100.0)


def test_custom_alpha_schedule():
    params = SolverParams(alpha_schedule=lambda s: -1.0 / s)
    assert params.alpha(4.0) == -0.25
    assert params.to_dict()['custom_alpha_schedule'] is True
    with pytest.raises(ValueError):
        SolverParams(alpha_schedule=lambda s: 1.0).alpha(2.0)


def test_params_hash_tracks_settings():
    assert SolverParams(seed=1).params_hash() == SolverParams(seed=1).params_hash()
    assert SolverParams(seed=1).params_hash() != SolverParams(seed=2).params_hash()


def test_energy_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    h = 1e-6
    for _ in range(50):
        sigma = int(rng.integers(3, 10))
        n = int(rng.integers(2, 8))
        params = _random_params(rng, n, sigma)
        s = float(rng.uniform(1.0, 6.0))
        alpha = float(rng.uniform(-1.0, 0.0))
        state = energy(params, sigma, s, alpha, 0.05)
        numeric = np.zeros_like(params)
        for i in range(n):
            for k in range(2):
                step = np.zeros_like(params)
                step[i, k] = h
                plus = energy(params + step, sigma, s, alpha, 0.05, lam=state.lam).value
                minus = energy(params - step, sigma, s, alpha, 0.05, lam=state.lam).value
                numeric[i, k] = (plus - minus) / (2.0 * h)
        scale = max(np.max(np.abs(numeric)), 1e-12)
        assert np.max(np.abs(state.gradient - numeric)) / scale <= 1e-6


def test_energy_gradient_on_sharp_exponents():
    # h = 1e-6 would be dominated by truncation error at s = 1000
    rng = np.random.default_rng(11)
    h = 1e-8
    grid = [(sigma, n, s) for sigma in (3, 5, 8) for n in (4, 9) for s in (10.0, 1000.0)]
    for k in range(50):
        sigma, n, s = grid[k % len(grid)]
        params = _separated_params(rng, n, sigma)
        alpha = float(rng.uniform(-1.0, 0.0))
        state = energy(params, sigma, s, alpha, 0.05)
        numeric = np.zeros_like(params)
        for i in range(n):
            for c in range(2):
                step = np.zeros_like(params)
                step[i, c] = h
                plus = energy(params + step, sigma, s, alpha, 0.05, lam=state.lam).value
                minus = energy(params - step, sigma, s, alpha, 0.05, lam=state.lam).value
                numeric[i, c] = (plus - minus) / (2.0 * h)
        scale = max(np.max(np.abs(numeric)), 1e-12)
        assert np.max(np.abs(state.gradient - numeric)) / scale <= 1e-6, (sigma, n, s)


def test_energy_accepts_param_points():
    points = [ParamPoint(0.5, 0.3), ParamPoint(0.7, 2.0), ParamPoint(1.0, 4.0)]
    state = energy(points, 5, 2.0, -0.5, 0.05)
    assert state.gradient.shape == (3, 2)
    assert state.value > 0.0


def test_energy_rejects_coincident_points():
    with pytest.raises(DegenerateConfigurationError):
        energy([[0.5, 1.0], [0.5, 1.0]], 4, 2.0, -0.5, 0.05)
    with pytest.raises(ValueError):
        energy([[0.5, 1.0]], 4, 2.0, -0.5, 0.05)


def test_local_minimize_does_not_increase_energy():
    rng = np.random.default_rng(8)
    params = _random_params(rng, 6, 5)
    before = energy(params, 5, 4.0, -0.3, 0.05)
    after = local_minimize(params, 5, 4.0, -0.3, 0.05)
    assert after.shape == (6, 2)
    assert energy(after, 5, 4.0, -0.3, 0.05, lam=before.lam).value <= before.value * (1.0 + 1e-12)
    assert np.all((after[:, 0] >= 0.0) & (after[:, 0] <= math.pi / 2))


def test_derive_run_seed_is_deterministic():
    assert derive_run_seed(7, 3) == derive_run_seed(7, 3)
    assert derive_run_seed(7, 3) != derive_run_seed(7, 4)


def test_anneal_run_produces_valid_packing():
    params = SolverParams(restarts=1, **QUICK)
    cfg, trace = PackingOptimizer(params).anneal_run(PolygonSpec(5), 6, derive_run_seed(0, 0))
    assert cfg.n == 6
    assert cfg.r == pytest.approx(cfg.d_min() / 2.0)
    assert np.all(border_gaps(cfg.points, 5) >= -1e-12)
    assert len(trace) == len(params.schedule()) + 1
    assert trace[-1]['rho'] == pytest.approx(cfg.rho, rel=1e-9)
    assert trace[-1]['d_min'] >= trace[-2]['d_min'] * (1.0 - 1e-12)
    assert cfg.provenance['method'] == 'anneal'
    assert cfg.provenance['polish_gain'] >= -1e-12


def test_anneal_run_without_polish_keeps_one_row_per_stage():
    params = SolverParams(restarts=1, polish=False, **QUICK)
    cfg, trace = PackingOptimizer(params).anneal_run(PolygonSpec(5), 6, derive_run_seed(0, 0))
    assert len(trace) == len(params.schedule())
    assert 'polish_gain' not in cfg.provenance


def test_anneal_run_needs_two_disks():
    with pytest.raises(ValueError):
        anneal_run(PolygonSpec(4), 1, SolverParams(**QUICK), 0)


def test_contact_polish_moves_disks_into_the_corners():
    near_corners = np.array([[0.99990, 0.00004], [-0.99985, -0.00002]])
    polished = contact_polish(near_corners, 4)
    assert minimal_distance(polished) == pytest.approx(2.0, abs=1e-9)
    assert np.all(border_gaps(polished, 4) >= -1e-12)

    triangle = 0.999 * polygon_vertices(3)
    polished = contact_polish(triangle, 3)
    assert minimal_distance(polished) / 2.0 == pytest.approx(math.sqrt(3.0) / 2.0, abs=1e-9)


def test_contact_polish_never_shrinks_the_minimal_distance():
    rng = np.random.default_rng(21)
    for sigma in (3, 5, 7):
        points = sample_points(8, sigma, rng)
        polished = contact_polish(points, sigma)
        assert polished.shape == points.shape
        assert minimal_distance(polished) >= minimal_distance(points)
        assert np.all(border_gaps(polished, sigma) >= -1e-12)


def test_two_disks_in_square_reach_opposite_corners():
    params = SolverParams(restarts=4, seed=1, threads=1)
    cfg = multi_restart(PolygonSpec(4), 2, params)
    expected = packing_fraction(2, 1.0, 4)
    assert cfg.rho == pytest.approx(expected, abs=1e-6)


def test_every_two_disk_run_ends_in_the_corners():
    params = SolverParams(restarts=1, seed=1, threads=1)
    expected = packing_fraction(2, 1.0, 4)
    for k in range(4):
        cfg = anneal_run(PolygonSpec(4), 2, params, derive_run_seed(1, k), k)
        assert cfg.rho == pytest.approx(expected, abs=1e-9)
        assert np.all(border_gaps(cfg.points, 4).min(axis=1) <= 1e-12)


def test_three_disks_in_triangle_are_mutually_tangent():
    cfg = multi_restart(PolygonSpec(3), 3, SolverParams(restarts=10, seed=0, threads=1))
    assert cfg.r == pytest.approx(math.sqrt(3.0) / 2.0, abs=1e-6)


def test_small_square_packings_match_contact_solutions():
    exact = {
        3: math.sqrt(3.0) - 1.0,   # one corner, two disks on the far sides
        4: math.sqrt(2.0) / 2.0,   # the four corners
        5: 0.5,                    # corners and center
    }
    for n, r_exact in exact.items():
        cfg = multi_restart(PolygonSpec(4), n, SolverParams(restarts=20, seed=0, threads=1))
        assert cfg.rho == pytest.approx(packing_fraction(n, r_exact, 4), abs=1e-6), n


def test_hexagon_reaches_the_triangular_lattice():
    for n, r_exact, restarts in ((7, 0.5, 30), (19, 0.25, 40)):
        cfg = multi_restart(PolygonSpec(6), n, SolverParams(restarts=restarts, seed=0, threads=1))
        assert cfg.rho == pytest.approx(packing_fraction(n, r_exact, 6), abs=1e-6), n


def test_multi_restart_is_reproducible_and_logs_runs():
    params = SolverParams(restarts=3, seed=4, **QUICK)
    with tempfile.TemporaryDirectory() as tmp:
        log = os.path.join(tmp, 'runs.jsonl')
        first = PackingOptimizer(params).multi_restart(PolygonSpec(6), 5, trace_path=log)
        trace = pd.read_json(log, lines=True)
    second = multi_restart(PolygonSpec(6), 5, params)
    assert first.rho == second.rho
    assert np.array_equal(first.params, second.params)
    assert set(trace.columns) == {'run_index', 's', 'V', 'd_min', 'rho'}
    assert sorted(trace['run_index'].unique()) == [0, 1, 2]
    assert first.provenance['restarts'] == 3
    assert first.rho == pytest.approx(trace['rho'].groupby(trace['run_index']).last().max(), rel=1e-9)


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
