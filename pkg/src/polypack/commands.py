"""
Command drivers for polypack

Each function implements one subcommand: it loads its inputs, calls the
engines and analysis helpers, and returns the payload the command line
writes out (a dict for JSON output, text for SVG, point lists and CSV).
"""

import json
import logging
import os
import sys

import pandas as pd

from polypack import config
from polypack.exceptions import RecordFormatError
from polypack.models.configuration import Configuration, convert_convention
from polypack.models.geometry import PolygonSpec, sample_points
from polypack.models.record import PackingRecord, RecordStore, format_points_text, parse_points_text
from polypack.utils.bounds import bounds_report, fit_asymptotics, fit_cell_fractions
from polypack.utils.data_validation import verify_record
from polypack.utils.metrics import compute_metrics, necklace_tour
from polypack.utils.rendering import render_svg
from polypack.utils.topology import voronoi_census

from packing_optimizer import PackingOptimizer, SolverParams
from packing_refiner import PackingRefiner

# Set up logging
logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ['sigma', 'N', 'rho', 'N_b', 'is_necklace', 'pentagon_fraction', 'hexagon_fraction']


def status(message):
    """Human-readable progress line on stderr."""
    print(message, file=sys.stderr)


def load_configuration(path, sigma=None, convention=None):
    """
    Read a configuration from a record JSON file or an 'index x y' point list.

    Point lists carry no container, so sigma is required for them; their
    coordinates are convention-I centers and the radius is d_min/2.
    convention, when given, only changes how the result is presented.
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise RecordFormatError(f"cannot read {path}: {e}") from e

    if text.lstrip().startswith('{'):
        cfg = PackingRecord.from_json(text).to_configuration()
    else:
        if sigma is None:
            raise RecordFormatError(f"{path} is a point list; pass --sigma")
        cfg = Configuration.from_points(sigma, parse_points_text(text))
    if convention and cfg.convention.value != convention:
        cfg = convert_convention(cfg, convention)
    return cfg


def _record(cfg, **provenance):
    return PackingRecord.from_configuration(cfg, provenance=provenance or None)


def _emit_record(record, out=None, store=None):
    """Write record to out (or return it) and offer it to the store."""
    if out:
        record.write(out)
        status(f"✅ Wrote {out}")
    if store:
        stored = RecordStore(store).submit(record)
        status(f"✅ Stored new best for sigma={record.sigma}, N={record.n}" if stored
               else f"⚠️ Store already holds a record at least as dense for sigma={record.sigma}, N={record.n}")
    return record.to_dict()


def solve(sigma, n, convention='I', restarts=None, seed=0, out=None, store=None, log=None):
    """Multi-restart annealing for n disks in a sigma-gon."""
    params = SolverParams(restarts=restarts or config.RESTARTS, seed=seed)
    spec = PolygonSpec(sigma, convention)
    status(f"Solving sigma={sigma}, N={n} with {params.restarts} restarts (seed {seed})")
    cfg = PackingOptimizer(params).multi_restart(spec, n, trace_path=log)
    status(f"✅ Best rho = {cfg.rho:.15f}")
    return _emit_record(_record(cfg), out, store)


def refine(path, method, seed=0, extra=0, sigma=None, out=None, store=None):
    """Shake, variance refinement or hole filling of a stored configuration."""
    cfg = load_configuration(path, sigma)
    refiner = PackingRefiner()
    if method == 'shake':
        result = refiner.shake(cfg, seed)
    elif method == 'variance':
        result = refiner.variance_refine(cfg)
    elif method == 'holes':
        result = refiner.fill_holes(cfg, seed, extra_disks=extra)
    else:
        raise ValueError(f"unknown refinement method {method!r}")
    status(f"✅ {method}: rho {cfg.rho:.15f} -> {result.rho:.15f} (N={result.n})")
    return _emit_record(_record(result, refined_by=method), out, store)


def analyze(path, sigma=None, tol=None):
    cfg = load_configuration(path, sigma)
    metrics = compute_metrics(cfg, contact_tol=tol if tol is not None else config.CONTACT_TOL)
    return metrics.to_dict()


def voronoi(path, sigma=None, tol=None, svg=None):
    """Charge ledger of the clipped Voronoi diagram, optionally drawn."""
    cfg = load_configuration(path, sigma)
    merge_tol = tol if tol is not None else config.MERGE_TOL
    _, ledger = voronoi_census(cfg, merge_tol=merge_tol, strict=False)
    if ledger.internal_charge != 6 or ledger.euler_characteristic != 2:
        status(f"⚠️ Charge ledger broken: internal charge {ledger.internal_charge}, "
               f"V - E + F = {ledger.euler_characteristic}")
    if svg:
        render_svg(cfg, show_voronoi=True, merge_tol=merge_tol, path=svg)
        status(f"✅ Wrote {svg}")
    payload = ledger.to_dict()
    payload['internal_charge'] = ledger.internal_charge
    payload['euler_characteristic'] = ledger.euler_characteristic
    return payload


def bounds(sigma, n, r=None):
    return bounds_report(n, sigma, r).to_dict()


def necklace(path, sigma=None, tol=None):
    cfg = load_configuration(path, sigma)
    report = necklace_tour(cfg, tol if tol is not None else config.NECKLACE_TOL)
    return {
        'n': cfg.n,
        'tour_length': report.tour_length,
        'necklace_excess': report.necklace_excess,
        'is_necklace': bool(report.is_necklace),
    }


def sample(sigma, n, seed=0):
    """n uniform points in the unit-circumradius sigma-gon as 'index x y' text."""
    PolygonSpec(sigma)
    return format_points_text(sample_points(n, sigma, seed))


def fit(path):
    """
    Asymptotic coefficients from a batch summary CSV.

    Returns CSV text with one 'coefficient,value' row per fitted constant;
    cell-fraction coefficients are included when the summary has them.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise RecordFormatError(f"cannot read {path}: {e}") from e

    rows = list(fit_asymptotics(frame)._asdict().items())
    fractions = frame.dropna(subset=['pentagon_fraction', 'hexagon_fraction']) \
        if {'pentagon_fraction', 'hexagon_fraction'} <= set(frame.columns) else None
    if fractions is not None and fractions['N'].nunique() >= 2:
        cells = fit_cell_fractions(fractions)
        rows += [(f'pentagon_c{k + 1}', value) for k, value in enumerate(cells['pentagon'])]
        rows += [(f'hexagon_c{k + 1}', value) for k, value in enumerate(cells['hexagon'])]
    return pd.DataFrame(rows, columns=['coefficient', 'value']).to_csv(index=False)


def render(path, sigma=None, convention=None, show_voronoi=False, svg=None):
    cfg = load_configuration(path, sigma, convention)
    return render_svg(cfg, show_voronoi=show_voronoi, path=svg)


def _summary_row(record):
    """Batch summary row, with Voronoi cell fractions when the ledger exists."""
    metrics = record.metrics or {}
    row = {
        'sigma': record.sigma,
        'N': record.n,
        'rho': record.rho,
        'N_b': metrics.get('border_count'),
        'is_necklace': metrics.get('is_necklace'),
        'pentagon_fraction': None,
        'hexagon_fraction': None,
    }
    ledger = record.ledger_summary
    if ledger:
        cells = {}
        for group in ('interior_cells', 'border_cells'):
            for sides, count in ledger[group].items():
                cells[int(sides)] = cells.get(int(sides), 0) + count
        row['pentagon_fraction'] = cells.get(5, 0) / record.n
        row['hexagon_fraction'] = cells.get(6, 0) / record.n
    return row


def batch(sigma_range=None, n_range=None, restarts=None, seed=0, store=None, out=None):
    """
    Sweep (sigma, N) over inclusive ranges into a record store.

    Returns the summary CSV text (one row per sweep point, columns usable
    by fit).
    """
    sigma_lo, sigma_hi = sigma_range or config.BATCH_SIGMA_RANGE
    n_lo, n_hi = n_range or config.BATCH_N_RANGE
    if sigma_lo < 3 or sigma_hi < sigma_lo or n_lo < 2 or n_hi < n_lo:
        raise ValueError(f"invalid sweep ranges sigma={sigma_range}, N={n_range}")
    record_store = RecordStore(store or config.STORE_ROOT)
    params = SolverParams(restarts=restarts or config.RESTARTS, seed=seed)
    optimizer = PackingOptimizer(params)

    rows = []
    for sigma in range(sigma_lo, sigma_hi + 1):
        for n in range(n_lo, n_hi + 1):
            cfg = optimizer.multi_restart(PolygonSpec(sigma), n)
            record = _record(cfg)
            record_store.submit(record)
            best = record_store.get(sigma, n) or record
            rows.append(_summary_row(best))
            status(f"✅ sigma={sigma}, N={n}: rho = {best.rho:.12f}")

    text = pd.DataFrame(rows, columns=SUMMARY_COLUMNS).to_csv(index=False)
    if out:
        with open(out, 'w', encoding='utf-8') as f:
            f.write(text)
        status(f"✅ Wrote {out}")
    return text


def verify(path, tol=None):
    """Audit a record file; raises AuditFailure on violation."""
    record = PackingRecord.read(path)
    report = verify_record(record, tol if tol is not None else config.AUDIT_TOL)
    status(f"✅ {os.path.basename(path)}: sigma={record.sigma}, N={record.n}, rho={record.rho:.15f} passes")
    return report


def to_json(payload):
    return json.dumps(payload, indent=2, default=float) + '\n'
