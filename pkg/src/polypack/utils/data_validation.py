"""
Data Validation Utilities for packing records

This module audits stored packings: the declared density against the
radius, overlaps and containment of the centers, the density and
peripheral-count bounds, and the stored charge ledger.
"""

import logging
from datetime import datetime, timezone
from typing import Any, Dict

import numpy as np

from polypack.config import AUDIT_TOL
from polypack.exceptions import AuditFailure
from polypack.models.geometry import Convention, PolygonSpec, border_gaps, convention_scale, measures
from polypack.models.configuration import minimal_distance
from polypack.utils.bounds import base_to_outer, rho_upper
from polypack.utils.metrics import packing_fraction

# Set up logging
logger = logging.getLogger(__name__)

# Relative agreement required between the stored and recomputed density
RHO_TOL = 1e-14


class PackingAuditor:
    """Validates packing records for overlap, containment and density consistency."""

    def __init__(self, tol=AUDIT_TOL):
        """
        Initialize the auditor.

        Parameters:
        -----------
        tol : float
            Overlap and containment tolerance relative to r
        """
        self.tol = tol
        self.validation_errors = []
        self.validation_warnings = []

    def audit_record(self, record) -> Dict[str, Any]:
        """
        Comprehensive audit of one record.

        Returns:
            Dict containing errors, warnings and statistics
        """
        self.validation_errors = []
        self.validation_warnings = []
        results = {
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'sigma': record.sigma,
            'n': record.n,
            'errors': [],
            'warnings': [],
            'statistics': {},
        }

        try:
            results['statistics']['radius'] = self._validate_radius(record)
            results['statistics']['geometry'] = self._validate_geometry(record)
            results['statistics']['bounds'] = self._validate_bounds(record)
            results['statistics']['ledger'] = self._validate_ledger(record)
        except Exception as e:
            logger.error(f"Error during record audit: {e}")
            self.validation_errors.append(f"Audit process failed: {str(e)}")

        results['errors'] = self.validation_errors
        results['warnings'] = self.validation_warnings
        results['ok'] = not self.validation_errors
        return results

    def _validate_radius(self, record) -> Dict[str, Any]:
        """Declared radius and density against the convention-I radius."""
        stats = {'rho_recomputed': None, 'rho_relative_error': None}
        if not record.r_base > 0:
            self.validation_errors.append(f"Non-positive base radius: {record.r_base}")
            return stats

        expected_r = {
            Convention.I.value: record.r_base,
            Convention.II.value: base_to_outer(record.r_base, record.sigma),
            Convention.III.value: 0.5,
        }[record.convention]
        if abs(record.r - expected_r) > 1e-12 * expected_r:
            self.validation_errors.append(
                f"Radius {record.r!r} does not match convention {record.convention} (expected {expected_r!r})")

        rho = packing_fraction(record.n, record.r_base, record.sigma)
        error = abs(rho - record.rho) / rho
        stats['rho_recomputed'] = rho
        stats['rho_relative_error'] = error
        if error > RHO_TOL:
            self.validation_errors.append(f"Stored rho {record.rho!r} differs from recomputed {rho!r}")

        stored = (record.metrics or {}).get('rho')
        if stored is not None and abs(stored - record.rho) > RHO_TOL * rho:
            self.validation_warnings.append(f"Metrics rho {stored!r} differs from record rho {record.rho!r}")
        return stats

    def _validate_geometry(self, record) -> Dict[str, Any]:
        """Overlaps between disks and containment in the container."""
        scale = convention_scale(record.convention, record.sigma, record.r_base)
        points = np.asarray(record.centers, dtype=float).reshape(-1, 2) / scale
        r = record.r_base
        stats = {'d_min': minimal_distance(points), 'worst_border_gap': None, 'overlaps': 0, 'outside': 0}

        if len(points) >= 2:
            diff = points[:, None, :] - points[None, :, :]
            dist = np.hypot(diff[..., 0], diff[..., 1])
            iu = np.triu_indices(len(points), 1)
            overlaps = int(np.sum(dist[iu] < 2.0 * r * (1.0 - self.tol)))
            stats['overlaps'] = overlaps
            if overlaps:
                self.validation_errors.append(
                    f"{overlaps} overlapping pairs (d_min = {stats['d_min']!r}, 2r = {2.0 * r!r})")

        gaps = border_gaps(points, record.sigma).min(axis=1)
        stats['worst_border_gap'] = float(gaps.min()) if len(gaps) else None
        outside = int(np.sum(gaps < -self.tol * r))
        stats['outside'] = outside
        if outside:
            self.validation_errors.append(f"{outside} centers outside the inner polygon")
        return stats

    def _validate_bounds(self, record) -> Dict[str, Any]:
        """Density against the Oler bound and N_b against P(r)/(2r)."""
        stats = {'rho_upper': None, 'nb_bound': None}
        if record.n < 2:
            return stats
        bound = rho_upper(record.n, record.sigma)
        stats['rho_upper'] = bound
        if record.rho > bound + 1e-12:
            self.validation_errors.append(f"rho {record.rho!r} exceeds the Oler bound {bound!r}")

        m = measures(PolygonSpec(record.sigma), record.r_base)
        nb_bound = m.perimeter / (2.0 * record.r_base)
        stats['nb_bound'] = nb_bound
        border_count = (record.metrics or {}).get('border_count')
        if border_count is not None and border_count > nb_bound + 1e-9:
            self.validation_errors.append(f"N_b = {border_count} exceeds P(r)/(2r) = {nb_bound:.6f}")
        return stats

    def _validate_ledger(self, record) -> Dict[str, Any]:
        """Stored topological charges must add up to 6."""
        ledger = record.ledger_summary
        if not ledger:
            return {'internal_charge': None}
        charge = ledger['q_interior_sum'] + ledger['q_border_sum'] + ledger['q_vertex_sum']
        if charge != 6:
            self.validation_warnings.append(f"Stored ledger charge is {charge}, expected 6")
        n_v, n_e, n_f = ledger['euler_counts']
        if n_v - n_e + n_f != 2:
            self.validation_warnings.append(f"Stored Euler counts give {n_v - n_e + n_f}, expected 2")
        return {'internal_charge': charge}


def verify_record(record, tol=AUDIT_TOL):
    """
    Audit a record and raise when it fails.

    Raises:
    -------
    AuditFailure
        Carrying the audit report
    """
    report = PackingAuditor(tol).audit_record(record)
    if not report['ok']:
        raise AuditFailure('; '.join(report['errors']), report=report)
    if report['warnings']:
        logger.warning(f"Audit warnings for sigma={record.sigma}, n={record.n}: {report['warnings']}")
    return report


def audit_configuration(cfg, tol=AUDIT_TOL):
    """Audit an in-memory configuration without computing its metrics."""
    from polypack.models.record import PackingRecord
    record = PackingRecord.from_configuration(cfg, metrics={'rho': cfg.rho}, ledger={})
    return PackingAuditor(tol).audit_record(record)
