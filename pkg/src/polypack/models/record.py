"""
Packing record model and best-known-record store.

A PackingRecord is the on-disk form of a configuration: centers and radius
in the chosen convention together with metrics, charge ledger and solver
provenance. Floats are written with Python's shortest round-trip repr,
which reproduces every double exactly (at most 17 significant digits).
"""

import json
import logging
import math
import os
import tempfile
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
import pandas as pd

from polypack.exceptions import LedgerViolationError, RecordFormatError, StoreConflictError
from polypack.models.configuration import Configuration
from polypack.models.geometry import Convention, convention_scale

try:
    import fcntl
except ImportError:  # Windows
    fcntl = None

# Set up logging
logger = logging.getLogger(__name__)

RECORD_FIELDS = (
    'sigma', 'n', 'convention', 'r', 'r_base', 'centers', 'rho',
    'metrics', 'ledger_summary', 'solver_provenance',
)

# Strictly larger rho needed to replace a stored record
REPLACE_MARGIN = 1e-12


@dataclass
class PackingRecord:
    """
    Serializable packing.

    Attributes:
    -----------
    r : float
        Disk radius in the record's convention (1/2 in convention III)
    r_base : float
        Disk radius in convention I, which fixes the record's scale
    centers : list of [x, y]
        Centers in the record's convention
    """

    sigma: int
    n: int
    convention: str
    r: float
    r_base: float
    centers: list
    rho: float
    metrics: dict = field(default_factory=dict)
    ledger_summary: dict = None
    solver_provenance: dict = field(default_factory=dict)

    @classmethod
    def from_configuration(cls, cfg, metrics=None, ledger=None, provenance=None):
        """
        Build a record, computing metrics and the charge ledger when not given.

        A configuration whose ledger cannot be built is stored without one.
        """
        # Imported here: the analysis helpers depend on the models package
        from polypack.utils.metrics import compute_metrics
        from polypack.utils.topology import voronoi_census

        if metrics is None:
            metrics = compute_metrics(cfg)
        if ledger is None and cfg.n >= 2:
            try:
                _, ledger = voronoi_census(cfg)
            except LedgerViolationError as e:
                logger.warning(f"⚠️ Ledger check failed for sigma={cfg.sigma}, n={cfg.n}: {e}")
                ledger = e.ledger

        tags = {k: v for k, v in cfg.provenance.items() if k != 'variance_history'}
        tags.update(provenance or {})
        tags.setdefault('timestamp', datetime.now(timezone.utc).isoformat())

        return cls(
            sigma=cfg.sigma,
            n=cfg.n,
            convention=cfg.convention.value,
            r=cfg.radius if cfg.convention != Convention.III else 0.5,
            r_base=cfg.r,
            centers=[[float(x), float(y)] for x, y in cfg.centers()],
            rho=cfg.rho,
            metrics=metrics.to_dict() if hasattr(metrics, 'to_dict') else dict(metrics),
            ledger_summary=ledger.to_dict() if hasattr(ledger, 'to_dict') else ledger,
            solver_provenance=_plain(tags),
        )

    def to_configuration(self):
        """Configuration with convention-I parameters recovered from the centers."""
        scale = convention_scale(self.convention, self.sigma, self.r_base)
        points = np.asarray(self.centers, dtype=float).reshape(-1, 2) / scale
        return Configuration.from_points(self.sigma, points, r=self.r_base,
                                         convention=self.convention,
                                         provenance=dict(self.solver_provenance))

    def to_dict(self):
        return {name: getattr(self, name) for name in RECORD_FIELDS}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + '\n'

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise RecordFormatError("record must be a JSON object")
        missing = [name for name in RECORD_FIELDS if name not in data]
        if missing:
            raise RecordFormatError(f"record is missing fields: {missing}")
        try:
            record = cls(**{name: data[name] for name in RECORD_FIELDS})
            Convention(record.convention)
            centers = np.asarray(record.centers, dtype=float)
        except (TypeError, ValueError) as e:
            raise RecordFormatError(f"malformed record: {e}") from e
        if centers.ndim != 2 or centers.shape[1] != 2 or len(centers) != record.n:
            raise RecordFormatError(f"record declares n={record.n} but holds {len(centers)} centers")
        if not np.all(np.isfinite(centers)):
            raise RecordFormatError("record centers must be finite")
        return record

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise RecordFormatError(f"invalid JSON: {e}") from e
        return cls.from_dict(data)

    def write(self, path):
        write_atomic(path, self.to_json())

    @classmethod
    def read(cls, path):
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return cls.from_json(f.read())
        except OSError as e:
            raise RecordFormatError(f"cannot read {path}: {e}") from e


def _plain(value):
    """Convert numpy scalars and containers to JSON-ready Python values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def write_atomic(path, text):
    """Write text to path through a temporary file and an atomic rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix='.json')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def format_points_text(centers):
    """Plain-text interchange: one 'index x y' line per center, 1-based."""
    return ''.join(f"{k} {x!r} {y!r}\n" for k, (x, y) in enumerate(np.asarray(centers, dtype=float).tolist(), start=1))


def parse_points_text(text):
    """Read 'index x y' lines (blank lines and '#' comments ignored) into an (n, 2) array."""
    rows = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#')[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise RecordFormatError(f"line {number}: expected 'index x y', got {line!r}")
        try:
            rows.append((int(parts[0]), float(parts[1]), float(parts[2])))
        except ValueError as e:
            raise RecordFormatError(f"line {number}: {e}") from e
    if not rows:
        raise RecordFormatError("no points found")
    rows.sort(key=lambda row: row[0])
    indices = [row[0] for row in rows]
    if len(set(indices)) != len(indices):
        raise RecordFormatError("duplicate point indices")
    points = np.array([[x, y] for _, x, y in rows])
    if not np.all(np.isfinite(points)):
        raise RecordFormatError("point coordinates must be finite")
    return points


class RecordStore:
    """
    Best-known records, one JSON file per (sigma, n).

    Layout: <root>/records/sigma_<sigma>/N_<n>.json plus <root>/index.csv.
    All writes go through submit(), which holds a thread lock and an
    exclusive flock on <root>/.store.lock while comparing densities, so
    concurrent batch processes sharing a store cannot lose the better
    record. Where flock is unavailable a store must have a single writer
    process.
    """

    _lock = threading.Lock()
    LOCK_NAME = '.store.lock'

    def __init__(self, root):
        self.root = os.path.abspath(root)

    @property
    def lock_path(self):
        return os.path.join(self.root, self.LOCK_NAME)

    @contextmanager
    def _store_lock(self):
        with self._lock:
            if fcntl is None:
                yield
                return
            os.makedirs(self.root, exist_ok=True)
            with open(self.lock_path, 'a') as handle:
                fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
                try:
                    yield
                finally:
                    fcntl.flock(handle.fileno(), fcntl.LOCK_UN)

    def path_for(self, sigma, n):
        return os.path.join(self.root, 'records', f'sigma_{int(sigma)}', f'N_{int(n)}.json')

    def get(self, sigma, n):
        path = self.path_for(sigma, n)
        if not os.path.exists(path):
            return None
        return PackingRecord.read(path)

    def submit(self, record):
        """
        Store record unless an equally dense one is already stored.

        Returns:
        --------
        bool
            True when the record was written

        Raises:
        -------
        StoreConflictError
            When the stored record cannot be read or the write fails
        """
        path = self.path_for(record.sigma, record.n)
        with self._store_lock():
            try:
                current = self.get(record.sigma, record.n)
            except RecordFormatError as e:
                raise StoreConflictError(f"stored record {path} is unreadable: {e}") from e
            if current is not None and not record.rho > current.rho + REPLACE_MARGIN:
                logger.info(f"Kept stored record sigma={record.sigma}, n={record.n}: "
                            f"rho {current.rho:.15f} >= {record.rho:.15f}")
                return False
            try:
                record.write(path)
                self._write_index()
            except OSError as e:
                raise StoreConflictError(f"cannot write {path}: {e}") from e
        logger.info(f"Stored record sigma={record.sigma}, n={record.n}, rho={record.rho:.15f}")
        return True

    def records(self):
        base = os.path.join(self.root, 'records')
        if not os.path.isdir(base):
            return
        for sigma_dir in sorted(os.listdir(base)):
            folder = os.path.join(base, sigma_dir)
            for name in sorted(os.listdir(folder)):
                if name.endswith('.json') and not name.startswith('.'):
                    yield PackingRecord.read(os.path.join(folder, name))

    def index(self):
        """DataFrame with one row per stored record."""
        rows = []
        for record in self.records():
            metrics = record.metrics or {}
            rows.append({
                'sigma': record.sigma,
                'N': record.n,
                'rho': record.rho,
                'r_base': record.r_base,
                'N_b': metrics.get('border_count', math.nan),
                'is_necklace': metrics.get('is_necklace', False),
                'path': self.path_for(record.sigma, record.n),
            })
        columns = ['sigma', 'N', 'rho', 'r_base', 'N_b', 'is_necklace', 'path']
        frame = pd.DataFrame(rows, columns=columns)
        return frame.sort_values(['sigma', 'N']).reset_index(drop=True)

    def _write_index(self):
        frame = self.index()
        write_atomic(os.path.join(self.root, 'index.csv'), frame.to_csv(index=False))
