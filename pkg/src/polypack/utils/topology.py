"""
Voronoi topology of disk packings.

Cells are built per site by clipping the container polygon with the
perpendicular-bisector half-planes of the other sites, keeping for every
cell side the label of what produced it (a polygon wall or a neighbouring
site). Classification merges nearly coincident vertices into n-vertices,
drops zero-length sides and removes vertices that separate fewer than
three faces (spurious polygon corners and collinear splits). The charge
ledger then checks Euler's theorem in both of its forms.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components
from shapely.geometry import Point, Polygon
from sklearn.neighbors import NearestNeighbors

from polypack.config import CONTACT_TOL, MERGE_TOL
from polypack.exceptions import DegenerateConfigurationError, LedgerViolationError
from polypack.models.geometry import Point2, polygon_vertices
from polypack.utils.metrics import contact_counts

# Set up logging
logger = logging.getLogger(__name__)

WALL = 'wall'
SITE = 'site'


@dataclass
class VoronoiCell:
    """
    Voronoi cell of one site.

    polygon and edge_labels describe the clipped geometry (edge k runs from
    polygon[k] to polygon[k+1]); vertex_ids and the counts below are filled
    in by classify_cells.
    """

    site_index: int
    polygon: np.ndarray
    edge_labels: list
    vertex_ids: tuple = ()
    side_count: int = 0
    wall_sides: int = 0
    is_border: bool = False
    charge: int = 0

    @property
    def area(self):
        return Polygon(self.polygon).area

    def contains_site(self, site, tol=1e-12):
        return Polygon(self.polygon).buffer(tol).covers(Point(site[0], site[1]))


@dataclass
class VertexNode:
    position: Point2
    order: int
    cells: tuple = ()

    @property
    def charge(self):
        return -2 * (self.order - 3)


@dataclass
class VoronoiDiagram:
    sigma: int
    r: float
    sites: np.ndarray
    circumradius: float
    cells: list
    vertices: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    merge_tol: Optional[float] = None

    @property
    def classified(self):
        return self.merge_tol is not None

    @property
    def polygon_area(self):
        return Polygon(polygon_vertices(self.sigma, self.circumradius)).area


@dataclass
class ChargeLedger:
    interior_cells: dict
    border_cells: dict
    border_count: int
    vertex_census: dict
    q_interior_sum: int
    q_border_sum: int
    q_vertex_sum: int
    total_Q: int
    euler_counts: tuple
    wall_sides: int
    merge_tol: float

    @property
    def internal_charge(self):
        return self.q_interior_sum + self.q_border_sum + self.q_vertex_sum

    @property
    def euler_characteristic(self):
        n_v, n_e, n_f = self.euler_counts
        return n_v - n_e + n_f

    def to_dict(self):
        return {
            'interior_cells': {str(k): v for k, v in sorted(self.interior_cells.items())},
            'border_cells': {str(k): v for k, v in sorted(self.border_cells.items())},
            'border_count': self.border_count,
            'vertex_census': {str(k): v for k, v in sorted(self.vertex_census.items())},
            'q_interior_sum': self.q_interior_sum,
            'q_border_sum': self.q_border_sum,
            'q_vertex_sum': self.q_vertex_sum,
            'total_Q': self.total_Q,
            'euler_counts': list(self.euler_counts),
            'wall_sides': self.wall_sides,
            'merge_tol': self.merge_tol,
        }


def _clip(polygon, labels, normal, offset, label):
    """Keep the part of a convex polygon where x . normal <= offset."""
    values = polygon @ normal - offset
    inside = values <= 0.0
    if inside.all():
        return polygon, labels
    if not inside.any():
        return np.empty((0, 2)), []
    points, new_labels = [], []
    k = len(polygon)
    for a in range(k):
        b = (a + 1) % k
        if inside[a]:
            points.append(polygon[a])
            new_labels.append(labels[a])
            if not inside[b]:
                w = values[a] / (values[a] - values[b])
                points.append(polygon[a] + w * (polygon[b] - polygon[a]))
                new_labels.append(label)
        elif inside[b]:
            w = values[a] / (values[a] - values[b])
            points.append(polygon[a] + w * (polygon[b] - polygon[a]))
            new_labels.append(labels[a])
    return np.array(points), new_labels


def clip_cells(points, sigma, circumradius):
    """
    Voronoi cells of points clipped to the sigma-gon of the given circumradius.

    Returns:
    --------
    list of (polygon, edge_labels)
        Labels are ('wall', k) for polygon edge k and ('site', j) for the
        bisector with site j
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    container = polygon_vertices(sigma, circumradius)
    wall_labels = [(WALL, k) for k in range(sigma)]
    if n == 0:
        return []

    if n > 1:
        nn = NearestNeighbors(n_neighbors=n).fit(points)
        distances, order = nn.kneighbors(points)
        if np.any(distances[:, 1] <= 0.0):
            raise DegenerateConfigurationError("duplicate Voronoi sites")

    cells = []
    for i in range(n):
        polygon, labels = container.copy(), list(wall_labels)
        if n > 1:
            for d, j in zip(distances[i, 1:], order[i, 1:]):
                reach = np.max(np.hypot(*(polygon - points[i]).T)) if len(polygon) else 0.0
                if d > 2.0 * reach:
                    break
                normal = points[j] - points[i]
                offset = float(normal @ (0.5 * (points[i] + points[j])))
                polygon, labels = _clip(polygon, labels, normal, offset, (SITE, int(j)))
        cells.append((polygon, labels))
    return cells


def clipped_voronoi(cfg):
    """
    Voronoi diagram of the disk centers clipped to the container.

    The container is the outer polygon (convention-I circumradius
    1 + r*sec(pi/sigma)). The returned diagram is unclassified; its cells
    carry raw side counts.
    """
    sites = cfg.points
    circumradius = 1.0 + cfg.r / math.cos(math.pi / cfg.sigma)
    cells = []
    for i, (polygon, labels) in enumerate(clip_cells(sites, cfg.sigma, circumradius)):
        walls = sum(1 for kind, _ in labels if kind == WALL)
        cells.append(VoronoiCell(
            site_index=i,
            polygon=polygon,
            edge_labels=labels,
            side_count=len(polygon),
            wall_sides=walls,
            is_border=walls > 0,
        ))
    return VoronoiDiagram(cfg.sigma, cfg.r, sites, circumradius, cells)


def _merge_vertices(diagram, merge_tol):
    """Cluster all cell corners closer than merge_tol*r."""
    owners, corners = [], []
    for cell in diagram.cells:
        for k, corner in enumerate(cell.polygon):
            owners.append((cell.site_index, k))
            corners.append(corner)
    corners = np.array(corners)
    radius = max(merge_tol * diagram.r, 1e-15)
    graph = NearestNeighbors(radius=radius).fit(corners).radius_neighbors_graph(corners)
    n_clusters, labels = connected_components(graph, directed=False)
    positions = np.zeros((n_clusters, 2))
    np.add.at(positions, labels, corners)
    positions /= np.bincount(labels, minlength=n_clusters)[:, None]
    lookup = {owner: int(label) for owner, label in zip(owners, labels)}
    return lookup, positions


def _collapse(ids, labels):
    """Drop zero-length sides (consecutive corners in the same cluster)."""
    ids, labels = list(ids), list(labels)
    k = 0
    while len(ids) > 1 and k < len(ids):
        if ids[k] == ids[(k + 1) % len(ids)]:
            del ids[k]
            del labels[k]
            k = max(k - 1, 0)
        else:
            k += 1
    return ids, labels


def _edge_key(site, a, b, label):
    kind, other = label
    lo, hi = min(a, b), max(a, b)
    if kind == SITE:
        return (SITE, min(site, other), max(site, other), lo, hi)
    return (WALL, site, lo, hi)


def _edges(cycles):
    edges = {}
    for site, (ids, labels) in cycles.items():
        m = len(ids)
        for k in range(m):
            a, b = ids[k], ids[(k + 1) % m]
            edges[_edge_key(site, a, b, labels[k])] = (a, b)
    return edges


def _degrees(edges):
    degree = Counter()
    for a, b in edges.values():
        degree[a] += 1
        degree[b] += 1
    return degree


def classify_cells(diagram, merge_tol=MERGE_TOL):
    """
    Merge vertices, drop spurious corners and collinear splits, count sides.

    A vertex that only separates two faces (a polygon corner inside one
    cell, or a point splitting a straight side) is removed and its two
    sides become one. Vertices where several bisectors meet within
    merge_tol*r become a single n-vertex. Always works from the clipped
    geometry, so classifying twice gives the same result.
    """
    lookup, positions = _merge_vertices(diagram, merge_tol)
    cycles = {}
    for cell in diagram.cells:
        ids = [lookup[(cell.site_index, k)] for k in range(len(cell.polygon))]
        cycles[cell.site_index] = _collapse(ids, cell.edge_labels)

    if len(diagram.cells) > 1:
        while True:
            degree = _degrees(_edges(cycles))
            removable = {v for v, d in degree.items() if d == 2}
            if not removable:
                break
            removed = False
            for site, (ids, labels) in cycles.items():
                keep = [k for k, v in enumerate(ids) if v not in removable]
                if len(keep) < len(ids) and len(keep) >= 2:
                    cycles[site] = ([ids[k] for k in keep], [labels[k] for k in keep])
                    removed = True
            if not removed:
                break

    edges = _edges(cycles)
    degree = _degrees(edges)
    incident = {}
    for site, (ids, _) in cycles.items():
        for v in ids:
            incident.setdefault(v, set()).add(site)

    vertex_ids = sorted(degree)
    index = {v: k for k, v in enumerate(vertex_ids)}
    vertices = [
        VertexNode(Point2(float(positions[v, 0]), float(positions[v, 1])), degree[v],
                   tuple(sorted(incident.get(v, ()))))
        for v in vertex_ids
    ]
    edge_list = sorted((index[a], index[b], key[0]) for key, (a, b) in edges.items())

    cells = []
    for cell in diagram.cells:
        ids, labels = cycles[cell.site_index]
        walls = sum(1 for kind, _ in labels if kind == WALL)
        c = len(ids)
        cells.append(replace(
            cell,
            vertex_ids=tuple(index[v] for v in ids),
            side_count=c,
            wall_sides=walls,
            is_border=walls > 0,
            charge=6 - c - walls if walls else 6 - c,
        ))
    return replace(diagram, cells=cells, vertices=vertices, edges=edge_list,
                   merge_tol=float(merge_tol))


def charge_ledger(diagram, merge_tol=MERGE_TOL, strict=True):
    """
    Topological charge census and Euler checks of a classified diagram.

    Interior cells carry 6 - c, border cells 6 - c - w (5 - c with one
    wall side), n-vertices -2(n - 3). The three sums must add up to 6 and
    the outer face (6 - W for W wall sides) brings the total to 12.

    Raises:
    -------
    LedgerViolationError
        When strict and the internal charge differs from 6 or
        V - E + F differs from 2
    """
    if len(diagram.cells) < 2:
        raise ValueError("charge_ledger needs at least two cells")
    if not diagram.classified:
        diagram = classify_cells(diagram, merge_tol)

    interior = Counter(c.side_count for c in diagram.cells if not c.is_border)
    border = Counter(c.side_count for c in diagram.cells if c.is_border)
    q_interior = sum(c.charge for c in diagram.cells if not c.is_border)
    q_border = sum(c.charge for c in diagram.cells if c.is_border)
    q_vertex = sum(v.charge for v in diagram.vertices)
    wall_sides = sum(c.wall_sides for c in diagram.cells)
    total = sum(6 - c.side_count for c in diagram.cells) + q_vertex + (6 - wall_sides)

    ledger = ChargeLedger(
        interior_cells=dict(interior),
        border_cells=dict(border),
        border_count=sum(border.values()),
        vertex_census=dict(Counter(v.order for v in diagram.vertices)),
        q_interior_sum=q_interior,
        q_border_sum=q_border,
        q_vertex_sum=q_vertex,
        total_Q=total,
        euler_counts=(len(diagram.vertices), len(diagram.edges), len(diagram.cells) + 1),
        wall_sides=wall_sides,
        merge_tol=diagram.merge_tol,
    )
    if strict and (ledger.internal_charge != 6 or ledger.euler_characteristic != 2):
        raise LedgerViolationError(
            f"charge ledger broken: internal charge {ledger.internal_charge}, "
            f"V - E + F = {ledger.euler_characteristic}",
            ledger=ledger,
        )
    return ledger


def voronoi_census(cfg, merge_tol=MERGE_TOL, strict=True):
    """Clipped, classified diagram of cfg together with its charge ledger."""
    diagram = classify_cells(clipped_voronoi(cfg), merge_tol)
    return diagram, charge_ledger(diagram, strict=strict)


def contact_census(cfg, tol=CONTACT_TOL):
    """Per-disk number of tangencies with other disks and with the border."""
    return contact_counts(cfg.points, cfg.sigma, cfg.r, tol)
