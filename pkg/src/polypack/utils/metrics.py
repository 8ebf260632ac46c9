"""
Scale-invariant packing metrics.

This module computes the packing fraction, the plane-density radius bound,
border and vertex occupation, rattlers and the necklace tour of a
configuration. All lengths are convention-I lengths (unit inner
circumradius), which is where the metrics are defined.
"""

import logging
import math
from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform
from sklearn.neighbors import NearestNeighbors

from polypack.config import CONTACT_TOL, NECKLACE_TOL
from polypack.exceptions import OverlapError
from polypack.models.geometry import border_gaps

# Set up logging
logger = logging.getLogger(__name__)

RHO_PLANE = math.pi / math.sqrt(12.0)

# A configuration is a necklace when its tour excess is at most this value
NECKLACE_DELTA = 1.0e-10

EXACT_TOUR_LIMIT = 16


@dataclass
class PackingMetrics:
    rho: float
    varsigma: float
    efficiency: float
    border_fraction: float
    border_count: int
    vertex_occupancy: float
    vertex_count: int
    necklace_excess: float
    tour_length: float
    is_necklace: bool
    rattler_count: int

    def to_dict(self):
        return asdict(self)


class NecklaceReport(NamedTuple):
    tour_length: float
    necklace_excess: float
    is_necklace: bool


def packing_fraction(n, r, sigma):
    """
    Fraction of the container covered by n disks of convention-I radius r.

    Returns N*pi*r^2*cot(pi/sigma) / (sigma*(r + cos(pi/sigma))^2).
    """
    a = math.pi / sigma
    return n * math.pi * r * r / (math.tan(a) * sigma * (r + math.cos(a)) ** 2)


def varsigma(n, sigma):
    """
    Largest convention-I radius compatible with the plane density pi/sqrt(12).

    Infinite when n disks cannot reach the plane density at any radius.
    """
    a = math.pi / sigma
    denominator = math.sqrt(2.0 * math.sqrt(3.0) * n * sigma / math.tan(a)) - sigma
    if denominator <= 0:
        return math.inf
    return sigma * math.cos(a) / denominator


def contact_pairs(points, r, tol):
    """
    Pairs of disks whose centers are within 2r(1 + tol) of each other.

    Returns:
    --------
    list of (i, j, distance) with i < j
    """
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return []
    nn = NearestNeighbors(radius=2.0 * r * (1.0 + tol)).fit(points)
    distances, indices = nn.radius_neighbors(points, sort_results=True)
    pairs = []
    for i, (dist_row, index_row) in enumerate(zip(distances, indices)):
        for d, j in zip(dist_row, index_row):
            if j > i:
                pairs.append((i, int(j), float(d)))
    return pairs


def border_contact_matrix(points, sigma, r, tol):
    """Boolean (n, sigma) matrix: disk i touches edge k within tol*r."""
    return border_gaps(points, sigma) <= tol * r


def occupied_vertices(points, sigma, r, tol):
    """Indices of polygon vertices holding a disk that touches both adjacent edges."""
    touching = border_contact_matrix(points, sigma, r, tol)
    occupied = []
    for k in range(sigma):
        # vertex k sits between edge k-1 and edge k
        if np.any(touching[:, k - 1] & touching[:, k]):
            occupied.append(k)
    return occupied


def contact_counts(points, sigma, r, tol):
    """Per-disk number of tangencies with other disks plus touched edges."""
    points = np.asarray(points, dtype=float)
    counts = np.zeros(len(points), dtype=int)
    for i, j, _ in contact_pairs(points, r, tol):
        counts[i] += 1
        counts[j] += 1
    if len(points):
        counts += border_contact_matrix(points, sigma, r, tol).sum(axis=1)
    return counts


def _held_karp(D):
    """Exact shortest closed tour by dynamic programming over subsets."""
    n = len(D)
    if n == 2:
        return 2.0 * D[0, 1], [0, 1]
    m = n - 1
    size = 1 << m
    sub = D[1:, 1:]
    dp = np.full((size, m), np.inf)
    parent = np.full((size, m), -1, dtype=np.int64)
    ks = np.arange(m)
    dp[1 << ks, ks] = D[0, 1:]

    for mask in range(1, size):
        row = dp[mask]
        cand = row[:, None] + sub
        best_j = np.argmin(cand, axis=0)
        best = cand[best_j, ks]
        free = ks[((mask >> ks) & 1) == 0]
        if len(free) == 0:
            continue
        new = mask | (1 << free)
        improve = best[free] < dp[new, free]
        dp[new[improve], free[improve]] = best[free][improve]
        parent[new[improve], free[improve]] = best_j[free][improve]

    full = size - 1
    closing = dp[full] + D[1:, 0]
    k = int(np.argmin(closing))
    length = float(closing[k])

    order = []
    mask = full
    while k >= 0 and mask:
        order.append(k + 1)
        previous = int(parent[mask, k])
        mask ^= 1 << k
        k = previous
    return length, [0] + order[::-1]


def _tour_length(D, tour):
    tour = np.asarray(tour)
    return float(D[tour, np.roll(tour, -1)].sum())


def _local_search_tour(D, max_rounds=100):
    """Nearest-neighbour tour improved by 2-opt moves (an upper bound)."""
    n = len(D)
    unvisited = set(range(1, n))
    tour = [0]
    while unvisited:
        last = tour[-1]
        nxt = min(unvisited, key=lambda j: D[last, j])
        tour.append(nxt)
        unvisited.remove(nxt)
    tour = np.array(tour)

    for _ in range(max_rounds):
        improved = False
        for i in range(n - 2):
            a, b = tour[i], tour[i + 1]
            j = np.arange(i + 2, n if i > 0 else n - 1)
            if len(j) == 0:
                continue
            c = tour[j]
            d = tour[(j + 1) % n]
            delta = D[a, c] + D[b, d] - D[a, b] - D[c, d]
            best = int(np.argmin(delta))
            if delta[best] < -1e-15:
                jj = j[best]
                tour[i + 1:jj + 1] = tour[i + 1:jj + 1][::-1]
                improved = True
        if not improved:
            break
    return _tour_length(D, tour), tour.tolist()


def _is_bipartite_unbalanced(adjacency):
    """True when the graph is bipartite with colour classes of different size."""
    n = len(adjacency)
    colour = np.full(n, -1)
    for start in range(n):
        if colour[start] >= 0:
            continue
        colour[start] = 0
        stack = [start]
        while stack:
            v = stack.pop()
            for w in np.nonzero(adjacency[v])[0]:
                if colour[w] < 0:
                    colour[w] = 1 - colour[v]
                    stack.append(w)
                elif colour[w] == colour[v]:
                    return False
    return int((colour == 0).sum()) != int((colour == 1).sum())


def contact_cycle(D, diameter, tol, node_budget=2_000_000):
    """
    Search a Hamiltonian cycle in the contact graph.

    Edges join centers whose distance is within tol*diameter of the
    diameter. Returns the cycle as a list of indices or None.
    """
    n = len(D)
    adjacency = np.abs(D - diameter) <= tol * diameter
    np.fill_diagonal(adjacency, False)
    degree = adjacency.sum(axis=1)
    if n < 3 or np.any(degree < 2):
        return None
    n_components, _ = connected_components(csr_matrix(adjacency), directed=False)
    if n_components > 1 or _is_bipartite_unbalanced(adjacency):
        return None

    neighbors = [np.nonzero(adjacency[i])[0].tolist() for i in range(n)]
    start = int(np.argmin(degree))
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    path = [start]
    budget = [node_budget]

    def feasible(last):
        # every unvisited node still needs two usable neighbours
        for v in np.nonzero(~visited)[0]:
            usable = sum(1 for w in neighbors[v] if not visited[w] or w == last or w == start)
            if usable < 2:
                return False
        return True

    def extend(last):
        budget[0] -= 1
        if budget[0] < 0:
            return False
        if len(path) == n:
            return adjacency[last, start]
        options = [w for w in neighbors[last] if not visited[w]]
        options.sort(key=lambda w: sum(1 for x in neighbors[w] if not visited[x]))
        for w in options:
            visited[w] = True
            path.append(w)
            if feasible(w) and extend(w):
                return True
            path.pop()
            visited[w] = False
        return False

    found = extend(start)
    if budget[0] < 0:
        logger.warning(f"Contact-cycle search stopped after {node_budget} nodes; reporting no cycle")
        return None
    return list(path) if found else None


def shortest_tour(points, exact_limit=EXACT_TOUR_LIMIT):
    """Length and order of the shortest closed tour (exact up to exact_limit points)."""
    D = squareform(pdist(np.asarray(points, dtype=float)))
    if len(D) <= exact_limit:
        return _held_karp(D)
    return _local_search_tour(D)


def necklace_tour(cfg, tol=NECKLACE_TOL, exact_limit=EXACT_TOUR_LIMIT):
    """
    Closed-tour length L, excess L/(2Nr) - 1 and necklace flag of cfg.

    Up to exact_limit disks the tour is exact. Beyond it the necklace
    question is settled by a Hamiltonian-cycle search in the contact graph
    and, when no contact cycle exists, L comes from a 2-opt tour.
    """
    if cfg.n < 2:
        raise ValueError("necklace_tour needs at least two disks")
    points = cfg.points
    D = squareform(pdist(points))
    if cfg.n <= exact_limit:
        length, _ = _held_karp(D)
        excess = length / (2.0 * cfg.n * cfg.r) - 1.0
        return NecklaceReport(length, excess, excess <= NECKLACE_DELTA)

    cycle = contact_cycle(D, 2.0 * cfg.r, tol)
    if cycle is not None:
        length = _tour_length(D, cycle)
        return NecklaceReport(length, length / (2.0 * cfg.n * cfg.r) - 1.0, True)
    length, _ = _local_search_tour(D)
    return NecklaceReport(length, length / (2.0 * cfg.n * cfg.r) - 1.0, False)


def check_overlaps(cfg, tol):
    """Raise OverlapError when two disks overlap by more than tol*r."""
    d = cfg.d_min()
    if d < 2.0 * cfg.r - max(tol, 1e-12) * cfg.r:
        raise OverlapError(f"disks overlap: d_min = {d!r} < 2r = {2.0 * cfg.r!r}")


def compute_metrics(cfg, contact_tol=CONTACT_TOL, necklace_tol=NECKLACE_TOL):
    """
    Packing fraction, efficiency, border/vertex occupation and necklace data.

    Parameters:
    -----------
    cfg : Configuration
        Configuration to measure (must be overlap-free within contact_tol)
    contact_tol : float
        Contact tolerance relative to r
    necklace_tol : float
        Relative tolerance for the contact graph of the necklace search

    Returns:
    --------
    PackingMetrics
    """
    check_overlaps(cfg, contact_tol)
    points = cfg.points
    sigma, r, n = cfg.sigma, cfg.r, cfg.n

    rho = packing_fraction(n, r, sigma)
    bound = varsigma(n, sigma)
    efficiency = r / bound if math.isfinite(bound) else 0.0

    touching = border_contact_matrix(points, sigma, r, contact_tol)
    border_count = int(np.any(touching, axis=1).sum())
    perimeter_inner = 2.0 * sigma * math.sin(math.pi / sigma)
    vertex_count = len(occupied_vertices(points, sigma, r, contact_tol))

    if n >= 2:
        tour = necklace_tour(cfg, necklace_tol)
    else:
        tour = NecklaceReport(0.0, 0.0, False)

    rattlers = int((contact_counts(points, sigma, r, contact_tol) == 0).sum())

    return PackingMetrics(
        rho=rho,
        varsigma=bound,
        efficiency=efficiency,
        border_fraction=border_count * r / perimeter_inner,
        border_count=border_count,
        vertex_occupancy=vertex_count / sigma,
        vertex_count=vertex_count,
        necklace_excess=tour.necklace_excess,
        tour_length=tour.tour_length,
        is_necklace=bool(tour.is_necklace),
        rattler_count=rattlers,
    )


def contact_variance(points, pairs):
    """Variance of the squared pair distances (mean d^4 minus squared mean d^2)."""
    if not pairs:
        return 0.0
    points = np.asarray(points, dtype=float)
    i = np.array([p[0] for p in pairs])
    j = np.array([p[1] for p in pairs])
    diff = points[i] - points[j]
    d2 = np.einsum('ij,ij->i', diff, diff)
    return float(np.mean((d2 - d2.mean()) ** 2))


def contact_statistics(cfg, eta=None):
    """
    Spread of the near-contact distances of cfg.

    Pairs within eta of the minimal distance (default 1e-3 * d_min) are
    treated as contacts.

    Returns:
    --------
    dict
        pair_count, mean_d2 and variance of the squared contact distances
    """
    points = cfg.points
    d_min = cfg.d_min()
    if not math.isfinite(d_min):
        return {'pair_count': 0, 'mean_d2': 0.0, 'variance': 0.0}
    eta = 1e-3 * d_min if eta is None else eta
    pairs = [(i, j, d) for i, j, d in contact_pairs(points, d_min / 2.0, eta / d_min) if d - d_min < eta]
    d2 = np.array([d * d for _, _, d in pairs])
    return {
        'pair_count': len(pairs),
        'mean_d2': float(d2.mean()) if len(d2) else 0.0,
        'variance': contact_variance(points, pairs),
    }
