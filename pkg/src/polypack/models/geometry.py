"""
Regular polygon domain model.

This module describes the container: the (t, u) parametrization of the
unit-circumradius polygon, the three size conventions, containment tests,
the perimeter/area measures and uniform random sampling.

The polygon with sigma sides has a vertex at angle 0 and its remaining
vertices at multiples of 2*pi/sigma. Edge k joins vertex k and vertex k+1
and has its outward normal at angle (2k+1)*pi/sigma.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

TWO_PI = 2.0 * np.pi


class Convention(str, Enum):
    """Size conventions for the container (see the README table)."""

    I = 'I'      # unit inner circumradius, disk radius r free
    II = 'II'    # unit outer circumradius
    III = 'III'  # unit disk diameter


@dataclass(frozen=True)
class PolygonSpec:
    """Immutable description of the container."""

    sigma: int
    convention: Convention = Convention.I

    def __post_init__(self):
        if int(self.sigma) != self.sigma or self.sigma < 3:
            raise ValueError(f"sigma must be an integer >= 3, got {self.sigma}")
        object.__setattr__(self, 'sigma', int(self.sigma))
        object.__setattr__(self, 'convention', Convention(self.convention))


@dataclass(frozen=True)
class ParamPoint:
    """Angles (t, u) of a point inside the unit-circumradius polygon."""

    t: float
    u: float

    def canonical(self):
        t, u = canonical_params(self.t, self.u)
        return ParamPoint(float(t), float(u))


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Point2 coordinates must be finite, got ({self.x}, {self.y})")

    def as_array(self):
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class DomainMeasures:
    apothem_outer: float
    circumradius_outer: float
    area: float
    perimeter: float
    perimeter_inner: float

    def to_dict(self):
        return {
            'apothem_outer': self.apothem_outer,
            'circumradius_outer': self.circumradius_outer,
            'area': self.area,
            'perimeter': self.perimeter,
            'perimeter_inner': self.perimeter_inner,
        }


def _check_sigma(sigma):
    if sigma < 3:
        raise ValueError(f"sigma must be >= 3, got {sigma}")


def _unwrap(value):
    """Return a Python float for 0-d results, the array otherwise."""
    if np.ndim(value) == 0:
        return float(value)
    return value


def canonical_params(t, u):
    """
    Map (t, u) onto t in [0, pi/2] and u in [0, 2*pi).

    sin^2 t is even and pi-periodic, so every t has a representative in
    [0, pi/2] giving the same point.
    """
    t = np.abs(np.mod(np.asarray(t, dtype=float) + np.pi / 2, np.pi) - np.pi / 2)
    u = np.mod(np.asarray(u, dtype=float), TWO_PI)
    u = np.where(u >= TWO_PI, 0.0, u)
    return _unwrap(t), _unwrap(u)


def gamma(u, offset, sigma):
    """
    Radial distance to the border of the polygon at angle u.

    Parameters:
    -----------
    u : float or ndarray
        Polar angle
    offset : float
        Outward offset of the edges; 0 gives the unit-circumradius polygon
    sigma : int
        Number of sides

    Returns:
    --------
    float or ndarray
        (offset + cos(pi/sigma)) * sec(pi/sigma - (u mod 2pi/sigma))
    """
    _check_sigma(sigma)
    a = np.pi / sigma
    m = np.mod(np.asarray(u, dtype=float), 2.0 * a)
    return _unwrap((offset + np.cos(a)) / np.cos(a - m))


def gamma_prime(u, sigma):
    """Derivative of gamma(u, 0, sigma) with respect to u (one-sided at vertices)."""
    a = np.pi / sigma
    m = np.mod(np.asarray(u, dtype=float), 2.0 * a)
    g = np.cos(a) / np.cos(a - m)
    return _unwrap(-g * np.tan(a - m))


def d_max(u, sigma):
    """Largest admissible radius at angle u inside the unit-circumradius polygon."""
    return gamma(u, 0.0, sigma)


def interior_points(t, u, sigma):
    """Vectorised parametrization: returns an (n, 2) array of Cartesian points."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    radius = np.sin(t) ** 2 * gamma(u, 0.0, sigma)
    return np.column_stack([radius * np.cos(u), radius * np.sin(u)])


def interior_point(p, sigma):
    """Cartesian position of the parametric point p in the unit-circumradius polygon."""
    _check_sigma(sigma)
    xy = interior_points([p.t], [p.u], sigma)[0]
    return Point2(float(xy[0]), float(xy[1]))


def to_param(points, sigma):
    """
    Invert the parametrization for Cartesian points.

    Points outside the polygon are projected radially onto the border
    (t = pi/2).

    Returns:
    --------
    (t, u) : tuple of ndarray
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    u = np.mod(np.arctan2(points[:, 1], points[:, 0]), TWO_PI)
    u = np.where(u >= TWO_PI, 0.0, u)
    ratio = np.hypot(points[:, 0], points[:, 1]) / d_max(u, sigma)
    t = np.arcsin(np.sqrt(np.clip(ratio, 0.0, 1.0)))
    return t, u


def polygon_vertices(sigma, circumradius=1.0):
    """Vertices of the regular polygon, counter-clockwise from angle 0."""
    _check_sigma(sigma)
    angles = TWO_PI * np.arange(sigma) / sigma
    return circumradius * np.column_stack([np.cos(angles), np.sin(angles)])


def edge_normals(sigma):
    """Outward unit normals of the edges; normal k belongs to edge (k, k+1)."""
    angles = (2 * np.arange(sigma) + 1) * np.pi / sigma
    return np.column_stack([np.cos(angles), np.sin(angles)])


def border_gaps(points, sigma, circumradius=1.0):
    """
    Distance from each point to each edge line of the polygon.

    Returns an (n, sigma) array; column k is the clearance to edge k.
    Negative entries mean the point lies outside that edge.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    apothem = circumradius * math.cos(math.pi / sigma)
    return apothem - points @ edge_normals(sigma).T


def contains(pt, sigma, circumradius=1.0, tol=0.0):
    """True iff pt lies inside the polygon of the given circumradius (within tol)."""
    if circumradius <= 0 or tol < 0:
        raise ValueError("circumradius must be > 0 and tol >= 0")
    x, y = (pt.x, pt.y) if isinstance(pt, Point2) else (float(pt[0]), float(pt[1]))
    return math.hypot(x, y) <= d_max(math.atan2(y, x), sigma) * circumradius + tol


def base_radius(spec, r, base_r=None):
    """
    Convert a disk radius given in spec.convention to the convention-I radius.

    Convention III fixes r = 1/2, so the convention-I radius must be passed
    explicitly as base_r.
    """
    a = math.pi / spec.sigma
    if spec.convention == Convention.I:
        if r <= 0:
            raise ValueError(f"radius must be > 0, got {r}")
        return float(r)
    if spec.convention == Convention.II:
        if r <= 0:
            raise ValueError(f"radius must be > 0, got {r}")
        if r >= math.cos(a):
            raise ValueError(f"nonphysical radius {r} >= cos(pi/{spec.sigma}) in convention II")
        return float(r / (1.0 - r / math.cos(a)))
    if abs(r - 0.5) > 1e-12:
        raise ValueError(f"convention III fixes r = 1/2, got {r}")
    if base_r is None or base_r <= 0:
        raise ValueError("convention III needs the convention-I radius (base_r)")
    return float(base_r)


def convention_scale(convention, sigma, r_base):
    """Length scale mapping convention-I coordinates onto the given convention."""
    convention = Convention(convention)
    if convention == Convention.I:
        return 1.0
    if convention == Convention.II:
        return 1.0 / (1.0 + r_base / math.cos(math.pi / sigma))
    return 1.0 / (2.0 * r_base)


def measures(spec, r, base_r=None):
    """
    Apothem, circumradius, area and perimeters of the container.

    Parameters:
    -----------
    spec : PolygonSpec
        Container and the convention the radius is expressed in
    r : float
        Disk radius in spec.convention (1/2 in convention III)
    base_r : float, optional
        Convention-I radius, required for convention III

    Returns:
    --------
    DomainMeasures
    """
    rb = base_radius(spec, r, base_r)
    sigma = spec.sigma
    a = math.pi / sigma
    apothem = rb + math.cos(a)
    circumradius = 1.0 + rb / math.cos(a)
    area = 0.5 * sigma * math.sin(2.0 * a) * circumradius ** 2
    perimeter = 2.0 * sigma * (rb * math.tan(a) + math.sin(a))
    perimeter_inner = 2.0 * sigma * math.sin(a)

    k = convention_scale(spec.convention, sigma, rb)
    return DomainMeasures(
        apothem_outer=apothem * k,
        circumradius_outer=circumradius * k,
        area=area * k * k,
        perimeter=perimeter * k,
        perimeter_inner=perimeter_inner * k,
    )


def sample_points(count, sigma, rng=None):
    """
    Uniform random points in the unit-circumradius polygon as an (count, 2) array.

    The radius is drawn as sqrt(q) with q uniform, the angle uniformly on
    [0, 2pi); a draw whose radius exceeds d_max(u) is discarded entirely.
    """
    _check_sigma(sigma)
    rng = np.random.default_rng(rng)
    chunks = []
    accepted = 0
    while accepted < count:
        batch = max(16, int(1.5 * (count - accepted)))
        u = rng.uniform(0.0, TWO_PI, batch)
        radius = np.sqrt(rng.uniform(0.0, 1.0, batch))
        keep = radius <= d_max(u, sigma)
        pts = np.column_stack([radius * np.cos(u), radius * np.sin(u)])[keep]
        chunks.append(pts)
        accepted += len(pts)
    if not chunks:
        return np.empty((0, 2))
    return np.vstack(chunks)[:count]


def sample_uniform(count, sigma, rng_seed):
    """Uniform random points in the unit-circumradius polygon as Point2 values."""
    return [Point2(float(x), float(y)) for x, y in sample_points(count, sigma, rng_seed)]
