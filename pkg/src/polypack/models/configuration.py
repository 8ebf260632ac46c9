"""
Configuration model for polypack.

A Configuration holds N disk centers as canonical (t, u) parameters of the
unit-circumradius polygon, the convention-I disk radius r and the
convention used when the centers are presented in Cartesian form.
"""

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from polypack.models.geometry import (
    Convention, PolygonSpec, ParamPoint, canonical_params, convention_scale,
    interior_points, to_param,
)


def minimal_distance(points):
    """Smallest pairwise distance of an (n, 2) point array (inf when n < 2)."""
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return math.inf
    return float(pdist(points).min())


@dataclass
class Configuration:
    """
    N congruent disks inside a regular polygon.

    Attributes:
    -----------
    sigma : int
        Number of sides of the container
    params : ndarray of shape (n, 2)
        Canonical (t, u) parameters of the centers
    r : float
        Disk radius in convention I (unit inner circumradius)
    convention : Convention
        Convention used by centers() and radius
    provenance : dict
        Free-form history tags (seed, run index, refinement steps, ...)
    """

    sigma: int
    params: np.ndarray
    r: float
    convention: Convention = Convention.I
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        PolygonSpec(self.sigma)
        self.sigma = int(self.sigma)
        params = np.asarray(self.params, dtype=float).reshape(-1, 2)
        t, u = canonical_params(params[:, 0], params[:, 1])
        self.params = np.column_stack([np.atleast_1d(t), np.atleast_1d(u)])
        self.r = float(self.r)
        self.convention = Convention(self.convention)

    @classmethod
    def from_params(cls, sigma, t, u, r=None, convention=Convention.I, provenance=None):
        params = np.column_stack([np.atleast_1d(t), np.atleast_1d(u)])
        if r is None:
            r = minimal_distance(interior_points(params[:, 0], params[:, 1], sigma)) / 2.0
        return cls(sigma, params, r, convention, dict(provenance or {}))

    @classmethod
    def from_points(cls, sigma, points, r=None, convention=Convention.I, provenance=None):
        """
        Build a configuration from Cartesian centers in the unit-circumradius polygon.

        When r is omitted it is set to half the minimal center distance.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if r is None:
            if len(points) < 2:
                raise ValueError("a single disk needs an explicit radius")
            r = minimal_distance(points) / 2.0
        t, u = to_param(points, sigma)
        return cls(sigma, np.column_stack([t, u]), r, convention, dict(provenance or {}))

    @property
    def n(self):
        return len(self.params)

    @property
    def spec(self):
        return PolygonSpec(self.sigma, self.convention)

    @property
    def param_points(self):
        return [ParamPoint(float(t), float(u)) for t, u in self.params]

    @property
    def points(self):
        """Centers in convention-I coordinates (inside the unit-circumradius polygon)."""
        return interior_points(self.params[:, 0], self.params[:, 1], self.sigma)

    @property
    def scale(self):
        return convention_scale(self.convention, self.sigma, self.r)

    @property
    def radius(self):
        """Disk radius in this configuration's convention."""
        return self.r * self.scale

    def centers(self):
        """Cartesian centers in this configuration's convention."""
        return self.points * self.scale

    def d_min(self):
        return minimal_distance(self.points)

    @property
    def rho(self):
        from polypack.utils.metrics import packing_fraction
        return packing_fraction(self.n, self.r, self.sigma)

    def replace(self, **changes):
        """Copy with some fields replaced (params are copied, provenance is shallow-copied)."""
        values = {
            'sigma': self.sigma,
            'params': self.params.copy(),
            'r': self.r,
            'convention': self.convention,
            'provenance': dict(self.provenance),
        }
        values.update(changes)
        return dataclasses.replace(self, **values)

    def with_points(self, points, r=None, **provenance):
        """New configuration at the given convention-I points (r defaults to d_min/2)."""
        tags = dict(self.provenance)
        tags.update(provenance)
        return Configuration.from_points(self.sigma, points, r=r,
                                         convention=self.convention, provenance=tags)


def convert_convention(cfg, target):
    """
    Present cfg in another convention.

    The similarity between conventions only rescales lengths, so the stored
    parameters and the convention-I radius are unchanged; centers() and
    radius follow the new convention. Packing fraction and border fraction
    are scale invariant.
    """
    return cfg.replace(convention=Convention(target))
