"""
Density and peripheral-count upper bounds for packings in regular polygons.

Closed forms for the Fejes Toth, Groemer and Oler inequalities, the Oler
radius and density bounds with their large-N expansions, and the
least-squares fits used to extrapolate solver results to large N.
"""

import logging
import math
from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression

from polypack.models.geometry import PolygonSpec, measures
from polypack.utils.metrics import RHO_PLANE

# Set up logging
logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
GROEMER_KAPPA = (2.0 - SQRT3) / 2.0
GROEMER_LAMBDA = math.sqrt(12.0) - math.pi * (SQRT3 - 1.0)


@dataclass
class BoundsReport:
    """
    Closed-form bounds for n disks in a sigma-gon.

    r_upper is the Oler radius in convention II (unit outer circumradius);
    r_upper_base is the same radius in convention I. The Fejes Toth,
    Groemer and Oler quantities are evaluated at r_evaluated (convention I),
    which is r_upper_base unless a measured radius was supplied.
    """

    n: int
    sigma: int
    fejes_toth_ok: bool
    groemer_margin: float
    oler_max_disks: float
    r_upper: float
    r_upper_base: float
    rho_upper: float
    rho_upper_asym: float
    nb_upper: float
    nb_upper_asym: float
    groemer_kappa: float
    groemer_lambda: float
    r_evaluated: float

    def to_dict(self):
        return asdict(self)


class AsymptoticFit(NamedTuple):
    a1: float
    a2: float
    b1: float
    b2: float
    b3: float


def _check(n, sigma):
    PolygonSpec(sigma)
    if n < 2:
        raise ValueError(f"bounds need n >= 2, got {n}")


def _sigma_tan(sigma):
    return sigma * math.tan(math.pi / sigma)


def oler_capacity(r_outer, sigma):
    """
    Right-hand side of Oler's inequality for disks of radius r_outer.

    r_outer is expressed in convention II (unit outer circumradius).
    """
    c = math.cos(math.pi / sigma)
    x = c / r_outer - 1.0
    st = _sigma_tan(sigma)
    return st * x * x / (2.0 * SQRT3) + st * x / 2.0 + 1.0


def oler_radius(n, sigma):
    """Convention-II radius at which Oler's inequality becomes an equality."""
    _check(n, sigma)
    st = _sigma_tan(sigma)
    c = math.cos(math.pi / sigma)
    # positive root of st*x^2/(2*sqrt3) + st*x/2 + 1 - n = 0 with x = c/r - 1
    x = SQRT3 / st * (-st / 2.0 + math.sqrt(st * st / 4.0 + 2.0 * st * (n - 1) / SQRT3))
    return c / (1.0 + x)


def oler_radius_asym(n, sigma):
    """Two-term large-n expansion of oler_radius."""
    a = math.pi / sigma
    leading = math.sqrt(sigma * math.sin(2.0 * a)) / (2.0 * 3.0 ** 0.25 * math.sqrt(n))
    return leading - (2.0 * SQRT3 - 3.0) * sigma * math.sin(a) / (12.0 * n)


def outer_to_base(r_outer, sigma):
    """Convention-II radius to convention-I radius."""
    c = math.cos(math.pi / sigma)
    if r_outer >= c:
        raise ValueError(f"nonphysical radius {r_outer} >= cos(pi/{sigma}) in convention II")
    return r_outer / (1.0 - r_outer / c)


def base_to_outer(r_base, sigma):
    return r_base / (1.0 + r_base / math.cos(math.pi / sigma))


def oler_delta(n, sigma):
    st = _sigma_tan(sigma)
    m = 8.0 * SQRT3 * (n - 1)
    return (m + 2.0 * (5.0 - 2.0 * SQRT3) * st
            + 2.0 * (2.0 - SQRT3) * math.sqrt(st * (m + 3.0 * st)))


def rho_upper(n, sigma):
    """Oler density bound 4*pi*n / Delta(n, sigma)."""
    _check(n, sigma)
    return 4.0 * math.pi * n / oler_delta(n, sigma)


def rho_upper_asym(n, sigma):
    """Large-n expansion of rho_upper up to the 1/sqrt(n) term."""
    _check(n, sigma)
    return (math.pi / (2.0 * SQRT3)
            - math.pi / 6.0 * math.sqrt((7.0 * SQRT3 - 12.0) / 2.0)
            * math.sqrt(_sigma_tan(sigma) / n))


def nb_upper(n, sigma):
    """Largest number of peripheral disks, P(r)/(2r) at the Oler radius."""
    r_outer = oler_radius(n, sigma)
    return sigma * math.sin(math.pi / sigma) / r_outer


def nb_upper_asym(n, sigma):
    return math.sqrt(2.0 * SQRT3 * _sigma_tan(sigma) * n)


def bounds_report(n, sigma, r=None):
    """
    Evaluate every closed-form bound for n disks in a sigma-gon.

    Parameters:
    -----------
    n : int
        Number of disks (>= 2)
    sigma : int
        Number of sides
    r : float, optional
        Measured convention-I radius; the Fejes Toth, Groemer and Oler
        checks are evaluated there instead of at the Oler radius

    Returns:
    --------
    BoundsReport
    """
    _check(n, sigma)
    r_outer_upper = oler_radius(n, sigma)
    r_base_upper = outer_to_base(r_outer_upper, sigma)
    r_eval = r_base_upper if r is None else float(r)
    if r_eval <= 0:
        raise ValueError(f"radius must be > 0, got {r}")

    # Fejes Toth and Groemer are stated for unit disks
    m = measures(PolygonSpec(sigma), r_eval)
    area_unit = m.area / (r_eval * r_eval)
    perimeter_unit = m.perimeter / r_eval
    packed = n * math.sqrt(12.0)

    report = BoundsReport(
        n=int(n),
        sigma=int(sigma),
        fejes_toth_ok=bool(packed < area_unit),
        groemer_margin=area_unit - GROEMER_KAPPA * perimeter_unit + GROEMER_LAMBDA - packed,
        oler_max_disks=oler_capacity(base_to_outer(r_eval, sigma), sigma),
        r_upper=r_outer_upper,
        r_upper_base=r_base_upper,
        rho_upper=rho_upper(n, sigma),
        rho_upper_asym=rho_upper_asym(n, sigma),
        nb_upper=nb_upper(n, sigma),
        nb_upper_asym=nb_upper_asym(n, sigma),
        groemer_kappa=GROEMER_KAPPA,
        groemer_lambda=GROEMER_LAMBDA,
        r_evaluated=r_eval,
    )
    logger.debug(f"bounds for n={n}, sigma={sigma}: rho_upper={report.rho_upper:.12f}")
    return report


def _as_frame(records, columns):
    if isinstance(records, pd.DataFrame):
        frame = records
    else:
        frame = pd.DataFrame(list(records), columns=columns)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ValueError(f"records are missing columns: {missing}")
    return frame


def _least_squares(design, target):
    """Coefficients of target ~ design with no intercept; rejects rank-deficient designs."""
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise ValueError("rank-deficient fit: not enough distinct N for the coefficients")
    model = LinearRegression(fit_intercept=False)
    model.fit(design, target)
    return model.coef_


def fit_asymptotics(records):
    """
    Fit rho(N) = pi/sqrt(12) + a1/sqrt(N) + a2/N and N_B(N) = b1*sqrt(N) + b2 + b3/sqrt(N).

    Parameters:
    -----------
    records : DataFrame or iterable of (N, rho, N_b)
        At least five records spanning at least three distinct N

    Returns:
    --------
    AsymptoticFit
    """
    frame = _as_frame(records, ['N', 'rho', 'N_b'])
    if len(frame) < 5:
        raise ValueError(f"fit_asymptotics needs at least 5 records, got {len(frame)}")
    N = frame['N'].to_numpy(dtype=float)
    if np.any(N < 1):
        raise ValueError("N must be >= 1 in every record")
    root = np.sqrt(N)

    rho_design = np.column_stack([1.0 / root, 1.0 / N])
    a1, a2 = _least_squares(rho_design, frame['rho'].to_numpy(dtype=float) - RHO_PLANE)

    nb_design = np.column_stack([root, np.ones_like(N), 1.0 / root])
    b1, b2, b3 = _least_squares(nb_design, frame['N_b'].to_numpy(dtype=float))

    logger.info(f"Asymptotic fit over {len(frame)} records: a1={a1:.6g}, a2={a2:.6g}, b1={b1:.6g}")
    return AsymptoticFit(float(a1), float(a2), float(b1), float(b2), float(b3))


def fit_cell_fractions(records):
    """
    Fit Voronoi cell fractions against N.

    Pentagonal cells follow c1/sqrt(N) + c2/N and hexagonal cells
    1 - c1/sqrt(N) - c2/N.

    Parameters:
    -----------
    records : DataFrame or iterable of (N, pentagon_fraction, hexagon_fraction)

    Returns:
    --------
    dict
        {'pentagon': (c1, c2), 'hexagon': (c1, c2)}
    """
    frame = _as_frame(records, ['N', 'pentagon_fraction', 'hexagon_fraction'])
    N = frame['N'].to_numpy(dtype=float)
    design = np.column_stack([1.0 / np.sqrt(N), 1.0 / N])
    pentagon = _least_squares(design, frame['pentagon_fraction'].to_numpy(dtype=float))
    hexagon = _least_squares(design, 1.0 - frame['hexagon_fraction'].to_numpy(dtype=float))
    return {
        'pentagon': (float(pentagon[0]), float(pentagon[1])),
        'hexagon': (float(hexagon[0]), float(hexagon[1])),
    }
