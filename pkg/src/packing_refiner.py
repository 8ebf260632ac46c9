"""
Packing Refinement

Improves configurations produced by the annealing optimizer:

1. shake: random perturbation followed by re-annealing, accepting only
   denser results and shrinking the perturbation when stuck
2. variance_refine: equalizes the squared lengths of all near-contacts by
   minimizing their variance with small bounded moves
3. find_holes / fill_holes: moves low-contact border disks into holes
   large enough for a disk, then shakes
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from polypack import config
from polypack.exceptions import NoContactsError
from polypack.models.configuration import minimal_distance
from polypack.models.geometry import Point2, border_gaps, gamma, gamma_prime, interior_points, to_param
from polypack.utils.metrics import contact_counts, contact_pairs, contact_variance
from polypack.utils.topology import clip_cells
from packing_optimizer import SolverParams, contact_polish, local_minimize

# Set up logging
logger = logging.getLogger(__name__)


def _default_shake_schedule():
    return SolverParams(s_in=config.SHAKE_S_IN, alpha0=0.0, restarts=1)


@dataclass
class RefineParams:
    """
    Knobs of the three refinement procedures.

    eta defaults to ETA_FACTOR * d_min of the configuration being refined.
    """

    eta: float = None
    step_scale: float = config.STEP_SCALE
    runs_per_cycle: int = config.RUNS_PER_CYCLE
    shrink_factor: float = 10.0
    shake_amplitude: float = config.SHAKE_AMPLITUDE
    shake_schedule: SolverParams = field(default_factory=_default_shake_schedule)
    max_shakes: int = 200
    min_amplitude: float = 1e-10
    min_step_scale: float = 1e-14
    variance_target: float = 1e-28
    max_cycles: int = 200
    contact_tol: float = config.CONTACT_TOL
    hole_tol: float = config.HOLE_TOL
    border_tol: float = 1e-6

    def __post_init__(self):
        if self.eta is not None and self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if self.step_scale <= 0:
            raise ValueError(f"step_scale must be > 0, got {self.step_scale}")
        if self.shrink_factor <= 1:
            raise ValueError(f"shrink_factor must be > 1, got {self.shrink_factor}")
        if self.shake_amplitude < 0 or self.runs_per_cycle < 1:
            raise ValueError("shake_amplitude must be >= 0 and runs_per_cycle >= 1")


@dataclass
class ContactSet:
    pairs: list
    border_indices: set
    free_indices: set
    threshold: float

    @property
    def moving_indices(self):
        """Disks in at least one pair that are not on the border."""
        paired = {i for i, _, _ in self.pairs} | {j for _, j, _ in self.pairs}
        return sorted(paired - self.border_indices)

    @property
    def sliding_indices(self):
        """Border disks in at least one pair; they move along the border only."""
        paired = {i for i, _, _ in self.pairs} | {j for _, j, _ in self.pairs}
        return sorted(paired & self.border_indices)


def contact_set(cfg, eta):
    """
    Near-contacts of cfg at threshold eta.

    Pairs satisfy 0 <= d - d_min < eta (the minimal pair itself included),
    border disks are within eta of an edge and free disks have neither.
    """
    points = cfg.points
    d_min = minimal_distance(points)
    pairs = [
        (i, j, d) for i, j, d in contact_pairs(points, d_min / 2.0, eta / d_min)
        if d - d_min < eta
    ]
    gaps = border_gaps(points, cfg.sigma).min(axis=1)
    border = {int(i) for i in np.nonzero(gaps <= eta)[0]}
    paired = {i for i, _, _ in pairs} | {j for _, j, _ in pairs}
    free = set(range(cfg.n)) - paired - border
    return ContactSet(pairs, border, free, float(eta))


class PackingRefiner:
    """
    Shake, variance and hole-filling refinement of a configuration.

    All procedures only accept strictly denser configurations, so the
    returned packing fraction never drops below the input's.
    """

    def __init__(self, params=None):
        self.params = params or RefineParams()

    def _reanneal(self, cfg, params):
        schedule = self.params.shake_schedule
        for s in schedule.schedule():
            params = local_minimize(params, cfg.sigma, s, schedule.alpha(s),
                                    schedule.eps_border, schedule.grad_tol,
                                    schedule.max_iter_per_s)
        if schedule.polish:
            points = contact_polish(interior_points(params[:, 0], params[:, 1], cfg.sigma), cfg.sigma,
                                    schedule.polish_trust, schedule.polish_max_iter)
            t, u = to_param(points, cfg.sigma)
            params = np.column_stack([t, u])
        return params

    def shake(self, cfg, seed=0):
        """
        Perturb, re-anneal, keep only density improvements.

        The perturbation amplitude is divided by shrink_factor after
        runs_per_cycle consecutive rejections.
        """
        p = self.params
        rng = np.random.default_rng(seed)
        best = cfg
        amplitude = p.shake_amplitude
        failures = 0
        accepted = 0

        for run in range(p.max_shakes):
            if amplitude < p.min_amplitude:
                break
            jitter = amplitude * rng.uniform(-1.0, 1.0, size=(best.n, 2))
            t, u = to_param(best.points + jitter, best.sigma)
            params = self._reanneal(best, np.column_stack([t, u]))
            d_min = minimal_distance(best.replace(params=params).points)
            if d_min <= 0:
                failures += 1
                continue
            candidate = best.replace(params=params, r=d_min / 2.0)
            if candidate.rho > best.rho:
                best = candidate
                accepted += 1
                failures = 0
                logger.debug(f"shake run {run}: accepted rho = {best.rho:.15f}")
            else:
                failures += 1
                if failures >= p.runs_per_cycle:
                    amplitude /= p.shrink_factor
                    failures = 0

        if accepted:
            best.provenance['shake'] = {'seed': int(seed), 'accepted': accepted}
            logger.info(f"Shake improved rho from {cfg.rho:.15f} to {best.rho:.15f}")
        return best

    def _propose(self, points, contacts, step_scale, sigma):
        """Minimize the contact variance with bounded moves; returns new points."""
        moving = contacts.moving_indices
        sliding = contacts.sliding_indices
        n_moving = len(moving)
        pair_i = np.array([p[0] for p in contacts.pairs])
        pair_j = np.array([p[1] for p in contacts.pairs])
        slide_u = np.mod(np.arctan2(points[sliding, 1], points[sliding, 0]), 2.0 * np.pi) if sliding else np.array([])

        def place(v):
            pts = points.copy()
            if n_moving:
                pts[moving] = points[moving] + step_scale * v[:2 * n_moving].reshape(-1, 2)
            if sliding:
                u = slide_u + step_scale * v[2 * n_moving:]
                radius = np.atleast_1d(gamma(u, 0.0, sigma))
                pts[sliding] = radius[:, None] * np.column_stack([np.cos(u), np.sin(u)])
            return pts

        sigma0 = contact_variance(place(np.zeros(2 * n_moving + len(sliding))), contacts.pairs)
        if sigma0 <= 0:
            return place(np.zeros(2 * n_moving + len(sliding)))

        def objective(v):
            pts = place(v)
            diff = pts[pair_i] - pts[pair_j]
            d2 = np.einsum('ij,ij->i', diff, diff)
            dev = d2 - d2.mean()
            value = np.mean(dev ** 2) / sigma0
            # d(value)/d(d2_k) = 2 dev_k / p; d(d2_k)/dx_i = 2 diff_k
            coeff = (4.0 * dev / len(d2) / sigma0)[:, None] * diff
            gx = np.zeros_like(pts)
            np.add.at(gx, pair_i, coeff)
            np.add.at(gx, pair_j, -coeff)
            grad = [step_scale * gx[moving].reshape(-1)]
            if sliding:
                u = slide_u + step_scale * v[2 * n_moving:]
                g = np.atleast_1d(gamma(u, 0.0, sigma))
                gp = np.atleast_1d(gamma_prime(u, sigma))
                tangent = (gp[:, None] * np.column_stack([np.cos(u), np.sin(u)])
                           + g[:, None] * np.column_stack([-np.sin(u), np.cos(u)]))
                grad.append(step_scale * np.einsum('ij,ij->i', gx[sliding], tangent))
            return float(value), np.concatenate(grad)

        size = 2 * n_moving + len(sliding)
        result = minimize(objective, np.zeros(size), method='L-BFGS-B', jac=True,
                          bounds=[(-1.0, 1.0)] * size,
                          options={'maxiter': 2000, 'ftol': 1e-300, 'gtol': 1e-300})
        return place(result.x)

    def variance_refine(self, cfg):
        """
        Contact-variance minimization.

        Each run rebuilds the contact set at the current threshold, moves
        contact disks (border disks only along the border, free disks
        fixed) to minimize the variance of the squared contact lengths and
        accepts the move when the density rises without the variance
        growing. A cycle without acceptance divides step_scale and eta by
        shrink_factor.

        Raises:
        -------
        NoContactsError
            When no pair lies within eta of the minimal distance
        """
        p = self.params
        best = cfg
        d_min = cfg.d_min()
        eta = p.eta if p.eta is not None else config.ETA_FACTOR * d_min
        step_scale = p.step_scale

        contacts = contact_set(best, eta)
        if not contacts.pairs:
            raise NoContactsError(f"no contacts within eta = {eta!r} of d_min")
        variance = contact_variance(best.points, contacts.pairs)
        history = [{'step_scale': step_scale, 'eta': eta, 'variance': variance, 'rho': best.rho}]

        for _ in range(p.max_cycles):
            if variance <= p.variance_target or step_scale < p.min_step_scale:
                break
            improved = False
            for _ in range(p.runs_per_cycle):
                contacts = contact_set(best, eta)
                if not contacts.pairs:
                    break
                current = contact_variance(best.points, contacts.pairs)
                points = self._propose(best.points, contacts, step_scale, best.sigma)
                candidate = best.with_points(points, r=best.r)
                # border disks sit exactly on the edge
                if contacts.sliding_indices:
                    params = candidate.params.copy()
                    params[contacts.sliding_indices, 0] = np.pi / 2.0
                    candidate = candidate.replace(params=params)
                d_new = candidate.d_min()
                if d_new <= 0:
                    break
                candidate = candidate.replace(r=d_new / 2.0)
                new_variance = contact_variance(candidate.points, contacts.pairs)
                if candidate.rho > best.rho and new_variance <= current:
                    best = candidate
                    variance = contact_variance(best.points, contact_set(best, eta).pairs)
                    improved = True
                    history.append({'step_scale': step_scale, 'eta': eta,
                                    'variance': variance, 'rho': best.rho})
                    if variance <= p.variance_target:
                        break
                else:
                    # the proposal is deterministic, repeating it cannot help
                    break
            if not improved:
                step_scale /= p.shrink_factor
                eta /= p.shrink_factor
                logger.debug(f"variance cycle stalled; step_scale={step_scale:.3g}, eta={eta:.3g}")

        best = best.replace()
        best.provenance['variance'] = variance
        best.provenance['variance_history'] = history
        logger.info(f"Variance refinement: rho {cfg.rho:.15f} -> {best.rho:.15f}, variance {variance:.3e}")
        return best

    def find_holes(self, cfg, tol_hole=None):
        """
        Points of the inner polygon where an extra disk would fit.

        Candidates are the corners of the Voronoi cells clipped to the
        inner polygon; a candidate is a hole when its distance to every
        center is at least 2r(1 - tol_hole). Holes closer than 2r to an
        already selected hole are skipped, largest clearance first.
        """
        tol_hole = self.params.hole_tol if tol_hole is None else tol_hole
        points = cfg.points
        need = 2.0 * cfg.r * (1.0 - tol_hole)
        candidates = [corner for polygon, _ in clip_cells(points, cfg.sigma, 1.0) for corner in polygon]
        if not candidates:
            return []
        candidates = np.array(candidates)
        clearance = np.min(np.hypot(candidates[:, None, 0] - points[None, :, 0],
                                    candidates[:, None, 1] - points[None, :, 1]), axis=1)
        holes = []
        for k in np.argsort(-clearance, kind='stable'):
            if clearance[k] < need:
                break
            site = candidates[k]
            if all(math.hypot(*(site - h)) >= need for h in holes):
                holes.append(site)
        return [Point2(float(x), float(y)) for x, y in holes]

    def _pick_border_disks(self, cfg, count, seed):
        """Low-contact border disks, preferring ones touching the previous pick."""
        points = cfg.points
        gaps = border_gaps(points, cfg.sigma).min(axis=1)
        border = np.nonzero(gaps <= self.params.border_tol * cfg.r)[0]
        counts = contact_counts(points, cfg.sigma, cfg.r, self.params.border_tol)
        rng = np.random.default_rng(seed)
        ties = rng.permutation(len(border))
        ranked = [int(border[k]) for k in np.lexsort((ties, counts[border]))]
        touching = {}
        for i, j, _ in contact_pairs(points, cfg.r, self.params.border_tol):
            touching.setdefault(i, set()).add(j)
            touching.setdefault(j, set()).add(i)

        chosen = []
        while ranked and len(chosen) < count:
            nxt = ranked[0]
            if chosen:
                partners = [k for k in ranked if k in touching.get(chosen[-1], ())]
                if partners:
                    nxt = partners[0]
            chosen.append(nxt)
            ranked.remove(nxt)
        return chosen

    def fill_holes(self, cfg, seed=0, extra_disks=0):
        """
        Move border disks into holes (or add extra_disks new disks) and shake.

        When relocating, the better of the input and the result is returned.
        With extra_disks = k, up to k holes receive new disks and the
        shaken (n + k)-disk configuration is returned.
        """
        holes = self.find_holes(cfg)
        if not holes:
            return cfg
        hole_array = np.array([[h.x, h.y] for h in holes])

        if extra_disks:
            added = hole_array[:extra_disks]
            points = np.vstack([cfg.points, added])
            grown = cfg.with_points(points, r=minimal_distance(points) / 2.0, filled_holes=len(added))
            logger.info(f"Added {len(added)} disks into holes: n {cfg.n} -> {grown.n}")
            return self.shake(grown, seed)

        chosen = self._pick_border_disks(cfg, len(holes), seed)
        if not chosen:
            return cfg
        points = cfg.points.copy()
        points[chosen] = hole_array[:len(chosen)]
        moved = cfg.with_points(points, r=minimal_distance(points) / 2.0, filled_holes=len(chosen))
        result = self.shake(moved, seed)
        logger.info(f"Hole filling: {len(chosen)} disks moved, rho {cfg.rho:.15f} -> {result.rho:.15f}")
        return result if result.rho > cfg.rho else cfg


def shake(cfg, params=None, seed=0):
    return PackingRefiner(params).shake(cfg, seed)


def variance_refine(cfg, params=None):
    return PackingRefiner(params).variance_refine(cfg)


def find_holes(cfg, tol_hole=config.HOLE_TOL):
    return PackingRefiner().find_holes(cfg, tol_hole)


def fill_holes(cfg, params=None, seed=0, extra_disks=0):
    return PackingRefiner(params).fill_holes(cfg, seed, extra_disks)
