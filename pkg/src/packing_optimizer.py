"""
Annealed Repulsion Packing Optimizer

This module searches dense packings of N congruent disks in a regular
polygon by minimizing a short-range repulsive energy over the (t, u)
parametrization of the inner polygon:

1. Random uniform start inside the polygon
2. Local minimization of V = sum (lambda/r_ij^2)^s F_i F_j at fixed s
3. Geometric growth of the exponent s up to s_fin, with the border
   repulsion exponent alpha decaying towards 0
4. Contact polish: the minimal center distance is maximized directly,
   settling disks the annealing left just short of the border or of
   each other
5. Disk radius read off as half the minimal center distance

Many independent restarts are run and the densest result is kept.
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, field
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.special import logsumexp

from polypack import config
from polypack.exceptions import DegenerateConfigurationError, NonFiniteEnergyError
from polypack.models.configuration import Configuration, minimal_distance
from polypack.models.geometry import (
    PolygonSpec, ParamPoint, border_gaps, canonical_params, edge_normals, gamma, gamma_prime,
    interior_points, sample_points, to_param,
)

# Set up logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverParams:
    """
    Annealing schedule, border repulsion and restart policy.

    The border exponent follows alpha(s) = alpha0 * s_in / s unless an
    explicit alpha_schedule callable is given.
    With polish on, the last stage is followed by contact_polish.
    """

    s_in: float = config.S_IN
    s_fin: float = config.S_FIN
    kappa: float = config.KAPPA
    alpha0: float = config.ALPHA0
    eps_border: float = config.EPS_BORDER
    restarts: int = config.RESTARTS
    seed: int = 0
    grad_tol: float = config.GRAD_TOL
    max_iter_per_s: int = config.MAX_ITER_PER_S
    threads: int = config.POLYPACK_THREADS
    polish: bool = config.POLISH
    polish_trust: float = config.POLISH_TRUST
    polish_max_iter: int = config.POLISH_MAX_ITER
    alpha_schedule: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kappa <= 1:
            raise ValueError(f"kappa must be > 1, got {self.kappa}")
        if self.s_in < 1:
            raise ValueError(f"s_in must be >= 1, got {self.s_in}")
        if self.s_fin < self.s_in:
            raise ValueError(f"s_fin ({self.s_fin}) must be >= s_in ({self.s_in})")
        if self.eps_border <= 0:
            raise ValueError(f"eps_border must be > 0, got {self.eps_border}")
        if self.alpha0 > 0:
            raise ValueError(f"alpha0 must be <= 0, got {self.alpha0}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.grad_tol <= 0 or self.max_iter_per_s < 1:
            raise ValueError("grad_tol must be > 0 and max_iter_per_s >= 1")
        if not 0 < self.polish_trust <= 0.1 or self.polish_max_iter < 1:
            raise ValueError("polish_trust must lie in (0, 0.1] and polish_max_iter >= 1")

    def alpha(self, s):
        if self.alpha_schedule is not None:
            value = float(self.alpha_schedule(s))
            if value > 0:
                raise ValueError(f"alpha_schedule({s}) = {value} is positive")
            return value
        return self.alpha0 * self.s_in / s

    def schedule(self):
        """Exponents visited by one annealing run, ending exactly at s_fin."""
        stages = [float(self.s_in)]
        while stages[-1] < self.s_fin:
            stages.append(min(stages[-1] * self.kappa, float(self.s_fin)))
        return stages

    def to_dict(self):
        values = asdict(self)
        values.pop('alpha_schedule')
        values['custom_alpha_schedule'] = self.alpha_schedule is not None
        return values

    def params_hash(self):
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]


@dataclass
class EnergyState:
    value: float
    gradient: np.ndarray  # (n, 2): d/dt_i, d/du_i
    lam: float            # squared minimal distance used in this evaluation


def _as_params(points):
    """Accept a list of ParamPoint or an (n, 2) array of (t, u) rows."""
    if len(points) and isinstance(points[0], ParamPoint):
        return np.array([[p.t, p.u] for p in points], dtype=float)
    return np.asarray(points, dtype=float).reshape(-1, 2)


class _PairGeometry:
    """Positions, Jacobians and pair data shared by value and gradient evaluations."""

    def __init__(self, params, sigma, s, alpha, eps):
        t, u = params[:, 0], params[:, 1]
        n = len(params)
        g = np.atleast_1d(gamma(u, 0.0, sigma))
        gp = np.atleast_1d(gamma_prime(u, sigma))
        sin_t2 = np.sin(t) ** 2
        e_u = np.column_stack([np.cos(u), np.sin(u)])
        e_perp = np.column_stack([-np.sin(u), np.cos(u)])

        self.x = (sin_t2 * g)[:, None] * e_u
        self.dx_dt = (np.sin(2.0 * t) * g)[:, None] * e_u
        self.dx_du = sin_t2[:, None] * (gp[:, None] * e_u + g[:, None] * e_perp)
        self.border = np.cos(t) ** 2 + eps
        self.border_slope = -alpha * np.sin(2.0 * t) / self.border

        self.i, self.j = np.triu_indices(n, 1)
        self.diff = self.x[self.i] - self.x[self.j]
        self.d2 = np.einsum('ij,ij->i', self.diff, self.diff)
        self.n = n
        self.s = s
        self.alpha = alpha

    def log_terms(self, log_lam):
        """log of each pair term (lambda/d^2)^s F_i F_j."""
        with np.errstate(divide='ignore'):
            log_d2 = np.log(self.d2)
        log_b = np.log(self.border)
        return self.s * (log_lam - log_d2) + self.alpha * (log_b[self.i] + log_b[self.j])

    def gradient(self, weights):
        """Gradient over (t, u) of sum_k weights_k * log-term_k."""
        coeff = (-2.0 * self.s * weights / self.d2)[:, None] * self.diff
        gx = np.zeros((self.n, 2))
        np.add.at(gx, self.i, coeff)
        np.add.at(gx, self.j, -coeff)
        weight_sum = (np.bincount(self.i, weights, minlength=self.n)
                      + np.bincount(self.j, weights, minlength=self.n))
        dt = np.einsum('ij,ij->i', gx, self.dx_dt) + self.border_slope * weight_sum
        du = np.einsum('ij,ij->i', gx, self.dx_du)
        return np.column_stack([dt, du])


def energy(points, sigma, s, alpha, eps, lam=None):
    """
    Repulsive energy with border repulsion and its analytic gradient.

    Parameters:
    -----------
    points : list of ParamPoint or ndarray of shape (n, 2)
        Centers as (t, u) parameters
    sigma : int
        Number of sides
    s : float
        Repulsion exponent (>= 1)
    alpha : float
        Border repulsion exponent (<= 0)
    eps : float
        Border softening (> 0)
    lam : float, optional
        Length scale lambda; defaults to the minimal squared distance

    Returns:
    --------
    EnergyState
    """
    params = _as_params(points)
    if len(params) < 2:
        raise ValueError("energy needs at least two points")
    if s < 1 or eps <= 0 or alpha > 0:
        raise ValueError(f"invalid energy parameters s={s}, alpha={alpha}, eps={eps}")
    geo = _PairGeometry(params, sigma, s, alpha, eps)
    if np.any(geo.d2 <= 0):
        raise DegenerateConfigurationError("coincident points in energy evaluation")
    lam = float(geo.d2.min()) if lam is None else float(lam)

    terms = np.exp(geo.log_terms(math.log(lam)))
    value = float(terms.sum())
    return EnergyState(value=value, gradient=geo.gradient(terms), lam=lam)


def local_minimize(points, sigma, s, alpha, eps, grad_tol=config.GRAD_TOL,
                   max_iter=config.MAX_ITER_PER_S):
    """
    Minimize the energy at fixed s with L-BFGS-B.

    The objective is log V at the starting lambda, a monotone transform of
    V whose value and gradient stay consistent when the minimal pair
    changes. Returns the canonical (t, u) parameters as an (n, 2) array;
    the input is returned unchanged when its gradient is already below
    grad_tol.
    """
    params = _as_params(points)
    n = len(params)
    start = energy(params, sigma, s, alpha, eps)
    log_lam = math.log(start.lam)
    last_finite = {'z': params.reshape(-1).copy()}

    def objective(z):
        geo = _PairGeometry(z.reshape(n, 2), sigma, s, alpha, eps)
        logs = geo.log_terms(log_lam)
        value = logsumexp(logs)
        if not np.isfinite(value):
            raise NonFiniteEnergyError(
                f"non-finite energy at s={s}",
                points=canonical_params(*last_finite['z'].reshape(n, 2).T),
            )
        last_finite['z'] = z.copy()
        weights = np.exp(logs - value)
        return float(value), geo.gradient(weights).reshape(-1)

    value0, grad0 = objective(params.reshape(-1))
    if np.max(np.abs(grad0)) <= grad_tol:
        return params.copy()

    result = minimize(
        objective,
        params.reshape(-1),
        method='L-BFGS-B',
        jac=True,
        options={'maxiter': int(max_iter), 'gtol': grad_tol, 'ftol': 1e-15, 'maxcor': 20},
    )
    z = result.x
    if not result.fun <= value0:
        # never hand back a worse point than the start
        z = params.reshape(-1)
    t, u = canonical_params(*z.reshape(n, 2).T)
    return np.column_stack([np.atleast_1d(t), np.atleast_1d(u)])


def _polish_pass(points, sigma, trust, max_iter):
    """One SLSQP solve of max d over the pairs and edges that can bind."""
    n = len(points)
    d0 = minimal_distance(points)
    delta = trust * d0
    size = 2 * n + 1

    # a coordinate moves at most delta, so a pair distance changes by
    # less than 3 delta and an edge gap by less than 1.5 delta
    i, j = np.triu_indices(n, 1)
    near = np.hypot(*(points[i] - points[j]).T) <= d0 + 6.0 * delta
    pi, pj = i[near], j[near]
    rows, edges = np.nonzero(border_gaps(points, sigma) <= 2.0 * delta)
    normals = edge_normals(sigma)[edges]
    apothem = math.cos(math.pi / sigma)
    scale2 = d0 ** 2

    def objective(z):
        grad = np.zeros(size)
        grad[-1] = -1.0 / d0
        return -z[-1] / d0, grad

    def pair_values(z):
        x = z[:-1].reshape(n, 2)
        diff = x[pi] - x[pj]
        return (np.einsum('ij,ij->i', diff, diff) - z[-1] ** 2) / scale2

    def pair_jacobian(z):
        x = z[:-1].reshape(n, 2)
        diff = 2.0 * (x[pi] - x[pj]) / scale2
        jac = np.zeros((len(pi), size))
        k = np.arange(len(pi))
        jac[k, 2 * pi] = diff[:, 0]
        jac[k, 2 * pi + 1] = diff[:, 1]
        jac[k, 2 * pj] = -diff[:, 0]
        jac[k, 2 * pj + 1] = -diff[:, 1]
        jac[:, -1] = -2.0 * z[-1] / scale2
        return jac

    constraints = [{'type': 'ineq', 'fun': pair_values, 'jac': pair_jacobian}]
    if len(rows):
        edge_jac = np.zeros((len(rows), size))
        k = np.arange(len(rows))
        edge_jac[k, 2 * rows] = -normals[:, 0] / d0
        edge_jac[k, 2 * rows + 1] = -normals[:, 1] / d0
        constraints.append({
            'type': 'ineq',
            'fun': lambda z: (apothem - np.einsum('ij,ij->i', z[:-1].reshape(n, 2)[rows], normals)) / d0,
            'jac': lambda z: edge_jac,
        })

    z0 = np.append(points.reshape(-1), d0)
    bounds = [(c - delta, c + delta) for c in points.reshape(-1)] + [(0.0, d0 + 3.0 * delta)]
    result = minimize(objective, z0, method='SLSQP', jac=True, bounds=bounds,
                      constraints=constraints, options={'maxiter': int(max_iter), 'ftol': 1e-16})
    polished = result.x[:-1].reshape(n, 2)
    if not np.all(np.isfinite(polished)):
        return points
    # back through the parametrization: centers past an edge land on it
    t, u = to_param(polished, sigma)
    return interior_points(t, u, sigma)


def contact_polish(points, sigma, trust=config.POLISH_TRUST, max_iter=config.POLISH_MAX_ITER, passes=3):
    """
    Push a near-jammed configuration onto its contacts.

    Annealing stops a little short of the border and of tangency, where
    the (t, u) parametrization flattens out. This maximizes the minimal
    center distance d in Cartesian coordinates with SLSQP: near pairs stay
    at least d apart, centers near an edge stay inside it, and every
    coordinate stays within trust * d_min of its start.

    Parameters:
    -----------
    points : ndarray of shape (n, 2)
        Convention-I centers
    sigma : int
        Number of sides
    trust : float
        Move bound relative to d_min (at most 0.1)
    max_iter : int
        SLSQP iterations per pass
    passes : int
        Solves, each with pairs and edges re-selected

    Returns:
    --------
    ndarray of shape (n, 2)
        The polished centers, or the input when d_min does not grow
    """
    best = np.asarray(points, dtype=float).reshape(-1, 2).copy()
    if len(best) < 2:
        return best
    best_d = minimal_distance(best)
    for _ in range(passes):
        candidate = _polish_pass(best, sigma, trust, max_iter)
        d = minimal_distance(candidate)
        if not d > best_d:
            break
        gain = d / best_d - 1.0
        best, best_d = candidate, d
        if gain < 1e-14:
            break
    return best


def derive_run_seed(seed, run_index):
    """Seed of restart run_index, independent of execution order."""
    return int(np.random.SeedSequence([int(seed), int(run_index)]).generate_state(1)[0])


class PackingOptimizer:
    """
    Multi-restart annealing driver.

    Each restart samples a uniform start, anneals it through the s
    schedule and reports the packing fraction of the result. The densest
    run is kept, ties resolved by the lowest run index.
    """

    def __init__(self, params=None):
        """
        Initialize the optimizer.

        Parameters:
        -----------
        params : SolverParams, optional
            Schedule and restart policy (defaults from the environment)
        """
        self.params = params or SolverParams()
        self.trace = []

    def anneal_run(self, spec, n, run_seed, run_index=0):
        """
        One annealing run from a uniform random start.

        Returns:
        --------
        (Configuration, list of dict)
            The configuration with r = d_min/2 and the per-stage trace rows
            (one more row for the contact polish when it is on)
        """
        spec = spec if isinstance(spec, PolygonSpec) else PolygonSpec(spec)
        if n < 2:
            raise ValueError(f"anneal_run needs n >= 2, got {n}")
        p = self.params
        rng = np.random.default_rng(run_seed)
        t, u = to_param(sample_points(n, spec.sigma, rng), spec.sigma)
        params = np.column_stack([t, u])

        trace = []
        for s in p.schedule():
            params = local_minimize(params, spec.sigma, s, p.alpha(s), p.eps_border,
                                    p.grad_tol, p.max_iter_per_s)
            trace.append(self._stage_row(spec.sigma, params, s, run_index))

        provenance = {
            'seed': int(p.seed),
            'run_index': int(run_index),
            'run_seed': int(run_seed),
            'params_hash': p.params_hash(),
            'method': 'anneal',
        }
        if p.polish:
            before = trace[-1]['d_min']
            points = contact_polish(interior_points(params[:, 0], params[:, 1], spec.sigma),
                                    spec.sigma, p.polish_trust, p.polish_max_iter)
            t, u = to_param(points, spec.sigma)
            params = np.column_stack([t, u])
            trace.append(self._stage_row(spec.sigma, params, p.s_fin, run_index))
            provenance['polish_gain'] = trace[-1]['d_min'] / before - 1.0

        cfg = Configuration.from_params(
            spec.sigma, params[:, 0], params[:, 1],
            convention=spec.convention,
            provenance=provenance,
        )
        if cfg.r <= 0:
            raise DegenerateConfigurationError(f"run {run_index} collapsed two centers")
        return cfg, trace

    def _stage_row(self, sigma, params, s, run_index):
        p = self.params
        state = energy(params, sigma, s, p.alpha(s), p.eps_border)
        d_min = math.sqrt(state.lam)
        logger.debug(f"run {run_index} s={s:.4g} V={state.value:.6g} d_min={d_min:.12f}")
        return {
            'run_index': int(run_index),
            's': float(s),
            'V': state.value,
            'd_min': d_min,
            'rho': Configuration(sigma, params, d_min / 2.0).rho,
        }

    def multi_restart(self, spec, n, trace_path=None):
        """
        Run params.restarts independent anneals and keep the densest.

        Parameters:
        -----------
        spec : PolygonSpec
            Container
        n : int
            Number of disks
        trace_path : str, optional
            Where to write the line-delimited run log

        Returns:
        --------
        Configuration
        """
        spec = spec if isinstance(spec, PolygonSpec) else PolygonSpec(spec)
        p = self.params
        jobs = [(spec, n, p, derive_run_seed(p.seed, k), k) for k in range(p.restarts)]

        if p.threads > 1 and p.restarts > 1 and p.alpha_schedule is None:
            with ProcessPoolExecutor(max_workers=p.threads) as pool:
                outcomes = list(pool.map(_run_job, jobs))
        else:
            outcomes = [_run_job(job) for job in jobs]

        best = None
        self.trace = []
        for run_index, cfg, trace in outcomes:
            self.trace.extend(trace)
            if cfg is None:
                continue
            logger.info(f"Run {run_index}: rho = {cfg.rho:.12f}")
            if best is None or cfg.rho > best.rho:
                best = cfg

        if trace_path:
            pd.DataFrame(self.trace).to_json(trace_path, orient='records', lines=True)

        if best is None:
            raise DegenerateConfigurationError(f"all {p.restarts} runs failed for n={n}, sigma={spec.sigma}")
        best.provenance['restarts'] = int(p.restarts)
        logger.info(f"Best of {p.restarts} runs: run {best.provenance['run_index']}, rho = {best.rho:.12f}")
        return best


def _run_job(job):
    spec, n, params, run_seed, run_index = job
    try:
        cfg, trace = PackingOptimizer(params).anneal_run(spec, n, run_seed, run_index)
        return run_index, cfg, trace
    except (DegenerateConfigurationError, NonFiniteEnergyError) as e:
        logger.warning(f"Run {run_index} discarded: {e}")
        return run_index, None, []


def anneal_run(spec, n, params, run_seed, run_index=0):
    """Single annealing run; see PackingOptimizer.anneal_run."""
    cfg, _ = PackingOptimizer(params).anneal_run(spec, n, run_seed, run_index)
    return cfg


def multi_restart(spec, n, params, trace_path=None):
    """Best of params.restarts annealing runs; see PackingOptimizer.multi_restart."""
    return PackingOptimizer(params).multi_restart(spec, n, trace_path)
