"""Off-manifold deviation via damped Gauss-Newton projection.

Projects an ambient point onto the image of the network by minimizing
half ||f(z) - w_target||^2 with the exact Jacobian.  The final residual
is an upper bound on the distance from w_target to the manifold (local
optimization cannot certify the global minimum, and output headers say
so).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import network as netmod
from .errors import BoundaryWarning
from .traversal import TraversalPath

MAX_ITERS = 200
GRAD_TOL = 1e-10
LAMBDA_INIT = 1e-3
DEFAULT_RESTARTS = 8


@dataclass(frozen=True)
class ProjectionResult:
    z: np.ndarray
    residual: float
    converged: bool
    n_iters: int


def project_to_manifold(net, w_target, z_init, max_iters=MAX_ITERS, tol=GRAD_TOL):
    """Levenberg-damped Gauss-Newton from z_init; returns best-so-far.

    Non-convergence is reported through the flag, not an exception.
    """
    w_target = np.asarray(w_target, dtype=np.float64)
    z = np.asarray(z_init, dtype=np.float64).copy()
    lam = LAMBDA_INIT
    w, _ = netmod.forward(net, z)
    r = w - w_target
    cost = 0.5 * float(r @ r)
    best_z, best_cost = z.copy(), cost
    converged = False
    n_iters = 0
    eye = np.eye(net.in_dim)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        for n_iters in range(1, max_iters + 1):
            if cost == 0.0:
                converged = True
                break
            J = netmod.jacobian(net, z)
            g = J.T @ r
            if np.linalg.norm(g) <= tol:
                converged = True
                break
            H = J.T @ J
            accepted = False
            for _ in range(25):
                try:
                    delta = np.linalg.solve(H + lam * eye, -g)
                except np.linalg.LinAlgError:
                    lam *= 10.0
                    continue
                z_trial = z + delta
                w_trial, _ = netmod.forward(net, z_trial)
                r_trial = w_trial - w_target
                cost_trial = 0.5 * float(r_trial @ r_trial)
                if cost_trial < cost:
                    z, r, cost = z_trial, r_trial, cost_trial
                    lam = max(lam / 10.0, 1e-12)
                    accepted = True
                    break
                lam *= 10.0
            if cost < best_cost:
                best_z, best_cost = z.copy(), cost
            if not accepted:
                break
    return ProjectionResult(
        z=best_z,
        residual=float(np.sqrt(2.0 * best_cost)),
        converged=converged,
        n_iters=n_iters,
    )


def traversal_deviation(
    net, points, restarts=DEFAULT_RESTARTS, seed=0, z_hints=None
):
    """Best projection residual per point over restarts plus known hints.

    Accepts a TraversalPath (whose z iterates become hints, giving exact
    zeros) or an array of ambient points.  Returns a list of
    ProjectionResult, one per point.
    """
    if isinstance(points, TraversalPath):
        z_hints = [it.z for it in points.iterates]
        points = points.w_points
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if z_hints is not None and len(z_hints) != len(points):
        raise ValueError(
            f"{len(z_hints)} hints for {len(points)} points"
        )
    seeds = np.random.SeedSequence(seed).spawn(len(points))
    results = []
    for i, w_target in enumerate(points):
        candidates = []
        if z_hints is not None and z_hints[i] is not None:
            candidates.append(np.asarray(z_hints[i], dtype=np.float64))
        rng = np.random.default_rng(seeds[i])
        for _ in range(restarts):
            candidates.append(rng.standard_normal(net.in_dim))
        if not candidates:
            candidates.append(np.zeros(net.in_dim))
        best = None
        for z_init in candidates:
            res = project_to_manifold(net, w_target, z_init)
            if best is None or res.residual < best.residual:
                best = res
            if best.residual == 0.0:
                break
        results.append(best)
    return results
