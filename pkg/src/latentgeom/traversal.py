"""Linear and iterative curve traversals of the latent manifold.

Linear traversal moves along one frame direction; the iterative variant
re-computes the frame each step, re-selects the most similar direction,
and aligns its orientation, so every iterate stays on the manifold by
construction.  Guided variants compare against an externally supplied
global direction instead of the previous step.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import network as netmod
from .errors import InvalidDirectionError, RankDeficiencyError, ShapeError
from .local_basis import local_basis


class TraversalMode(str, enum.Enum):
    LINEAR = "linear"
    ITERATIVE = "iterative"
    GUIDED_ITERATIVE = "guided_iterative"
    STOCHASTIC_GUIDED = "stochastic_guided"


class SimilarityTarget(str, enum.Enum):
    GLOBAL_EVERY_STEP = "global_every_step"
    PREVIOUS_DIRECTION = "previous_direction"


@dataclass(frozen=True)
class FixedStepPolicy:
    """All steps have length intensity / n_steps."""


@dataclass(frozen=True)
class UniformRandomStepPolicy:
    """Step lengths drawn from U[lo, hi]; stops once the budget is spent.

    The final step is truncated so the cumulative length lands exactly on
    the requested intensity.
    """

    lo: float = 0.05
    hi: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError(f"need 0 < lo < hi, got lo={self.lo}, hi={self.hi}")


@dataclass(frozen=True)
class Iterate:
    """One traversal point: latent pair plus the departure bookkeeping."""

    z: np.ndarray
    w: np.ndarray
    direction_index: int
    step_direction: np.ndarray
    sigma: float


@dataclass(frozen=True)
class TraversalPath:
    iterates: tuple
    intensity: float
    n_steps: int
    mode: TraversalMode

    def __post_init__(self):
        if len(self.iterates) != self.n_steps + 1:
            raise ValueError(
                f"expected {self.n_steps + 1} iterates, got {len(self.iterates)}"
            )

    @property
    def z_points(self):
        return np.stack([it.z for it in self.iterates])

    @property
    def w_points(self):
        return np.stack([it.w for it in self.iterates])

    def to_dict(self):
        return {
            "mode": self.mode.value,
            "intensity": self.intensity,
            "n_steps": self.n_steps,
            "iterates": [
                {
                    "z": it.z.tolist(),
                    "w": it.w.tolist(),
                    "direction_index": it.direction_index,
                    "step_direction": it.step_direction.tolist(),
                    "sigma": it.sigma,
                }
                for it in self.iterates
            ],
        }


@dataclass(frozen=True)
class LinearTraversal:
    """Straight line in the ambient space plus its latent pushforward.

    w_line is w + t v_k; w_push is f(z + (t / sigma_k) u_k).  The two
    coincide while the segment stays inside one activation cell.
    """

    ts: np.ndarray
    z_points: np.ndarray
    w_line: np.ndarray
    w_push: np.ndarray
    direction_index: int
    sigma: float


def _check_direction(frame, k):
    u, sigma, v = frame.direction(k)
    if sigma <= frame.rank_tol():
        raise RankDeficiencyError(
            f"sigma_{k} = {sigma:.3e} is below rank tolerance"
        )
    return u, sigma, v


def linear_traverse(net, frame, k, intensity, n_points):
    """Samples the linear traversal at n_points evenly spaced t in [0, I]."""
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    u, sigma, v = _check_direction(frame, k)
    ts = np.linspace(0.0, float(intensity), n_points)
    z_points = frame.z[None, :] + (ts / sigma)[:, None] * u[None, :]
    w_line = frame.w[None, :] + ts[:, None] * v[None, :]
    w_push = np.stack([netmod.forward(net, z)[0] for z in z_points])
    return LinearTraversal(
        ts=ts,
        z_points=z_points,
        w_line=w_line,
        w_push=w_push,
        direction_index=k,
        sigma=sigma,
    )


def _select_direction(frame, reference):
    """Most similar frame direction to `reference`, orientation-aligned.

    Ties in |cosine| resolve to the smaller index via argmax.
    """
    cosines = frame.V.T @ reference
    j = int(np.argmax(np.abs(cosines)))
    orient = 1.0 if cosines[j] >= 0 else -1.0
    return j + 1, orient


def _run_steps(net, z0, step_lengths, pick_first, pick_next, mode, intensity):
    """Shared stepping loop; pick_* return (index, orientation) per frame."""
    iterates = []
    z = np.asarray(z0, dtype=np.float64)
    reference = None
    for n, step in enumerate(step_lengths):
        frame = local_basis(net, z)
        if n == 0:
            j, orient = pick_first(frame)
        else:
            j, orient = pick_next(frame, reference)
        u, sigma, v = frame.direction(j)
        if sigma <= frame.rank_tol():
            raise RankDeficiencyError(
                f"step {n}: selected direction {j} has sigma {sigma:.3e}",
                partial_path=TraversalPath(
                    iterates=tuple(iterates)
                    + (Iterate(frame.z, frame.w, j, v, sigma),),
                    intensity=intensity,
                    n_steps=n,
                    mode=mode,
                ),
            )
        u = orient * u
        v = orient * v
        iterates.append(Iterate(frame.z, frame.w, j, netmod._as_readonly(v), sigma))
        reference = v
        z = z + (step / sigma) * u
    w_end, _ = netmod.forward(net, z)
    last = iterates[-1]
    iterates.append(
        Iterate(
            netmod._as_readonly(z),
            netmod._as_readonly(w_end),
            last.direction_index,
            last.step_direction,
            last.sigma,
        )
    )
    return TraversalPath(
        iterates=tuple(iterates),
        intensity=intensity,
        n_steps=len(step_lengths),
        mode=mode,
    )


def iterative_traverse(net, z0, k, intensity, n_steps, sign=1):
    """Iterative curve traversal departing along frame direction k.

    Each step re-computes the frame at the current iterate, picks the
    direction with the largest |cosine| to the previous one, aligns its
    orientation, and advances by intensity / (n_steps * sigma) in the
    input space.  sign=-1 runs the reversed branch.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    step = float(intensity) / n_steps
    return _run_steps(
        net,
        z0,
        [step] * n_steps,
        pick_first=lambda frame: (k, float(sign)),
        pick_next=_select_direction,
        mode=TraversalMode.ITERATIVE,
        intensity=float(intensity),
    )


def _step_lengths(policy, intensity, n_steps):
    if isinstance(policy, FixedStepPolicy):
        if n_steps is None or n_steps < 1:
            raise ValueError("fixed step policy needs n_steps >= 1")
        return [float(intensity) / n_steps] * n_steps
    if isinstance(policy, UniformRandomStepPolicy):
        rng = np.random.default_rng(policy.seed)
        lengths = []
        total = 0.0
        while total < intensity:
            step = float(rng.uniform(policy.lo, policy.hi))
            if total + step >= intensity:
                step = float(intensity) - total
                lengths.append(step)
                break
            lengths.append(step)
            total += step
        return lengths
    raise TypeError(f"unknown step policy {policy!r}")


def guided_iterative_traverse(
    net,
    z0,
    v_global,
    intensity,
    n_steps=None,
    step_policy=FixedStepPolicy(),
    similarity_target=SimilarityTarget.GLOBAL_EVERY_STEP,
):
    """Iterative traversal steered by an external global direction.

    With GLOBAL_EVERY_STEP every step re-selects against v_global; with
    PREVIOUS_DIRECTION only the first step does, and later steps follow
    the previously chosen direction.
    """
    v_global = np.asarray(v_global, dtype=np.float64)
    if v_global.shape != (net.out_dim,):
        raise InvalidDirectionError(
            f"expected guide of shape ({net.out_dim},), got {v_global.shape}"
        )
    norm = np.linalg.norm(v_global)
    if norm == 0:
        raise InvalidDirectionError("guide direction is zero")
    guide = v_global / norm
    similarity_target = SimilarityTarget(similarity_target)
    lengths = _step_lengths(step_policy, float(intensity), n_steps)
    if similarity_target is SimilarityTarget.GLOBAL_EVERY_STEP:
        pick_next = lambda frame, ref: _select_direction(frame, guide)
    else:
        pick_next = _select_direction
    mode = (
        TraversalMode.STOCHASTIC_GUIDED
        if isinstance(step_policy, UniformRandomStepPolicy)
        else TraversalMode.GUIDED_ITERATIVE
    )
    return _run_steps(
        net,
        z0,
        lengths,
        pick_first=lambda frame: _select_direction(frame, guide),
        pick_next=pick_next,
        mode=mode,
        intensity=float(intensity),
    )
