"""Distances between linear subspaces via projectors and principal angles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficiencyError, ShapeError
from .network import _as_readonly

# Above this ambient dimension the projector difference is not formed
# explicitly; the operator norm equals sin of the largest principal angle.
_DENSE_PROJECTOR_LIMIT = 2048


@dataclass(frozen=True)
class Subspace:
    """A k-dimensional subspace of R^d stored as a column-orthonormal frame."""

    frame: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.frame, dtype=np.float64)
        if M.ndim != 2 or M.shape[1] > M.shape[0]:
            raise ShapeError(f"frame must be d x k with k <= d, got {M.shape}")
        gram = M.T @ M
        if not np.allclose(gram, np.eye(M.shape[1]), atol=1e-10):
            raise ShapeError("frame columns are not orthonormal within 1e-10")
        object.__setattr__(self, "frame", _as_readonly(M))

    @property
    def ambient(self):
        return self.frame.shape[0]

    @property
    def dim(self):
        return self.frame.shape[1]

    def projector(self):
        return self.frame @ self.frame.T


def from_vectors(columns):
    """Orthonormalizes a spanning set (QR); rejects rank-deficient input."""
    A = np.asarray(columns, dtype=np.float64)
    if A.ndim != 2:
        raise ShapeError(f"expected a d x k matrix, got shape {A.shape}")
    svals = np.linalg.svd(A, compute_uv=False)
    if svals[-1] <= 1e-10 * svals[0]:
        raise RankDeficiencyError(
            f"columns are rank deficient (sigma_min/sigma_max = "
            f"{svals[-1] / svals[0]:.3e})"
        )
    Q, R = np.linalg.qr(A)
    # Fix the sign ambiguity of QR so the result is deterministic.
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Subspace(Q * signs)


def _check_pair(a, b):
    if a.ambient != b.ambient or a.dim != b.dim:
        raise ShapeError(
            f"subspace mismatch: ({a.ambient}, {a.dim}) vs ({b.ambient}, {b.dim})"
        )


def principal_angles(a, b):
    """Angles in [0, pi/2], ascending, from cross-Gram singular values.

    Angles below pi/4 are recomputed from the sines (singular values of
    the residual (I - P_a) M_b): arccos amplifies rounding near 1, and
    the sine form keeps nearly equal subspaces at distance ~1e-15
    instead of ~1e-8.
    """
    _check_pair(a, b)
    gram = a.frame.T @ b.frame
    svals = np.clip(np.linalg.svd(gram, compute_uv=False), 0.0, 1.0)
    angles = np.arccos(svals)
    n_small = int(np.count_nonzero(svals**2 >= 0.5))
    if n_small:
        resid = b.frame - a.frame @ gram
        sines = np.sort(np.linalg.svd(resid, compute_uv=False))
        angles[:n_small] = np.arcsin(np.clip(sines[:n_small], 0.0, 1.0))
    return angles


def projection_metric(a, b):
    """Operator norm of the projector difference."""
    _check_pair(a, b)
    if a.ambient <= _DENSE_PROJECTOR_LIMIT:
        diff = a.projector() - b.projector()
        return float(np.linalg.svd(diff, compute_uv=False)[0])
    return float(np.sin(principal_angles(a, b)[-1]))


def geodesic_metric(a, b):
    """Euclidean norm of the principal-angle vector."""
    return float(np.linalg.norm(principal_angles(a, b)))


def random_orthogonal_frame(d, k, seed):
    """Haar-distributed k-frame in R^d (QR with R-diagonal sign correction)."""
    if k > d:
        raise ShapeError(f"k={k} exceeds ambient dimension d={d}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, k))
    Q, R = np.linalg.qr(A)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Subspace(Q * signs)
