"""Local traversal frames from the SVD of the network Jacobian.

The left singular vectors of the Jacobian at z span the tangent space of
the latent manifold at w = f(z); the right singular vectors are the
matching input directions, scaled by the singular values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import network as netmod
from .errors import RankDeficiencyError, ShapeError, UnderSampledError

# Singular values below RANK_TOL_REL * sigma_1 count as zero.
RANK_TOL_REL = 1e-8


@dataclass(frozen=True)
class LocalFrame:
    """SVD triple of the Jacobian at a base point.

    U (d_Z x n) holds input directions u_i as columns, V (d_W x n) the
    output directions v_i, S the singular values in descending order,
    with n = min(d_Z, d_W).  J u_i = sigma_i v_i for every i.
    """

    z: np.ndarray
    w: np.ndarray
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def n(self):
        return self.S.shape[0]

    def rank_tol(self):
        return RANK_TOL_REL * self.S[0]

    def direction(self, k):
        """1-based accessor returning (u_k, sigma_k, v_k)."""
        if not 1 <= k <= self.n:
            raise ShapeError(f"direction index {k} outside [1, {self.n}]")
        i = k - 1
        return self.U[:, i], self.S[i], self.V[:, i]

    def to_dict(self, include_vectors=False):
        out = {
            "z": self.z.tolist(),
            "w": self.w.tolist(),
            "S": self.S.tolist(),
        }
        if include_vectors:
            out["U"] = self.U.tolist()
            out["V"] = self.V.tolist()
        return out


def _sign_normalize(U, V):
    """Makes the largest-magnitude entry of each v_i positive."""
    for i in range(V.shape[1]):
        j = int(np.argmax(np.abs(V[:, i])))
        if V[j, i] < 0:
            V[:, i] = -V[:, i]
            U[:, i] = -U[:, i]
    return U, V


def _break_ties(U, S, V):
    """Orders columns within groups of equal singular values.

    The subspace is canonical but the basis is not; sorting tied columns
    lexicographically (descending) on the v entries makes the output
    deterministic across SVD backends.
    """
    n = S.shape[0]
    tol = 1e-12 * max(S[0], 1.0)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(S[j + 1] - S[i]) <= tol:
            j += 1
        if j > i:
            block = list(range(i, j + 1))
            block.sort(key=lambda c: tuple(-V[:, c]))
            U[:, i : j + 1] = U[:, block]
            V[:, i : j + 1] = V[:, block]
        i = j + 1
    return U, S, V


def local_basis(net, z, boundary_tol=netmod.BOUNDARY_TOL):
    """Computes the LocalFrame at z (full SVD of the exact Jacobian)."""
    w, _ = netmod.forward(net, z)
    J = netmod.jacobian(net, z, boundary_tol=boundary_tol)
    try:
        Vw, S, Ut = np.linalg.svd(J, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"SVD failed for Jacobian at z (cond ~ {np.linalg.cond(J):.3e}): {exc}"
        ) from exc
    U = Ut.T.copy()
    V = Vw.copy()
    U, V = _sign_normalize(U, V)
    U, S, V = _break_ties(U, S, V)
    return LocalFrame(
        z=netmod._as_readonly(z),
        w=netmod._as_readonly(w),
        U=netmod._as_readonly(U),
        S=netmod._as_readonly(S),
        V=netmod._as_readonly(V),
    )


def approx_manifold_point(net, frame, k, t):
    """Evaluates f(z + sum_i t_i u_i) on the k-dim approximating patch."""
    if not 1 <= k <= frame.n:
        raise ShapeError(f"k={k} outside [1, {frame.n}]")
    if frame.S[k - 1] <= frame.rank_tol():
        raise RankDeficiencyError(
            f"sigma_{k} = {frame.S[k - 1]:.3e} is below rank tolerance"
        )
    t = np.asarray(t, dtype=np.float64)
    if t.shape != (k,):
        raise ShapeError(f"expected t of shape ({k},), got {t.shape}")
    z_new = frame.z + frame.U[:, :k] @ t
    w_new, _ = netmod.forward(net, z_new)
    return w_new


def local_pca_oracle(net, z_b, c, n_samples, rng_seed):
    """Independent PCA check of the frame: samples the linearized image.

    Draws eps ~ N(0, I), forms w' = T1f(z_b + c * eps), and runs standard
    (mean-centered) PCA.  Returns (components, eigenvalues) with the
    components as columns, ordered by eigenvalue descending.
    """
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    if n_samples < net.in_dim:
        raise UnderSampledError(
            f"need at least d_Z={net.in_dim} samples, got {n_samples}"
        )
    rng = np.random.default_rng(rng_seed)
    t1f = netmod.linear_approximation_at(net, z_b)
    eps = rng.standard_normal((n_samples, net.in_dim))
    samples = t1f.base_w + c * eps @ t1f.jacobian.T
    centered = samples - samples.mean(axis=0)
    _, svals, Vt = np.linalg.svd(centered, full_matrices=False)
    eigenvalues = svals**2 / (n_samples - 1)
    if eigenvalues[0] <= 0:
        raise UnderSampledError("degenerate sample covariance")
    components = Vt.T.copy()
    comps_dummy = np.zeros((net.in_dim, components.shape[1]))
    _sign_normalize(comps_dummy, components)
    return components, eigenvalues


def spectral_gaps(S):
    """min(sigma_{i-1} - sigma_i, sigma_i - sigma_{i+1}) per component.

    End components use their single neighbor gap.
    """
    n = S.shape[0]
    gaps = np.empty(n)
    for i in range(n):
        left = S[i - 1] - S[i] if i > 0 else np.inf
        right = S[i] - S[i + 1] if i < n - 1 else np.inf
        gaps[i] = min(left, right)
    return gaps
