"""Global comparison bases: sampled-PCA and first-weight-SVD directions.

Both produce a single orthonormal direction set applied at every latent
point, in contrast to the per-point local frames.  The first-weight SVD
is applied to the mapping network's first layer; for multi-layer nets
its input-space singular vectors are pushed through the Jacobian at a
reference point to obtain an output-space frame (an adaptation: the
original formulation targets the weight right after the latent code).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from . import network as netmod
from .errors import BoundaryWarning, UnderSampledError
from .local_basis import _sign_normalize


class GlobalBasisMethod(str, enum.Enum):
    SAMPLED_PCA = "sampled_pca"
    FIRST_WEIGHT_SVD = "first_weight_svd"


@dataclass(frozen=True)
class GlobalBasis:
    """Orthonormal direction columns ordered by explained magnitude."""

    directions: np.ndarray
    magnitudes: np.ndarray
    method: GlobalBasisMethod
    sample_count: int = 0

    def top_k(self, k):
        return self.directions[:, :k]

    def to_dict(self):
        return {
            "method": self.method.value,
            "directions": self.directions.T.tolist(),
            "magnitudes": self.magnitudes.tolist(),
            "sample_count": self.sample_count,
        }


def ganspace_basis(net, n_samples, seed):
    """PCA over w = f(z) for z ~ N(0, I); directions are principal axes."""
    if n_samples <= net.out_dim:
        raise UnderSampledError(
            f"need more than d_W={net.out_dim} samples, got {n_samples}"
        )
    rng = np.random.default_rng(seed)
    zs = rng.standard_normal((n_samples, net.in_dim))
    ws = np.stack([netmod.forward(net, z)[0] for z in zs])
    centered = ws - ws.mean(axis=0)
    _, svals, Vt = np.linalg.svd(centered, full_matrices=False)
    directions = Vt.T.copy()
    _sign_normalize(np.zeros_like(directions), directions)
    return GlobalBasis(
        directions=netmod._as_readonly(directions),
        magnitudes=netmod._as_readonly(svals**2 / (n_samples - 1)),
        method=GlobalBasisMethod.SAMPLED_PCA,
        sample_count=n_samples,
    )


def sefa_basis(net, z_ref=None):
    """SVD of the first weight matrix as a global direction set.

    Single-layer nets: the left singular vectors already live in the
    output space.  Deeper nets: the right singular vectors (input-space
    directions) are pushed through the Jacobian at z_ref (default 0,
    nudged off boundaries) and re-orthonormalized preserving order.
    """
    first = net.layers[0].weight
    Uw, svals, Vt = np.linalg.svd(first, full_matrices=False)
    if len(net.layers) == 1:
        directions = Uw.copy()
        _sign_normalize(np.zeros_like(directions), directions)
        return GlobalBasis(
            directions=netmod._as_readonly(directions),
            magnitudes=netmod._as_readonly(svals.copy()),
            method=GlobalBasisMethod.FIRST_WEIGHT_SVD,
        )
    if z_ref is None:
        z_ref = np.zeros(net.in_dim)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        z_ref = netmod.nudge_off_boundary(net, z_ref, np.random.default_rng(0))
        J = netmod.jacobian(net, z_ref)
    pushed = J @ Vt.T
    Q, _ = np.linalg.qr(pushed)
    directions = Q[:, : min(Q.shape[1], net.out_dim)].copy()
    _sign_normalize(np.zeros_like(directions), directions)
    return GlobalBasis(
        directions=netmod._as_readonly(directions),
        magnitudes=netmod._as_readonly(svals[: directions.shape[1]].copy()),
        method=GlobalBasisMethod.FIRST_WEIGHT_SVD,
    )


def save_direction_set(basis, path):
    """Writes the vector-set JSON consumed by the traversal guide flag."""
    import json

    with open(path, "w") as fh:
        json.dump(basis.to_dict(), fh)
        fh.write("\n")


def load_direction_set(path):
    """Reads a vector-set JSON; accepts either the full form or a bare list."""
    import json

    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, list):
        vectors = np.asarray(data, dtype=np.float64)
        if vectors.ndim == 1:
            vectors = vectors[None, :]
        return vectors
    return np.asarray(data["directions"], dtype=np.float64)
