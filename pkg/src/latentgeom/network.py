"""Piecewise-affine mapping networks: evaluation and exact Jacobians.

A network is a stack of affine layers with leaky-ReLU (or identity)
activations.  On the interior of each activation cell the map is affine,
so the Jacobian is an exact product of weight matrices and diagonal mask
matrices read off the activation pattern.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryWarning, ShapeError, WeightFileError

LEAKY_RELU = "leaky_relu"
IDENTITY = "identity"

# Pre-activations closer to zero than this are treated as lying on a cell
# boundary, where the Jacobian is ill-defined.
BOUNDARY_TOL = 1e-9


def _as_readonly(a, dtype=np.float64):
    out = np.asarray(a, dtype=dtype)
    out = np.ascontiguousarray(out)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LayerSpec:
    """One affine layer with its activation.

    weight has shape (out_dim, in_dim), bias has length out_dim.
    For leaky-ReLU the slope must lie in (0, 1]; slope 1 is the identity.
    """

    weight: np.ndarray
    bias: np.ndarray
    activation: str = LEAKY_RELU
    slope: float = 0.2

    def __post_init__(self):
        w = _as_readonly(self.weight)
        b = _as_readonly(self.bias)
        if w.ndim != 2:
            raise ShapeError(f"weight must be 2-D, got shape {w.shape}")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise ShapeError(
                f"bias length {b.shape} does not match weight rows {w.shape[0]}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise WeightFileError("weight or bias contains NaN/Inf")
        if self.activation not in (LEAKY_RELU, IDENTITY):
            raise WeightFileError(f"unknown activation {self.activation!r}")
        slope = float(self.slope)
        if self.activation == LEAKY_RELU and not (0.0 < slope <= 1.0):
            raise WeightFileError(f"slope must be in (0, 1], got {slope}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "slope", slope)

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]

    def mask(self, pre):
        """Diagonal of the activation derivative at pre-activation `pre`."""
        if self.activation == IDENTITY or self.slope == 1.0:
            return np.ones_like(pre)
        return np.where(pre > 0, 1.0, self.slope)

    def apply(self, pre):
        if self.activation == IDENTITY or self.slope == 1.0:
            return pre
        return np.where(pre > 0, pre, self.slope * pre)


@dataclass(frozen=True)
class MappingNetwork:
    """An immutable stack of LayerSpec; evaluation and Jacobians are pure."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise WeightFileError("network needs at least one layer")
        for i in range(len(layers) - 1):
            if layers[i].out_dim != layers[i + 1].in_dim:
                raise WeightFileError(
                    f"layer {i} out_dim {layers[i].out_dim} != "
                    f"layer {i + 1} in_dim {layers[i + 1].in_dim}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self):
        return self.layers[0].in_dim

    @property
    def out_dim(self):
        return self.layers[-1].out_dim


@dataclass(frozen=True, eq=False)
class ActivationPattern:
    """Per-layer derivative masks; realizes one cell of the affine partition."""

    masks: tuple

    def __eq__(self, other):
        if not isinstance(other, ActivationPattern):
            return NotImplemented
        return len(self.masks) == len(other.masks) and all(
            np.array_equal(a, b) for a, b in zip(self.masks, other.masks)
        )

    __hash__ = None


def _check_input(net, z):
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (net.in_dim,):
        raise ShapeError(f"expected z of shape ({net.in_dim},), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ShapeError("z contains NaN/Inf")
    return z


def _forward_trace(net, z):
    """Returns (w, pre-activations per layer, masks per layer)."""
    x = z
    pres = []
    masks = []
    for layer in net.layers:
        pre = layer.weight @ x + layer.bias
        pres.append(pre)
        masks.append(layer.mask(pre))
        x = layer.apply(pre)
    return x, pres, masks


def forward(net, z):
    """Evaluates the network, returning (w, activation pattern)."""
    z = _check_input(net, z)
    w, _, masks = _forward_trace(net, z)
    return w, ActivationPattern(tuple(m.copy() for m in masks))


def _warn_boundaries(net, pres, boundary_tol):
    for i, (layer, pre) in enumerate(zip(net.layers, pres)):
        if layer.activation == IDENTITY or layer.slope == 1.0:
            continue
        near = np.flatnonzero(np.abs(pre) < boundary_tol)
        if near.size:
            warnings.warn(BoundaryWarning(i, near), stacklevel=3)


def jacobian(net, z, boundary_tol=BOUNDARY_TOL):
    """Exact Jacobian at z via masked weight products.

    Warns with BoundaryWarning when z sits within `boundary_tol` of an
    activation-cell boundary; the returned matrix is then the one of an
    adjacent cell chosen by the > 0 test.
    """
    z = _check_input(net, z)
    _, pres, masks = _forward_trace(net, z)
    _warn_boundaries(net, pres, boundary_tol)
    J = None
    for layer, mask in zip(net.layers, masks):
        J = layer.weight if J is None else layer.weight @ J
        J = mask[:, None] * J
    return J


def is_on_boundary(net, z, boundary_tol=BOUNDARY_TOL):
    z = _check_input(net, z)
    _, pres, _ = _forward_trace(net, z)
    for layer, pre in zip(net.layers, pres):
        if layer.activation == IDENTITY or layer.slope == 1.0:
            continue
        if np.any(np.abs(pre) < boundary_tol):
            return True
    return False


def nudge_off_boundary(net, z, rng, scale=1e-6, max_tries=100):
    """Perturbs z by random unit vectors until it leaves all boundaries."""
    z = _check_input(net, z)
    for _ in range(max_tries):
        if not is_on_boundary(net, z):
            return z
        step = rng.standard_normal(net.in_dim)
        z = z + scale * step / np.linalg.norm(step)
    raise RuntimeError("could not move z off a cell boundary")


@dataclass(frozen=True)
class AffineApproximation:
    """First-order approximation w_b + J (z - z_b); exact within the cell."""

    base_z: np.ndarray
    base_w: np.ndarray
    jacobian: np.ndarray

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        return self.base_w + self.jacobian @ (z - self.base_z)


def linear_approximation_at(net, z_b, boundary_tol=BOUNDARY_TOL):
    z_b = _check_input(net, z_b)
    w_b, _ = forward(net, z_b)
    J = jacobian(net, z_b, boundary_tol=boundary_tol)
    return AffineApproximation(
        base_z=_as_readonly(z_b), base_w=_as_readonly(w_b), jacobian=_as_readonly(J)
    )


# ---------------------------------------------------------------------------
# Weight-file I/O.  Schema:
#   {"in_dim": int,
#    "layers": [{"weight": [[...]], "bias": [...],
#                "activation": "leaky_relu"|"identity", "slope": real}]}
# Unknown top-level keys (e.g. an exporter's "note") are ignored.
# ---------------------------------------------------------------------------


def network_to_dict(net):
    return {
        "in_dim": int(net.in_dim),
        "layers": [
            {
                "weight": layer.weight.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
                "slope": layer.slope,
            }
            for layer in net.layers
        ],
    }


def network_from_dict(data):
    if not isinstance(data, dict):
        raise WeightFileError("weight file must be a JSON object")
    for key in ("in_dim", "layers"):
        if key not in data:
            raise WeightFileError(f"missing field {key!r}")
    if not isinstance(data["layers"], list) or not data["layers"]:
        raise WeightFileError("field 'layers' must be a non-empty list")
    layers = []
    for i, entry in enumerate(data["layers"]):
        for key in ("weight", "bias", "activation"):
            if key not in entry:
                raise WeightFileError(f"layer {i}: missing field {key!r}")
        try:
            layer = LayerSpec(
                weight=np.asarray(entry["weight"], dtype=np.float64),
                bias=np.asarray(entry["bias"], dtype=np.float64),
                activation=entry["activation"],
                slope=float(entry.get("slope", 1.0)),
            )
        except (ShapeError, WeightFileError, ValueError) as exc:
            raise WeightFileError(f"layer {i}: {exc}") from exc
        layers.append(layer)
    net = MappingNetwork(tuple(layers))
    if net.in_dim != int(data["in_dim"]):
        raise WeightFileError(
            f"field 'in_dim' is {data['in_dim']} but layer 0 expects {net.in_dim}"
        )
    return net


def save_network(net, path):
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh)
        fh.write("\n")


def load_network(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise WeightFileError(f"invalid JSON in {path}: {exc}") from exc
    return network_from_dict(data)
