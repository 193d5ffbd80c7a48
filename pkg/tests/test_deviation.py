import numpy as np
import pytest

from latentgeom import network as netmod
from latentgeom.cli import generate_network
from latentgeom.deviation import (
    ProjectionResult,
    project_to_manifold,
    traversal_deviation,
)
from latentgeom.traversal import iterative_traverse


def tall_affine_net(seed=0):
    """R^4 -> R^12 affine map with orthonormal columns."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((12, 4)))
    return netmod.MappingNetwork(
        (netmod.LayerSpec(Q, np.zeros(12), netmod.IDENTITY, 1.0),)
    ), Q


def test_on_manifold_point_projects_to_zero(curved_net, rng):
    z = rng.standard_normal(32)
    w, _ = netmod.forward(curved_net, z)
    res = project_to_manifold(curved_net, w, z)
    assert res.residual <= 1e-10
    assert res.converged


def test_projection_from_nearby_start(curved_net, rng):
    z = rng.standard_normal(32)
    w, _ = netmod.forward(curved_net, z)
    res = project_to_manifold(curved_net, w, z + 1e-3 * rng.standard_normal(32))
    assert res.residual <= 1e-5


def test_orthogonal_offset_residual_is_exact():
    # the image is a 4-dim plane in R^12, so the distance to an
    # orthogonal offset of size delta is exactly delta
    net, Q = tall_affine_net()
    rng = np.random.default_rng(5)
    z = rng.standard_normal(4)
    w, _ = netmod.forward(net, z)
    n = rng.standard_normal(12)
    n -= Q @ (Q.T @ n)
    n /= np.linalg.norm(n)
    delta = 0.37
    res = project_to_manifold(net, w + delta * n, z + 0.1)
    assert abs(res.residual - delta) <= 1e-8


def test_residual_is_upper_bound(curved_net, rng):
    # any candidate latent gives a residual at least the true distance;
    # verify against a brute-force sample minimum
    z = rng.standard_normal(32)
    w, _ = netmod.forward(curved_net, z)
    w_off = w + 0.5 * rng.standard_normal(32)
    res = traversal_deviation(curved_net, w_off[None, :], restarts=4, seed=0)[0]
    brute = min(
        np.linalg.norm(netmod.forward(curved_net, rng.standard_normal(32))[0] - w_off)
        for _ in range(200)
    )
    assert res.residual <= brute + 1e-9


def test_traversal_path_hints_give_exact_zero(curved_net, rng):
    path = iterative_traverse(
        curved_net, rng.standard_normal(32), 1, intensity=1.0, n_steps=10
    )
    results = traversal_deviation(curved_net, path, restarts=0, seed=0)
    assert len(results) == 11
    assert all(r.residual <= 1e-12 for r in results)


def test_monotone_in_restarts(curved_net, rng):
    w_off = netmod.forward(curved_net, rng.standard_normal(32))[0]
    w_off = w_off + rng.standard_normal(32)
    r2 = traversal_deviation(curved_net, w_off[None, :], restarts=2, seed=3)[0]
    r6 = traversal_deviation(curved_net, w_off[None, :], restarts=6, seed=3)[0]
    assert r6.residual <= r2.residual + 1e-12


def test_deviation_determinism(curved_net, rng):
    w_off = rng.standard_normal(32)
    a = traversal_deviation(curved_net, w_off[None, :], restarts=3, seed=11)[0]
    b = traversal_deviation(curved_net, w_off[None, :], restarts=3, seed=11)[0]
    assert a.residual == b.residual
    assert np.array_equal(a.z, b.z)


def test_hint_length_mismatch(curved_net):
    with pytest.raises(ValueError):
        traversal_deviation(
            curved_net, np.zeros((3, 32)), z_hints=[np.zeros(32)] * 2
        )


def test_zero_restarts_without_hints_still_runs(curved_net):
    results = traversal_deviation(curved_net, np.zeros((1, 32)), restarts=0, seed=0)
    assert isinstance(results[0], ProjectionResult)
    assert np.isfinite(results[0].residual)


def test_nonconvergence_is_flagged_not_raised(curved_net, rng):
    w_off = 100.0 * rng.standard_normal(32)
    res = project_to_manifold(curved_net, w_off, np.zeros(32), max_iters=1)
    assert isinstance(res.converged, bool)
    assert np.isfinite(res.residual)
