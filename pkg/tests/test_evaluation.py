import json

import numpy as np
import pytest

from latentgeom import network as netmod
from latentgeom.cli import generate_network
from latentgeom.evaluation import (
    SETTINGS,
    ExperimentReport,
    eps_sweep,
    network_hash,
    subspace_grid,
    sv_histogram,
    warpage_suite,
)
from latentgeom.local_basis import local_basis


@pytest.fixture(scope="module")
def warpage_report(small_curved_net):
    return warpage_suite(
        small_curved_net,
        k_values=[1, 3],
        n_pairs=30,
        n_pairs_random_od=30,
        seed=0,
    )


def test_warpage_report_layout(warpage_report):
    # five settings x two k values x two metrics
    assert len(warpage_report.rows) == 5 * 2 * 2
    settings = {r["setting"] for r in warpage_report.rows}
    assert settings == set(SETTINGS)
    for row in warpage_report.rows:
        assert 0.0 <= row["mean"]
        assert row["std"] >= 0.0
        assert row["n_samples"] == 30
        if row["metric"] == "projection":
            assert row["mean"] <= 1.0 + 1e-12


def test_warpage_close_pairs_are_closest(warpage_report):
    def mean(setting, metric):
        (row,) = warpage_report.lookup(setting=setting, k=3, metric=metric)
        return row["mean"]

    for metric in ("projection", "geodesic"):
        assert mean("close_w", metric) < mean("random_w", metric)
        assert mean("random_w", metric) <= mean("random_od", metric) + 0.2


def test_warpage_determinism_across_threads(small_curved_net):
    kwargs = dict(k_values=[2], n_pairs=10, n_pairs_random_od=10, seed=5)
    r1 = warpage_suite(small_curved_net, threads=1, **kwargs)
    r4 = warpage_suite(small_curved_net, threads=4, **kwargs)
    assert r1.rows == r4.rows


def test_warpage_argument_validation(small_curved_net):
    with pytest.raises(ValueError):
        warpage_suite(small_curved_net, k_values=[0], n_pairs=5)
    with pytest.raises(ValueError):
        warpage_suite(small_curved_net, k_values=[7], n_pairs=5)
    with pytest.raises(ValueError):
        warpage_suite(small_curved_net, k_values=[1], n_pairs=0)
    with pytest.raises(ValueError):
        warpage_suite(small_curved_net, k_values=[1], n_pairs=5, eps=-0.1)


def test_eps_sweep_monotone_trend(small_curved_net):
    report = eps_sweep(
        small_curved_net, k=2, eps_list=[0.02, 0.1, 0.5], n_pairs=40, seed=0
    )
    means = [
        r["mean"]
        for r in report.rows
        if r["metric"] == "projection"
    ]
    stds = [
        r["std"] / np.sqrt(r["n_samples"])
        for r in report.rows
        if r["metric"] == "projection"
    ]
    for i in range(len(means) - 1):
        assert means[i + 1] >= means[i] - (stds[i] + stds[i + 1])


def test_eps_sweep_zero_eps_gives_zero_distance(small_curved_net):
    report = eps_sweep(small_curved_net, k=2, eps_list=[0.0], n_pairs=5, seed=0)
    # arccos amplifies rounding near 1, so allow ~sqrt(eps) slack
    for row in report.rows:
        assert row["mean"] <= 1e-6


def test_eps_sweep_determinism(small_curved_net):
    r1 = eps_sweep(small_curved_net, 2, [0.1], n_pairs=10, seed=2, threads=1)
    r2 = eps_sweep(small_curved_net, 2, [0.1], n_pairs=10, seed=2, threads=3)
    assert r1.rows == r2.rows


def test_sv_histogram_counts(small_curved_net):
    report = sv_histogram(small_curved_net, n_points=20, bins=15, seed=0)
    assert len(report.rows) == 15
    total_net = sum(r["count_jacobian"] for r in report.rows)
    total_base = sum(r["count_baseline"] for r in report.rows)
    # 20 Jacobians of a 6-dim net pool 120 singular values each side
    assert total_net == 20 * 6
    assert total_base == 20 * 6
    lefts = [r["bin_left"] for r in report.rows]
    assert lefts == sorted(lefts)
    assert report.config["median_sv"] > 0


def test_sv_histogram_shows_heavier_small_tail(small_curved_net):
    # piecewise-affine Jacobians concentrate more singular values near
    # zero than the moment-matched Gaussian baseline
    report = sv_histogram(small_curved_net, n_points=50, bins=20, seed=1)
    cutoff = 0.1 * report.config["median_sv"]
    small_net = sum(
        r["count_jacobian"] for r in report.rows if r["bin_right"] <= cutoff * 3
    )
    small_base = sum(
        r["count_baseline"] for r in report.rows if r["bin_right"] <= cutoff * 3
    )
    assert small_net >= small_base


def test_subspace_grid_geometry(small_curved_net, rng):
    frame = local_basis(small_curved_net, rng.standard_normal(6))
    grid = subspace_grid(small_curved_net, frame, 1, 2, half_extent=2.0, n_per_axis=3)
    assert grid.shape == (7, 7, 6)
    assert np.allclose(grid[3, 3], frame.w)
    _, _, v1 = frame.direction(1)
    assert np.allclose(grid[6, 3], frame.w + 2.0 * v1, atol=1e-12)
    # spacing along an axis is uniform
    diffs = np.diff(grid[:, 3, :], axis=0)
    assert np.allclose(diffs, diffs[0], atol=1e-12)
    with pytest.raises(ValueError):
        subspace_grid(small_curved_net, frame, 1, 2, 1.0, 0)


def test_report_serialization(tmp_path, warpage_report):
    jpath = tmp_path / "report.json"
    cpath = tmp_path / "report.csv"
    warpage_report.to_json(jpath)
    warpage_report.to_csv(cpath)
    data = json.loads(jpath.read_text())
    assert data["experiment"] == "warpage"
    assert data["rows"] == warpage_report.rows
    header = cpath.read_text().splitlines()[0]
    assert header.split(",") == list(warpage_report.rows[0].keys())
    empty = ExperimentReport("x")
    with pytest.raises(ValueError):
        empty.to_csv(tmp_path / "empty.csv")


def test_network_hash_distinguishes_nets(small_curved_net, curved_net):
    assert network_hash(small_curved_net) == network_hash(small_curved_net)
    assert network_hash(small_curved_net) != network_hash(curved_net)
