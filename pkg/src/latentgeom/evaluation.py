"""Warpage experiments: subspace-distance suites, sweeps, and histograms.

Five distance settings are compared per subspace dimension k:
random orthogonal frames, local frames at two random latent points, at
two nearby points, and local frames against each global basis.  All
randomness flows from one master seed, split per pair, so results are
reproducible and independent of worker count.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import network as netmod
from .errors import BoundaryWarning
from .global_basis import ganspace_basis, sefa_basis
from .grassmann import (
    Subspace,
    geodesic_metric,
    projection_metric,
    random_orthogonal_frame,
)
from .local_basis import local_basis

SETTINGS = ("random_od", "random_w", "close_w", "to_ganspace", "to_sefa")

DEFAULT_N_PAIRS = 1000
DEFAULT_N_PAIRS_RANDOM_OD = 100
DEFAULT_EPS = 0.1


@dataclass
class ExperimentReport:
    """Tabular results plus the config that reproduces them."""

    experiment: str
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(
                {
                    "experiment": self.experiment,
                    "config": self.config,
                    "rows": self.rows,
                },
                fh,
            )
            fh.write("\n")

    def to_csv(self, path):
        if not self.rows:
            raise ValueError("report has no rows")
        fields = list(self.rows[0].keys())
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)

    def lookup(self, **kv):
        out = [r for r in self.rows if all(r.get(k) == v for k, v in kv.items())]
        return out


def network_hash(net):
    payload = json.dumps(netmod.network_to_dict(net), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _pmap(fn, items, threads):
    if threads <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class _Sampler:
    """Draws off-boundary, full-rank latent points, counting resamples."""

    def __init__(self, net, k_max):
        self.net = net
        self.k_max = k_max
        self.resampled = 0

    def frame_at_random_z(self, rng):
        for _ in range(100):
            z = rng.standard_normal(self.net.in_dim)
            frame = self._try(z)
            if frame is not None:
                return frame
            self.resampled += 1
        raise RuntimeError("could not sample a usable latent point")

    def frame_near(self, frame, eps, rng):
        if eps == 0.0:
            return frame
        for _ in range(100):
            step = rng.standard_normal(self.net.in_dim)
            z = frame.z + eps * step / np.linalg.norm(step)
            other = self._try(z)
            if other is not None:
                return other
            self.resampled += 1
        raise RuntimeError("could not sample a usable nearby point")

    def _try(self, z):
        if netmod.is_on_boundary(self.net, z):
            return None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryWarning)
            frame = local_basis(self.net, z)
        if frame.S[self.k_max - 1] <= frame.rank_tol():
            return None
        return frame


def _local_span(frame, k):
    return Subspace(frame.V[:, :k])


def _both_metrics(a, b):
    return projection_metric(a, b), geodesic_metric(a, b)


def _summarize(rows, experiment, setting, k, pairs):
    arr = np.asarray(pairs)
    for col, metric in ((0, "projection"), (1, "geodesic")):
        rows.append(
            {
                "setting": setting,
                "k": k,
                "metric": metric,
                "mean": float(arr[:, col].mean()),
                "std": float(arr[:, col].std(ddof=1)) if len(arr) > 1 else 0.0,
                "n_samples": len(arr),
            }
        )


def warpage_suite(
    net,
    k_values,
    n_pairs=DEFAULT_N_PAIRS,
    n_pairs_random_od=DEFAULT_N_PAIRS_RANDOM_OD,
    eps=DEFAULT_EPS,
    seed=0,
    ganspace_samples=None,
    threads=1,
):
    """Runs the five-way distance comparison for each k in k_values."""
    k_values = sorted(int(k) for k in k_values)
    n = min(net.in_dim, net.out_dim)
    if not k_values or k_values[0] < 1 or k_values[-1] > n:
        raise ValueError(f"k_values must lie in [1, {n}], got {k_values}")
    if n_pairs < 1 or n_pairs_random_od < 1:
        raise ValueError("pair counts must be >= 1")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if ganspace_samples is None:
        ganspace_samples = max(100 * net.out_dim, net.out_dim + 1)

    master = np.random.SeedSequence(seed)
    seed_gs, seed_pairs = master.spawn(2)
    gspace = ganspace_basis(net, ganspace_samples, seed_gs)
    sefa = sefa_basis(net)
    sampler = _Sampler(net, k_values[-1])
    d = net.out_dim
    k_max = k_values[-1]

    def pair_fn(args):
        setting, child = args
        rng = np.random.default_rng(child)
        if setting == "random_od":
            a = random_orthogonal_frame(d, k_max, rng)
            b = random_orthogonal_frame(d, k_max, rng)
            return a.frame, b.frame
        if setting == "random_w":
            fa = sampler.frame_at_random_z(rng)
            fb = sampler.frame_at_random_z(rng)
            return fa.V[:, :k_max], fb.V[:, :k_max]
        if setting == "close_w":
            fa = sampler.frame_at_random_z(rng)
            fb = sampler.frame_near(fa, eps, rng)
            return fa.V[:, :k_max], fb.V[:, :k_max]
        fa = sampler.frame_at_random_z(rng)
        other = gspace if setting == "to_ganspace" else sefa
        return fa.V[:, :k_max], other.top_k(k_max)

    report = ExperimentReport(
        experiment="warpage",
        config={
            "net_hash": network_hash(net),
            "seed": seed,
            "k_values": k_values,
            "n_pairs": n_pairs,
            "n_pairs_random_od": n_pairs_random_od,
            "eps": eps,
            "ganspace_samples": ganspace_samples,
        },
    )
    for setting in SETTINGS:
        count = n_pairs_random_od if setting == "random_od" else n_pairs
        children = seed_pairs.spawn(count)
        frames = _pmap(pair_fn, [(setting, c) for c in children], threads)
        for k in k_values:
            pairs = [
                _both_metrics(Subspace(a[:, :k]), Subspace(b[:, :k]))
                for a, b in frames
            ]
            _summarize(report.rows, "warpage", setting, k, pairs)
    report.config["resampled"] = sampler.resampled
    return report


def eps_sweep(net, k, eps_list, n_pairs, seed=0, threads=1):
    """Close-pair distances as a function of the input-space separation."""
    k = int(k)
    eps_list = [float(e) for e in eps_list]
    if any(e < 0 for e in eps_list):
        raise ValueError("eps values must be non-negative")
    master = np.random.SeedSequence(seed)
    sampler = _Sampler(net, k)
    report = ExperimentReport(
        experiment="eps_sweep",
        config={
            "net_hash": network_hash(net),
            "seed": seed,
            "k": k,
            "eps_list": eps_list,
            "n_pairs": n_pairs,
        },
    )
    for eps in eps_list:
        children = master.spawn(n_pairs)

        def pair_fn(child, eps=eps):
            rng = np.random.default_rng(child)
            fa = sampler.frame_at_random_z(rng)
            fb = sampler.frame_near(fa, eps, rng)
            return _both_metrics(_local_span(fa, k), _local_span(fb, k))

        pairs = _pmap(pair_fn, children, threads)
        arr = np.asarray(pairs)
        for col, metric in ((0, "projection"), (1, "geodesic")):
            report.rows.append(
                {
                    "eps": eps,
                    "metric": metric,
                    "mean": float(arr[:, col].mean()),
                    "std": float(arr[:, col].std(ddof=1)) if n_pairs > 1 else 0.0,
                    "n_samples": n_pairs,
                }
            )
    report.config["resampled"] = sampler.resampled
    return report


def sv_histogram(net, n_points, bins, seed=0):
    """Pooled Jacobian singular values against a moment-matched baseline.

    The baseline draws Gaussian matrices of the same shape, shifted and
    scaled to the entrywise mean and standard deviation of the sampled
    Jacobians, and pools their singular values the same way.
    """
    if n_points < 1 or bins < 1:
        raise ValueError("n_points and bins must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    jacobians = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        for _ in range(n_points):
            z = rng.standard_normal(net.in_dim)
            z = netmod.nudge_off_boundary(net, z, rng)
            jacobians.append(netmod.jacobian(net, z))
    entries = np.concatenate([J.ravel() for J in jacobians])
    mean, std = float(entries.mean()), float(entries.std())
    sv_net = np.concatenate(
        [np.linalg.svd(J, compute_uv=False) for J in jacobians]
    )
    shape = jacobians[0].shape
    sv_base = np.concatenate(
        [
            np.linalg.svd(mean + std * rng.standard_normal(shape), compute_uv=False)
            for _ in range(n_points)
        ]
    )
    edges = np.histogram_bin_edges(np.concatenate([sv_net, sv_base]), bins=bins)
    counts_net, _ = np.histogram(sv_net, bins=edges)
    counts_base, _ = np.histogram(sv_base, bins=edges)
    report = ExperimentReport(
        experiment="sv_histogram",
        config={
            "net_hash": network_hash(net),
            "seed": seed,
            "n_points": n_points,
            "bins": bins,
            "entry_mean": mean,
            "entry_std": std,
            "median_sv": float(np.median(sv_net)),
        },
    )
    for i in range(bins):
        report.rows.append(
            {
                "bin_left": float(edges[i]),
                "bin_right": float(edges[i + 1]),
                "count_jacobian": int(counts_net[i]),
                "count_baseline": int(counts_base[i]),
            }
        )
    return report


def small_sv_fractions(net, n_points, seed=0, threshold_ratio=0.1):
    """Fraction of singular values below threshold_ratio * median,
    for the network Jacobians and the moment-matched Gaussian baseline."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    jacobians = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        for _ in range(n_points):
            z = rng.standard_normal(net.in_dim)
            z = netmod.nudge_off_boundary(net, z, rng)
            jacobians.append(netmod.jacobian(net, z))
    entries = np.concatenate([J.ravel() for J in jacobians])
    mean, std = float(entries.mean()), float(entries.std())
    sv_net = np.concatenate(
        [np.linalg.svd(J, compute_uv=False) for J in jacobians]
    )
    shape = jacobians[0].shape
    sv_base = np.concatenate(
        [
            np.linalg.svd(mean + std * rng.standard_normal(shape), compute_uv=False)
            for _ in range(n_points)
        ]
    )
    cut_net = threshold_ratio * np.median(sv_net)
    cut_base = threshold_ratio * np.median(sv_base)
    return float(np.mean(sv_net < cut_net)), float(np.mean(sv_base < cut_base))


def subspace_grid(net, frame, i, j, half_extent, n_per_axis):
    """2-D coordinate mesh w + x v_i + y v_j on the tangent directions.

    Returns an array of shape (2 n + 1, 2 n + 1, d_W); the grid scales so
    the outermost points sit at offset half_extent, and the center is w.
    """
    if n_per_axis < 1:
        raise ValueError(f"n_per_axis must be >= 1, got {n_per_axis}")
    _, _, vi = frame.direction(i)
    _, _, vj = frame.direction(j)
    coords = np.arange(-n_per_axis, n_per_axis + 1) * (
        float(half_extent) / n_per_axis
    )
    grid = (
        frame.w[None, None, :]
        + coords[:, None, None] * vi[None, None, :]
        + coords[None, :, None] * vj[None, None, :]
    )
    return grid
