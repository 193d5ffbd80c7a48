"""Command-line front door: network generation and experiment dispatch.

All subcommands are deterministic given their flags (including --seed)
and never mutate their input files.  Structured output is JSON, tabular
output is CSV.
"""

from __future__ import annotations

import argparse
import csv
import enum
import json
import os
import sys
import warnings

import numpy as np

from . import deviation as devmod
from . import evaluation as evalmod
from . import network as netmod
from . import traversal as travmod
from .errors import (
    BoundaryWarning,
    InvalidDirectionError,
    RankDeficiencyError,
    ShapeError,
    UnderSampledError,
    WeightFileError,
)
from .global_basis import load_direction_set
from .grassmann import random_orthogonal_frame
from .local_basis import local_basis, local_pca_oracle, spectral_gaps


class InitScheme(str, enum.Enum):
    GAUSSIAN_SCALED = "gaussian"
    ORTHOGONAL = "orthogonal"


def generate_network(dims, slope, seed, init=InitScheme.GAUSSIAN_SCALED, gain=1.0):
    """Builds a synthetic leaky-ReLU stack with the given layer widths.

    GaussianScaled draws weights N(0, 2 / (in_dim * (1 + slope^2))), the
    variance-preserving rule for leaky-ReLU; Orthogonal draws Haar
    factors.  Biases are zero.  slope=1 yields a globally affine net.
    gain multiplies every weight matrix, scaling the image by gain^L
    without moving the activation-cell boundaries.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"dims must chain at least two positive sizes, got {dims}")
    slope = float(slope)
    if not 0 < slope <= 1:
        raise ValueError(f"slope must be in (0, 1], got {slope}")
    gain = float(gain)
    if gain <= 0:
        raise ValueError(f"gain must be positive, got {gain}")
    init = InitScheme(init)
    rng = np.random.default_rng(seed)
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        if init is InitScheme.GAUSSIAN_SCALED:
            std = np.sqrt(2.0 / (d_in * (1.0 + slope**2)))
            weight = std * rng.standard_normal((d_out, d_in))
        else:
            if d_out >= d_in:
                weight = random_orthogonal_frame(d_out, d_in, rng).frame
            else:
                weight = random_orthogonal_frame(d_in, d_out, rng).frame.T
        weight = gain * weight
        layers.append(
            netmod.LayerSpec(
                weight=weight,
                bias=np.zeros(d_out),
                activation=netmod.LEAKY_RELU,
                slope=slope,
            )
        )
    return netmod.MappingNetwork(tuple(layers))


def sample_latent(net, seed):
    """z ~ N(0, I), nudged off activation-cell boundaries."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(net.in_dim)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        return netmod.nudge_off_boundary(net, z, rng)


def _parse_list(text, cast):
    return [cast(part) for part in text.split(",") if part.strip()]


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def _write_csv(path, fieldnames, rows, note=None):
    with open(path, "w", newline="") as fh:
        if note:
            fh.write(f"# {note}\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _path_step_rows(path):
    rows = []
    its = path.iterates
    for n in range(1, len(its)):
        chord = float(np.linalg.norm(its[n].w - its[n - 1].w))
        if n >= 2:
            cos = float(
                its[n - 1].step_direction @ its[n - 2].step_direction
            )
        else:
            cos = ""
        rows.append(
            {
                "step": n,
                "chord_length": chord,
                "cosine_to_previous": cos,
                "sigma": its[n - 1].sigma,
                "direction_index": its[n - 1].direction_index,
            }
        )
    return rows


def _linear_step_rows(lin):
    rows = []
    w = lin.w_push
    prev_dir = None
    for n in range(1, len(w)):
        seg = w[n] - w[n - 1]
        norm = float(np.linalg.norm(seg))
        cos = ""
        if prev_dir is not None and norm > 0:
            cos = float(seg @ prev_dir / norm)
        if norm > 0:
            prev_dir = seg / norm
        rows.append(
            {
                "step": n,
                "chord_length": norm,
                "cosine_to_previous": cos,
                "sigma": lin.sigma,
                "direction_index": lin.direction_index,
            }
        )
    return rows


def _cmd_gen_net(args):
    net = generate_network(
        _parse_list(args.dims, int), args.slope, args.seed, args.init, gain=args.gain
    )
    netmod.save_network(net, args.out)
    return 0


def _cmd_basis(args):
    net = netmod.load_network(args.net)
    if args.z_file:
        z = np.asarray(json.load(open(args.z_file)), dtype=np.float64)
    else:
        z = sample_latent(net, args.seed)
    frame = local_basis(net, z)
    _write_json(args.out, frame.to_dict(include_vectors=args.full))
    return 0


def _cmd_traverse(args):
    net = netmod.load_network(args.net)
    z0 = sample_latent(net, args.seed)
    if args.mode == "linear":
        frame = local_basis(net, z0)
        lin = travmod.linear_traverse(
            net, frame, args.direction, args.intensity, args.steps + 1
        )
        payload = {
            "mode": "linear",
            "intensity": args.intensity,
            "n_steps": args.steps,
            "ts": lin.ts.tolist(),
            "z_points": lin.z_points.tolist(),
            "w_line": lin.w_line.tolist(),
            "w_push": lin.w_push.tolist(),
        }
        rows = _linear_step_rows(lin)
    else:
        if args.mode == "iterative":
            path = travmod.iterative_traverse(
                net, z0, args.direction, args.intensity, args.steps, sign=args.sign
            )
        else:
            if not args.guide_file:
                raise InvalidDirectionError(
                    f"mode {args.mode!r} requires --guide-file"
                )
            guide = load_direction_set(args.guide_file)[args.guide_index]
            if args.mode == "stochastic-guided":
                policy = travmod.UniformRandomStepPolicy(
                    lo=args.step_lo, hi=args.step_hi, seed=args.seed
                )
            else:
                policy = travmod.FixedStepPolicy()
            path = travmod.guided_iterative_traverse(
                net,
                z0,
                guide,
                args.intensity,
                n_steps=args.steps,
                step_policy=policy,
                similarity_target=(
                    travmod.SimilarityTarget.PREVIOUS_DIRECTION
                    if args.similarity == "previous"
                    else travmod.SimilarityTarget.GLOBAL_EVERY_STEP
                ),
            )
        payload = path.to_dict()
        rows = _path_step_rows(path)
    _write_json(args.out_json, payload)
    if args.out_csv:
        _write_csv(
            args.out_csv,
            ["step", "chord_length", "cosine_to_previous", "sigma", "direction_index"],
            rows,
        )
    return 0


def _cmd_deviation(args):
    net = netmod.load_network(args.net)
    z_hints = None
    intensities = None
    if args.path_file:
        data = json.load(open(args.path_file))
        if "iterates" in data:
            points = np.asarray(
                [it["w"] for it in data["iterates"]], dtype=np.float64
            )
            z_hints = [
                np.asarray(it["z"], dtype=np.float64) for it in data["iterates"]
            ]
            n_steps = data["n_steps"]
            intensities = [
                data["intensity"] * n / n_steps if n_steps else 0.0
                for n in range(len(points))
            ]
        else:
            points = np.asarray(data["w_line"], dtype=np.float64)
            z_hints = [np.asarray(z, dtype=np.float64) for z in data["z_points"]]
            intensities = data["ts"]
    else:
        points = np.asarray(json.load(open(args.points_file)), dtype=np.float64)
        points = np.atleast_2d(points)
    if intensities is None:
        intensities = [""] * len(points)
    results = devmod.traversal_deviation(
        net, points, restarts=args.restarts, seed=args.seed, z_hints=z_hints
    )
    rows = [
        {
            "point_index": i,
            "intensity": intensities[i],
            "residual": res.residual,
            "converged": int(res.converged),
        }
        for i, res in enumerate(results)
    ]
    _write_csv(
        args.out,
        ["point_index", "intensity", "residual", "converged"],
        rows,
        note="residual is an upper bound on the distance to the latent manifold",
    )
    return 0


def _cmd_warpage(args):
    net = netmod.load_network(args.net)
    report = evalmod.warpage_suite(
        net,
        _parse_list(args.k, int),
        n_pairs=args.pairs,
        n_pairs_random_od=args.pairs_od,
        eps=args.eps,
        seed=args.seed,
        ganspace_samples=args.ganspace_samples,
        threads=args.threads,
    )
    report.to_csv(args.out_csv)
    if args.out_json:
        report.to_json(args.out_json)
    return 0


def _cmd_eps_sweep(args):
    net = netmod.load_network(args.net)
    report = evalmod.eps_sweep(
        net,
        args.k,
        _parse_list(args.eps, float),
        args.pairs,
        seed=args.seed,
        threads=args.threads,
    )
    report.to_csv(args.out_csv)
    if args.out_json:
        report.to_json(args.out_json)
    return 0


def _cmd_sv_hist(args):
    net = netmod.load_network(args.net)
    report = evalmod.sv_histogram(
        net, args.points, args.bins, seed=args.seed
    )
    report.to_csv(args.out_csv)
    if args.out_json:
        report.to_json(args.out_json)
    return 0


def _cmd_grid(args):
    net = netmod.load_network(args.net)
    z = sample_latent(net, args.seed)
    frame = local_basis(net, z)
    grid = evalmod.subspace_grid(
        net, frame, args.i, args.j, args.half_extent, args.n
    )
    _write_json(
        args.out,
        {
            "i": args.i,
            "j": args.j,
            "half_extent": args.half_extent,
            "n_per_axis": args.n,
            "z": z.tolist(),
            "w": frame.w.tolist(),
            "grid": grid.tolist(),
        },
    )
    return 0


def _cmd_validate(args):
    net = netmod.load_network(args.net)
    rng = np.random.default_rng(args.seed)
    ok = True

    def report(name, passed, detail):
        nonlocal ok
        ok = ok and passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        worst = 0.0
        for _ in range(10):
            z = netmod.nudge_off_boundary(net, rng.standard_normal(net.in_dim), rng)
            frame = local_basis(net, z)
            J = netmod.jacobian(net, z)
            err = np.max(np.abs(J @ frame.U - frame.V * frame.S[None, :]))
            worst = max(worst, float(err))
        report("svd-identity", worst <= 1e-9, f"max |J u - sigma v| = {worst:.3e}")

        worst = 0.0
        for _ in range(5):
            z = netmod.nudge_off_boundary(net, rng.standard_normal(net.in_dim), rng)
            J = netmod.jacobian(net, z)
            J_fd = finite_difference_jacobian(net, z)
            scale = np.maximum(np.abs(J), 1e-8)
            worst = max(worst, float(np.max(np.abs(J - J_fd) / scale)))
        report(
            "finite-difference-jacobian",
            worst <= 1e-4,
            f"max relative error = {worst:.3e}",
        )

        z = netmod.nudge_off_boundary(net, rng.standard_normal(net.in_dim), rng)
        frame = local_basis(net, z)
        comps, _ = local_pca_oracle(
            net, z, c=1e-2, n_samples=50 * net.in_dim, rng_seed=args.seed
        )
        gaps = spectral_gaps(frame.S)
        worst_cos = 1.0
        for i in range(frame.n):
            if gaps[i] > 0.05 * frame.S[0]:
                worst_cos = min(
                    worst_cos, float(np.abs(comps[:, i] @ frame.V[:, i]))
                )
        report(
            "local-pca-equivalence",
            worst_cos >= 0.99,
            f"min |cos| over gapped components = {worst_cos:.5f}",
        )
    return 0 if ok else 1


def finite_difference_jacobian(net, z, h=1e-5):
    """Central-difference Jacobian; an independent checker, not the product."""
    z = np.asarray(z, dtype=np.float64)
    cols = []
    for i in range(net.in_dim):
        e = np.zeros_like(z)
        e[i] = h
        wp, _ = netmod.forward(net, z + e)
        wm, _ = netmod.forward(net, z - e)
        cols.append((wp - wm) / (2 * h))
    return np.stack(cols, axis=1)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="latentgeom",
        description="Local traversal frames and warpage metrics for "
        "piecewise-affine latent mapping networks.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("LATENTGEOM_THREADS", "1")),
        help="worker cap for parallel sections (env LATENTGEOM_THREADS)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-net", help="generate a synthetic network file")
    p.add_argument("--dims", required=True, help="comma-separated layer widths")
    p.add_argument("--slope", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--init", choices=[e.value for e in InitScheme], default="gaussian"
    )
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen_net)

    p = sub.add_parser("basis", help="compute a local frame at a sampled z")
    p.add_argument("--net", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--z-file", help="JSON vector to use instead of sampling")
    p.add_argument("--full", action="store_true", help="include U and V")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_basis)

    p = sub.add_parser("traverse", help="run a latent traversal")
    p.add_argument("--net", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--direction", type=int, default=1, help="1-based index")
    p.add_argument("--sign", type=int, choices=[1, -1], default=1)
    p.add_argument("--intensity", type=float, default=4.0)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument(
        "--mode",
        choices=["linear", "iterative", "guided", "stochastic-guided"],
        default="iterative",
    )
    p.add_argument("--guide-file", help="vector-set JSON for guided modes")
    p.add_argument("--guide-index", type=int, default=0)
    p.add_argument(
        "--similarity", choices=["global", "previous"], default="global"
    )
    p.add_argument("--step-lo", type=float, default=0.05)
    p.add_argument("--step-hi", type=float, default=0.15)
    p.add_argument("--out-json", required=True)
    p.add_argument("--out-csv")
    p.set_defaults(fn=_cmd_traverse)

    p = sub.add_parser("deviation", help="manifold-deviation residuals")
    p.add_argument("--net", required=True)
    p.add_argument("--path-file", help="JSON path from the traverse subcommand")
    p.add_argument("--points-file", help="JSON list of ambient points")
    p.add_argument("--restarts", type=int, default=devmod.DEFAULT_RESTARTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_deviation)

    p = sub.add_parser("warpage", help="five-way subspace distance suite")
    p.add_argument("--net", required=True)
    p.add_argument("--k", required=True, help="comma-separated dimensions")
    p.add_argument("--pairs", type=int, default=evalmod.DEFAULT_N_PAIRS)
    p.add_argument(
        "--pairs-od", type=int, default=evalmod.DEFAULT_N_PAIRS_RANDOM_OD
    )
    p.add_argument("--eps", type=float, default=evalmod.DEFAULT_EPS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ganspace-samples", type=int)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json")
    p.set_defaults(fn=_cmd_warpage)

    p = sub.add_parser("eps-sweep", help="close-pair distances vs separation")
    p.add_argument("--net", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", required=True, help="comma-separated values")
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json")
    p.set_defaults(fn=_cmd_eps_sweep)

    p = sub.add_parser("sv-hist", help="singular-value histogram vs baseline")
    p.add_argument("--net", required=True)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json")
    p.set_defaults(fn=_cmd_sv_hist)

    p = sub.add_parser("grid", help="2-D subspace traversal mesh")
    p.add_argument("--net", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--i", type=int, default=1, help="1-based direction index")
    p.add_argument("--j", type=int, default=2, help="1-based direction index")
    p.add_argument("--half-extent", type=float, default=4.0)
    p.add_argument("--n", type=int, default=4, help="points per half-axis")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_grid)

    p = sub.add_parser("validate", help="run the invariant suite on a net")
    p.add_argument("--net", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_validate)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (
        WeightFileError,
        ShapeError,
        RankDeficiencyError,
        UnderSampledError,
        InvalidDirectionError,
        ValueError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
