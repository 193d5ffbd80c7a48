#!/usr/bin/env python3
"""Exports a GAN mapping network from a torch checkpoint to the JSON
weight format consumed by latentgeom.

Accepts either a pickled nn.Module (the fully-connected mapping stack,
possibly wrapped in Sequential) or a bare state_dict of Linear weights
and biases.  Leaky-ReLU slopes are read from the module when available,
otherwise taken from --slope (0.2, the StyleGAN-family default).

Pixel-norm style input normalization is not affine and cannot be folded
into the first layer; when such a module is found it is recorded in a
"note" field of the output instead of being silently dropped.

Usage: export.py <checkpoint> <out.json> [--slope S]
"""

from __future__ import annotations

import argparse
import json
import re
import sys

import numpy as np
import torch


class UnsupportedArchitectureError(Exception):
    """Checkpoint does not contain a recognizable affine + leaky-ReLU stack."""


_NORM_NAME = re.compile(r"(pixel|input)?norm", re.IGNORECASE)
_PASSTHROUGH = (torch.nn.Flatten, torch.nn.Identity, torch.nn.Dropout)


def _layers_from_module(module, default_slope):
    """Walks leaf submodules in order, pairing Linear with its activation."""
    leaves = [m for m in module.modules() if not list(m.children())]
    if not leaves:
        leaves = [module]
    layers = []
    notes = []
    pending = None  # Linear waiting for its activation
    unsupported = []

    def flush(slope):
        nonlocal pending
        if pending is not None:
            layers.append((pending, slope))
            pending = None

    for m in leaves:
        if isinstance(m, torch.nn.Linear):
            flush(None)  # previous Linear had no activation
            pending = m
        elif isinstance(m, torch.nn.LeakyReLU):
            if pending is None:
                unsupported.append(f"{type(m).__name__} (no preceding Linear)")
            else:
                flush(float(m.negative_slope))
        elif isinstance(m, torch.nn.ReLU):
            if pending is None:
                unsupported.append(f"{type(m).__name__} (no preceding Linear)")
            else:
                # ReLU is leaky-ReLU with slope 0; the target format needs
                # slope > 0, so reject rather than approximate
                unsupported.append("ReLU (slope 0 not representable)")
                flush(None)
        elif isinstance(m, _PASSTHROUGH):
            continue
        elif _NORM_NAME.search(type(m).__name__):
            notes.append(
                f"non-affine preprocessing {type(m).__name__} omitted; "
                "apply it to z before calling the exported network"
            )
        else:
            unsupported.append(type(m).__name__)
    flush(None)
    if unsupported:
        raise UnsupportedArchitectureError(
            "unsupported modules in checkpoint: " + ", ".join(sorted(set(unsupported)))
        )
    if not layers:
        raise UnsupportedArchitectureError("no Linear layers found in module")
    specs = []
    for linear, slope in layers:
        specs.append(
            {
                "weight": linear.weight.detach().cpu().double().numpy(),
                "bias": (
                    linear.bias.detach().cpu().double().numpy()
                    if linear.bias is not None
                    else np.zeros(linear.out_features)
                ),
                "slope": slope if slope is not None else default_slope,
                "activation": "leaky_relu",
            }
        )
    return specs, notes


def _layers_from_state_dict(state, default_slope):
    """Orders <prefix>.weight / <prefix>.bias pairs by their key order."""
    weights = {}
    order = []
    for key, value in state.items():
        if not torch.is_tensor(value) or value.ndim not in (1, 2):
            raise UnsupportedArchitectureError(
                f"state_dict entry {key!r} is not a Linear parameter"
            )
        prefix, _, kind = key.rpartition(".")
        if kind not in ("weight", "bias"):
            raise UnsupportedArchitectureError(
                f"state_dict entry {key!r} is not a Linear parameter"
            )
        if prefix not in weights:
            weights[prefix] = {}
            order.append(prefix)
        weights[prefix][kind] = value
    specs = []
    for prefix in order:
        entry = weights[prefix]
        if "weight" not in entry or entry["weight"].ndim != 2:
            raise UnsupportedArchitectureError(
                f"layer {prefix!r} has no 2-D weight tensor"
            )
        W = entry["weight"].detach().cpu().double().numpy()
        b = (
            entry["bias"].detach().cpu().double().numpy()
            if "bias" in entry
            else np.zeros(W.shape[0])
        )
        specs.append(
            {"weight": W, "bias": b, "slope": default_slope, "activation": "leaky_relu"}
        )
    return specs, []


def export(checkpoint_path, out_path, slope=0.2):
    """Writes the JSON weight file; returns the number of exported layers."""
    obj = torch.load(checkpoint_path, map_location="cpu", weights_only=False)
    if isinstance(obj, torch.nn.Module):
        specs, notes = _layers_from_module(obj, slope)
    elif isinstance(obj, dict):
        specs, notes = _layers_from_state_dict(obj, slope)
    else:
        raise UnsupportedArchitectureError(
            f"checkpoint holds {type(obj).__name__}, expected a module or state_dict"
        )
    for i in range(1, len(specs)):
        if specs[i]["weight"].shape[1] != specs[i - 1]["weight"].shape[0]:
            raise UnsupportedArchitectureError(
                f"layer {i} input size {specs[i]['weight'].shape[1]} does not "
                f"chain from layer {i - 1} output {specs[i - 1]['weight'].shape[0]}"
            )
    payload = {
        "in_dim": int(specs[0]["weight"].shape[1]),
        "layers": [
            {
                "weight": s["weight"].tolist(),
                "bias": s["bias"].tolist(),
                "activation": s["activation"],
                "slope": float(s["slope"]),
            }
            for s in specs
        ],
    }
    if notes:
        payload["note"] = "; ".join(notes)
    with open(out_path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    return len(specs)


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Export a torch mapping-network checkpoint to JSON weights."
    )
    parser.add_argument("checkpoint")
    parser.add_argument("out")
    parser.add_argument(
        "--slope",
        type=float,
        default=0.2,
        help="leaky-ReLU slope when the checkpoint does not record one",
    )
    args = parser.parse_args(argv)
    try:
        n = export(args.checkpoint, args.out, slope=args.slope)
    except (UnsupportedArchitectureError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"exported {n} layers to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
