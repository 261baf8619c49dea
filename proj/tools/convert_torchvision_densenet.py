#!/usr/bin/env python3
# Copyright (c) 2026 The cxrcascade authors
# SPDX-License-Identifier: Apache-2.0
"""Convert a torchvision DenseNet weight file into a cxrcascade base checkpoint.

Reads a published state_dict (e.g. densenet121-a639ec97.pth), verifies that it
describes a densely connected backbone, and writes a CXRCKPT1 checkpoint whose
backbone parameters equal the source weights. The single-logit head is freshly
seeded by default; pass --head keep when the source classifier already has one
output (e.g. a fine-tuned export).

Usage:
    convert_torchvision_densenet.py --weights densenet121.pth --out base.ckpt
"""

import argparse
import hashlib
import json
import math
import re
import struct
import sys

import numpy as np

MAGIC = b"CXRCKPT1"
FORMAT_VERSION = 1

# Old torchvision exports name dense-layer children "norm.1", "conv.2", ...;
# current ones use "norm1", "conv2". Same remap torchvision applies on load.
_LEGACY_KEY = re.compile(
    r"^(.*denselayer\d+\.(?:norm|relu|conv))"
    r"\.((?:[12])\.(?:weight|bias|running_mean|running_var))$"
)


class ConvertError(Exception):
    pass


def load_state_dict(path):
    import torch

    obj = torch.load(path, map_location="cpu", weights_only=True)
    if isinstance(obj, dict) and "state_dict" in obj and isinstance(obj["state_dict"], dict):
        obj = obj["state_dict"]
    if not isinstance(obj, dict) or not obj:
        raise ConvertError(f"{path} does not contain a state dict")
    sd = {}
    for key, value in obj.items():
        m = _LEGACY_KEY.match(key)
        if m:
            key = m.group(1) + m.group(2)
        sd[key] = value.detach().cpu().numpy().astype(np.float64)
    return sd


def infer_config(sd):
    """Read the backbone geometry off the tensor shapes."""

    def shape(key):
        if key not in sd:
            raise ConvertError(f"weight file is missing tensor '{key}'")
        return sd[key].shape

    stem_channels, in_channels = shape("features.conv0.weight")[:2]
    growth = shape("features.denseblock1.denselayer1.conv2.weight")[0]
    bottleneck = shape("features.denseblock1.denselayer1.conv1.weight")[0]
    if growth < 1 or bottleneck % growth != 0:
        raise ConvertError(
            f"conv1 width {bottleneck} is not a multiple of growth {growth}"
        )
    block_layers = []
    b = 1
    while f"features.denseblock{b}.denselayer1.conv1.weight" in sd:
        n = 1
        while f"features.denseblock{b}.denselayer{n + 1}.conv1.weight" in sd:
            n += 1
        block_layers.append(n)
        b += 1
    if not block_layers:
        raise ConvertError("weight file holds no dense blocks")

    compression = 0.5
    if "features.transition1.conv.weight" in sd:
        t_out, t_in = shape("features.transition1.conv.weight")[:2]
        for cand in (0.5, t_out / t_in):
            if _transitions_consistent(sd, stem_channels, growth, block_layers, cand):
                compression = cand
                break
        else:
            raise ConvertError(
                f"transition widths are inconsistent (transition1: {t_in} -> {t_out})"
            )
    return {
        "kind": "dense121",
        "in_channels": int(in_channels),
        "densenet": {
            "stem_channels": int(stem_channels),
            "growth": int(growth),
            "bn_size": int(bottleneck // growth),
            "block_layers": [int(n) for n in block_layers],
            "compression": float(compression),
        },
    }


def _transition_out(in_ch, compression):
    return max(1, math.floor(in_ch * compression))


def _transitions_consistent(sd, stem, growth, block_layers, compression):
    ch = stem
    for b, n in enumerate(block_layers, start=1):
        ch += n * growth
        if b == len(block_layers):
            break
        key = f"features.transition{b}.conv.weight"
        if key not in sd or sd[key].shape[0] != _transition_out(ch, compression):
            return False
        ch = _transition_out(ch, compression)
    return True


def expected_state(config):
    """(name, shape) pairs in checkpoint order: parameters, then BN stats."""
    d = config["densenet"]
    stem, growth, bn_size = d["stem_channels"], d["growth"], d["bn_size"]
    params, stats = [], []

    def norm(prefix, ch):
        params.append((f"{prefix}.weight", (ch,)))
        params.append((f"{prefix}.bias", (ch,)))
        stats.append((f"{prefix}.running_mean", (ch,)))
        stats.append((f"{prefix}.running_var", (ch,)))

    params.append(("features.conv0.weight", (stem, config["in_channels"], 7, 7)))
    norm("features.norm0", stem)
    ch = stem
    for b, n in enumerate(d["block_layers"], start=1):
        for l in range(1, n + 1):
            layer = f"features.denseblock{b}.denselayer{l}"
            norm(f"{layer}.norm1", ch)
            params.append((f"{layer}.conv1.weight", (bn_size * growth, ch, 1, 1)))
            norm(f"{layer}.norm2", bn_size * growth)
            params.append((f"{layer}.conv2.weight", (growth, bn_size * growth, 3, 3)))
            ch += growth
        if b < len(d["block_layers"]):
            out = _transition_out(ch, d["compression"])
            norm(f"features.transition{b}.norm", ch)
            params.append((f"features.transition{b}.conv.weight", (out, ch, 1, 1)))
            ch = out
    norm("features.norm5", ch)
    params.append(("classifier.weight", (1, ch)))
    params.append(("classifier.bias", (1,)))
    return params + stats, ch


def convert_state_dict(sd, head="fresh", head_seed=0):
    """Order and validate tensors; returns (config, [(name, array), ...])."""
    config = infer_config(sd)
    expected, feature_channels = expected_state(config)

    if head == "keep":
        key = "classifier.weight"
        if key not in sd or sd[key].shape != (1, feature_channels):
            got = "absent" if key not in sd else "x".join(map(str, sd[key].shape))
            raise ConvertError(
                f"--head keep needs classifier.weight of shape 1x{feature_channels}, got {got}"
            )
    else:
        rng = np.random.RandomState(head_seed)
        sd = dict(sd)
        sd["classifier.weight"] = rng.normal(0.0, 0.01, (1, feature_channels))
        sd["classifier.bias"] = np.zeros((1,))

    state = []
    for name, shape in expected:
        if name not in sd:
            raise ConvertError(f"weight file is missing tensor '{name}'")
        arr = np.ascontiguousarray(sd[name], dtype=np.float64)
        if arr.shape != shape:
            raise ConvertError(
                "shape mismatch for tensor '{}': file has {}, expected {}".format(
                    name, "x".join(map(str, arr.shape)), "x".join(map(str, shape))
                )
            )
        state.append((name, arr))

    used = {name for name, _ in expected}
    for key in sd:
        if key not in used and not key.endswith(".num_batches_tracked"):
            raise ConvertError(f"unexpected tensor '{key}' in weight file")
    return config, state


def write_checkpoint(path, config, state, meta):
    payload = b"".join(arr.tobytes() for _, arr in state)
    tensors, offset = [], 0
    for name, arr in state:
        tensors.append(
            {"name": name, "shape": list(arr.shape), "offset": offset, "count": arr.size}
        )
        offset += arr.size
    header = json.dumps(
        {
            "format_version": FORMAT_VERSION,
            "model": config,
            "meta": meta,
            "param_hash": hashlib.sha256(payload).hexdigest(),
            "tensors": tensors,
        }
    ).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        f.write(payload)


def default_meta(target_size, median_window):
    return {
        "task": "",
        "stage": "base",
        "fold": -1,
        "parent_hash": "",
        "prep": {
            "target_size": target_size,
            "median_window": median_window,
            "channel_means": [0.485, 0.456, 0.406],
            "channel_stds": [0.229, 0.224, 0.225],
        },
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--weights", required=True, help="torchvision state_dict (.pth)")
    ap.add_argument("--out", required=True, help="checkpoint to write")
    ap.add_argument(
        "--head",
        choices=("fresh", "keep"),
        default="fresh",
        help="fresh: seeded single-logit head; keep: reuse a 1-output classifier",
    )
    ap.add_argument("--head-seed", type=int, default=0)
    ap.add_argument("--target-size", type=int, default=224, help="recorded prep size")
    ap.add_argument("--median-window", type=int, default=3)
    args = ap.parse_args(argv)

    try:
        sd = load_state_dict(args.weights)
        config, state = convert_state_dict(sd, head=args.head, head_seed=args.head_seed)
    except ConvertError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    write_checkpoint(
        args.out, config, state, default_meta(args.target_size, args.median_window)
    )
    d = config["densenet"]
    layers = "-".join(map(str, d["block_layers"]))
    print(
        f"wrote {args.out}: dense backbone (stem {d['stem_channels']}, growth "
        f"{d['growth']}, layers {layers}), {sum(a.size for _, a in state)} values"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
