#!/usr/bin/env python3
"""Convert Hugging Face GPT-2 weights (model.safetensors) to a tsalign checkpoint.

Usage:
    convert_gpt2.py MODEL_DIR OUT.ckpt [--blocks 6]

MODEL_DIR must hold model.safetensors; vocab.json and merges.txt are copied
next to OUT.ckpt when present.
"""

import argparse
import re
import shutil
import sys
from pathlib import Path

import numpy as np
from safetensors.numpy import load_file

HEADER = "TSALIGN-CHECKPOINT 1"
KEEP = re.compile(r"^(wte|wpe)\.weight$|^h\.\d+\.|^ln_f\.")


def tensor_name(key):
    """Maps a Hugging Face key to the checkpoint name, or None to skip it."""
    key = key.removeprefix("transformer.")
    if not KEEP.match(key) or key.endswith(".attn.bias") or key.endswith(".attn.masked_bias"):
        return None
    if key in ("wte.weight", "wpe.weight"):
        return key.split(".")[0]
    return key


def block_index(name):
    m = re.match(r"^h\.(\d+)\.", name)
    return int(m.group(1)) if m else None


def write_checkpoint(tensors, path, metadata):
    with open(path, "wb") as f:
        lines = [HEADER]
        lines += [f"@{k} {v}" for k, v in metadata.items()]
        lines += [name + " " + " ".join(str(d) for d in arr.shape) for name, arr in tensors]
        lines.append("END")
        f.write(("\n".join(lines) + "\n").encode("ascii"))
        for _, arr in tensors:
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("model_dir", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--blocks", type=int, default=6, help="decoder blocks to keep (0 = all)")
    args = ap.parse_args(argv)

    source = args.model_dir / "model.safetensors"
    if not source.exists():
        print(f"error: {source} not found", file=sys.stderr)
        return 1
    raw = load_file(str(source))

    tensors = []
    for key in sorted(raw):
        name = tensor_name(key)
        if name is None:
            continue
        b = block_index(name)
        if args.blocks and b is not None and b >= args.blocks:
            continue
        tensors.append((name, raw[key]))

    order = {"wte": 0, "wpe": 1}
    tensors.sort(key=lambda t: (order.get(t[0], 2 if block_index(t[0]) is not None else 3),
                                block_index(t[0]) or 0, t[0]))
    names = {t[0] for t in tensors}
    for required in ("wte", "wpe", "ln_f.weight", "ln_f.bias"):
        if required not in names:
            print(f"error: {source} has no tensor for '{required}'", file=sys.stderr)
            return 1

    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_checkpoint(tensors, args.out, {"kind": "gpt2", "source": source.name})
    for extra in ("vocab.json", "merges.txt"):
        if (args.model_dir / extra).exists():
            shutil.copy(args.model_dir / extra, args.out.parent / extra)
    print(f"wrote {args.out} ({len(tensors)} tensors)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
