#!/usr/bin/env python3
"""Generate a synthetic dataset and ingest it into the bricked layout.

Examples:
    python scripts/make_dataset.py --name shell --size 64 --out data/shell64
    python scripts/make_dataset.py --name sparse4 --size 256 --channels 4 \
        --brick 32 --levels 4 --out data/sparse256
"""

import argparse

from resoctree import datasets
from resoctree.ingest import build_hierarchy


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--name", default="shell",
                    help="synthetic volume name, or 'sparse4' for the "
                         "multi-channel sparse benchmark dataset")
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--channels", type=int, default=1)
    ap.add_argument("--brick", type=int, default=16)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    if args.name == "sparse4":
        chans = datasets.sparse_multichannel(args.size, channels=args.channels)
    else:
        chans = [datasets.make(args.name, args.size)
                 for _ in range(args.channels)]
    man = build_hierarchy(chans, (args.brick,) * 3, args.levels, (2, 2, 2),
                          args.out, name=args.name)
    total = sum(
        g[0] * g[1] * g[2]
        for g in (lvl.brick_grid_dims for lvl in man.levels)) * man.channel_count
    print(f"{args.out}: {man.channel_count} channel(s), "
          f"{len(man.levels)} level(s), {total} bricks")


if __name__ == "__main__":
    main()
