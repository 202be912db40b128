#!/usr/bin/env python3
"""Convert the LINQS Cora release (cora.content, cora.cites) to the TSV node
dataset layout read by magna_cli.

Papers are numbered in cora.content order and classes in sorted name order.
Features are row-normalized unless --raw is given. The split takes
--per-class training nodes per class, then --val and --test nodes from a
seeded shuffle of the rest; remaining nodes get no split.
"""

import argparse
import random
from collections import defaultdict
from pathlib import Path


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", type=Path, help="directory with cora.content and cora.cites")
    parser.add_argument("out", type=Path, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--per-class", type=int, default=20)
    parser.add_argument("--val", type=int, default=500)
    parser.add_argument("--test", type=int, default=1000)
    parser.add_argument("--raw", action="store_true", help="keep binary features")
    args = parser.parse_args()

    ids, features, names = {}, [], []
    with open(args.source / "cora.content") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            ids[parts[0]] = len(ids)
            row = [float(x) for x in parts[1:-1]]
            total = sum(row)
            if not args.raw and total > 0:
                row = [x / total for x in row]
            features.append(row)
            names.append(parts[-1])
    classes = {name: i for i, name in enumerate(sorted(set(names)))}
    labels = [classes[name] for name in names]

    edges, seen, skipped = [], set(), 0
    with open(args.source / "cora.cites") as f:
        for line in f:
            parts = line.split()
            if len(parts) != 2:
                continue
            if parts[0] not in ids or parts[1] not in ids:
                skipped += 1
                continue
            a, b = ids[parts[1]], ids[parts[0]]
            key = (min(a, b), max(a, b))
            if a == b or key in seen:
                continue
            seen.add(key)
            edges.append(key)

    rng = random.Random(args.seed)
    order = list(range(len(labels)))
    rng.shuffle(order)
    split = {}
    taken = defaultdict(int)
    for v in order:
        if taken[labels[v]] < args.per_class:
            taken[labels[v]] += 1
            split[v] = "train"
    rest = [v for v in order if v not in split]
    for v in rest[: args.val]:
        split[v] = "val"
    for v in rest[args.val : args.val + args.test]:
        split[v] = "test"

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "features.tsv", "w") as f:
        for v, row in enumerate(features):
            f.write(f"{v}\t{','.join(repr(x) for x in row)}\n")
    with open(args.out / "edges.tsv", "w") as f:
        for a, b in edges:
            f.write(f"{a}\t{b}\n")
    with open(args.out / "labels.tsv", "w") as f:
        for v, c in enumerate(labels):
            f.write(f"{v}\t{c}\n")
    with open(args.out / "splits.tsv", "w") as f:
        for v in sorted(split):
            f.write(f"{v}\t{split[v]}\n")
    print(f"{len(labels)} nodes, {len(features[0])} features, {len(classes)} classes, "
          f"{len(edges)} undirected edges ({skipped} citation rows skipped)")


if __name__ == "__main__":
    main()
