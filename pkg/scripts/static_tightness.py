#!/usr/bin/env python3
"""How often the static protocol reaches each distinct-decision count under adversarial objects."""

import argparse
from collections import Counter

from setcon import al, parse_collection
from setcon.protocols import build_static
from setcon.runtime import Schedule, new_world


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--collection", default="1:1,2:1,5:2")
    ap.add_argument("--n", type=int, default=9)
    ap.add_argument("--seeds", type=int, default=500)
    ap.add_argument("--policy", default="adversarial", choices=["adversarial", "first-wins"])
    args = ap.parse_args()
    c = parse_collection(args.collection)
    proto = build_static(c, args.n)
    inputs = list(range(1, args.n + 1))
    hist = Counter()
    for seed in range(args.seeds):
        w = new_world(args.n, proto, inputs, Schedule.seeded(seed), object_policy=args.policy)
        w.run()
        hist[len(set(w.trace.decisions().values()))] += 1
    print(f"# witness {proto.witness}, AL_{args.n} = {al(c, args.n)}")
    print("distinct\truns")
    for k in sorted(hist):
        print(f"{k}\t{hist[k]}")


if __name__ == "__main__":
    main()
