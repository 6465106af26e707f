#!/usr/bin/env python3
"""Distinct decisions of the adaptive protocol against AL_m, per participation level."""

import argparse

from setcon import al, parse_collection
from setcon.sweeps import StressConfig, stress


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--collection", default="1:1,13:5,20:9")
    ap.add_argument("--n", type=int, default=26)
    ap.add_argument("--participation", default="1,2,5,14,17,21")
    ap.add_argument("--seeds", type=int, default=300)
    ap.add_argument("--stagger", type=int, default=400)
    ap.add_argument("--policy", default="adversarial", choices=["adversarial", "first-wins"])
    args = ap.parse_args()
    c = parse_collection(args.collection)
    print("m\tAL_m\truns\tfail\tmax_distinct")
    for m in (int(x) for x in args.participation.split(",")):
        cfg = StressConfig("adaptive", args.n, args.collection, participants=m,
                           seeds=range(args.seeds), policy=args.policy, stagger=args.stagger)
        s = stress(cfg)
        print(f"{m}\t{al(c, m)}\t{s.runs}\t{s.failed}\t{s.max_distinct}")


if __name__ == "__main__":
    main()
