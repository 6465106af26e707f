#!/usr/bin/env python3
"""Agreement levels and witnesses for a collection, one row per system size."""

import argparse

from setcon import agreement_table, parse_collection, witness


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--collection", default="1:1,13:5,20:9")
    ap.add_argument("--n", type=int, default=26)
    args = ap.parse_args()
    c = parse_collection(args.collection)
    table = agreement_table(c, args.n)
    print("m\tAL\twitness")
    for m in range(1, args.n + 1):
        print(f"{m}\t{table[m]}\t{witness(c, m)}")


if __name__ == "__main__":
    main()
