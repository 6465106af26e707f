#!/usr/bin/env python3
"""BG simulation of the static protocol: progress per crash budget f.

Two crash strategies per f: random crashes inside agreement windows, and
crashes that block whole witness groups (the blocking multiset).  Below
AL_n some simulated process always decides; at f = AL_n the blocking
multiset may stop everyone.
"""

import argparse
from collections import Counter

from setcon import al, parse_collection
from setcon.bg import bg_run
from setcon.runtime import Schedule
from setcon.sweeps import BlockingCrasher, WindowCrasher, witness_blockers
from setcon.verify import check_bg_consistency, check_bg_objects, check_bg_progress


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--collection", default="1:1,2:1,5:2")
    ap.add_argument("--n", type=int, default=9)
    ap.add_argument("--simulators", default="5,10")
    ap.add_argument("--seeds", type=int, default=200)
    args = ap.parse_args()
    c = parse_collection(args.collection)
    bound = al(c, args.n)
    print(f"# AL_{args.n} = {bound}")
    print("m\tf\tstrategy\truns\tmean_crashes\tprogress\tfail\tinventories")
    for m in (int(x) for x in args.simulators.split(",")):
        inputs = [1000 + q for q in range(m)]
        for f in range(bound + 1):
            for strategy in ("window", "blocking"):
                invs, prog, fail, crashes = Counter(), 0, 0, 0
                for seed in range(args.seeds):
                    if strategy == "window":
                        hook = WindowCrasher(f, seed, prob=0.5, include="bg/")
                    else:
                        hook = BlockingCrasher(witness_blockers(c, args.n, f))
                    res = bg_run(c, args.n, m, inputs, Schedule.seeded(seed), crash_hook=hook)
                    reports = [check_bg_progress(c, args.n, res), check_bg_consistency(res),
                               check_bg_objects(res)]
                    prog += bool(res.simulated_decisions())
                    fail += not all(r.passed for r in reports)
                    crashes += len(res.crashed)
                    invs[",".join(f"{t}:{s}" for t, s in res.inventory()) or "-"] += 1
                common = " ".join(f"{k}x{v}" for k, v in invs.most_common(3))
                print(f"{m}\t{f}\t{strategy}\t{args.seeds}\t{crashes / args.seeds:.2f}\t{prog}\t{fail}\t{common}")


if __name__ == "__main__":
    main()
