"""Verify every packaged problem file and print a one-line summary per file."""
import argparse
import sys
import time

from jetkit.cli import corpus_dir
from jetkit.parser import load_problem
from jetkit.runner import run_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--jobs", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    bad = 0
    for path in sorted(corpus_dir().glob("*.prob")):
        t0 = time.perf_counter()
        p = load_problem(path, seed=args.seed)
        outs = run_problem(p, jobs=args.jobs)
        ok = sum(o.report.ok for o in outs)
        bad += ok != len(outs)
        print(f"{p.name:<14} {ok:>2}/{len(outs):<2} pass   {time.perf_counter() - t0:6.1f}s")
        for o in outs:
            if not o.report.ok:
                print(f"    {o.verdict}: {o.assertion.text}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
