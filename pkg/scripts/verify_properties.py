"""Run the geometric property suites and print a JSON report.

Same suites as ``nnkgraph verify``; kept here so the numbers can be
regenerated next to the other experiment outputs.
"""
import argparse
import json

from nnkgraph.cli import run_verify_suites


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--checks", default="kri,plane,polytope,lle")
    args = ap.parse_args()
    report = run_verify_suites(args.seed, args.trials, args.checks.split(","))
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
