"""Edge density against K on a noisy, nonuniformly sampled swiss roll.

One bandwidth (set from the K=10 neighbor distances) is shared by every K,
so only the neighborhood size changes along the sweep.

    python scripts/density_sweep.py --out results/density.csv
"""
import argparse
import csv
import time

from nnkgraph.dataset import SwissRollConfig, make_swiss_roll
from nnkgraph.graph import build, edge_density
from nnkgraph.kernel import KernelSpec, bandwidth_from_neighbors
from nnkgraph.neighbors import knn_search


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--ks", default="5,10,15,20,25,30,35,40,45,50")
    ap.add_argument("--methods", default="knn,nnk,nnk_mp,nnk_omp")
    ap.add_argument("--sigma-k", type=int, default=10)
    ap.add_argument("--out", default="density.csv")
    args = ap.parse_args()

    ks = [int(k) for k in args.ks.split(",")]
    ps = make_swiss_roll(SwissRollConfig(args.n, args.noise, "nonuniform", args.seed))
    spec = KernelSpec.gaussian(bandwidth_from_neighbors(ps, args.sigma_k))
    nl = knn_search(ps, max(ks))

    rows = []
    for method in args.methods.split(","):
        for K in ks:
            t0 = time.perf_counter()
            g = build(ps, method, K, spec, neighbors=nl)
            rows.append((method, K, edge_density(g), time.perf_counter() - t0))
            print(f"{method:8s} K={K:3d} density={rows[-1][2]:7.3f} ({rows[-1][3]:.2f}s)")

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["builder", "K", "density", "seconds"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
