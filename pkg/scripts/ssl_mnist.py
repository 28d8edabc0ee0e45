"""Label propagation error on a 1000-digit MNIST subset for NNK and KNN graphs.

Uses the 5000-digit MNIST sample shipped with mlxtend (100 digits per class
are drawn from it).  Prints mean and std of the misclassification rate per
builder, Laplacian and K, and the spread of the per-K means.

    python scripts/ssl_mnist.py --ks 10,20,30,40,50 --out results/ssl.csv
"""
import argparse

import numpy as np

from nnkgraph.dataset import load_bundled_mnist, subsample_per_class
from nnkgraph.spectral import ssl_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--per-class", type=int, default=100)
    ap.add_argument("--ks", default="10,15,20,25,30,35,40,45,50")
    ap.add_argument("--fraction", type=float, default=0.1)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--methods", default="nnk,knn")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="ssl.csv")
    args = ap.parse_args()

    ps = subsample_per_class(load_bundled_mnist(), args.per_class, seed=args.seed)
    ks = [int(k) for k in args.ks.split(",")]
    methods = args.methods.split(",")
    res = ssl_experiment(ps, methods, ks, [args.fraction], n_trials=args.trials,
                         seed=args.seed, workers=args.threads)
    res.write_csv(args.out)

    for lap in ("combinatorial", "sym_normalized"):
        print(f"\n{lap}")
        for m in methods:
            means = [res.mean(m, lap, K, args.fraction) for K in ks]
            cells = " ".join(f"{v:.3f}" for v in means)
            print(f"  {m:8s} {cells}   spread over K: {np.std(means):.4f}")


if __name__ == "__main__":
    main()
