"""Center node of a seven-point star: which neighbors NNK keeps versus KNN.

Six points sit around the origin at 60 degree steps, alternating radius 1
and 2.5.  The three far points are each shadowed by the near points on
either side, so NNK keeps only the near ring.
"""
import numpy as np

from nnkgraph.dataset import PointSet
from nnkgraph.graph import build_knn, build_nnk
from nnkgraph.kernel import KernelSpec


def main():
    ang = np.deg2rad([0, 60, 120, 180, 240, 300])
    r = np.array([1, 2.5, 1, 2.5, 1, 2.5])
    ps = PointSet(np.vstack([[0.0, 0.0], np.c_[r * np.cos(ang), r * np.sin(ang)]]))
    spec = KernelSpec.gaussian(1.0)
    for name, g in (("nnk", build_nnk(ps, 5, spec)), ("knn", build_knn(ps, 5, spec))):
        fit = g.fits[0]
        kept = ", ".join(f"{j}:{w:.3f}" for j, w in zip(fit.support, fit.weights))
        print(f"{name}: center keeps {len(fit.support)} of {len(fit.candidates)} "
              f"candidates [{kept}], graph degree {g.degrees()[0]}, objective {fit.objective:.4f}")


if __name__ == "__main__":
    main()
