"""Graph Laplacians and harmonic label propagation."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import cg

from .dataset import PointSet
from .graph import SparseGraph, build, edge_density
from .kernel import KernelSpec, bandwidth_from_neighbors
from .neighbors import knn_search

KINDS = ("combinatorial", "sym_normalized")
DENSE_LIMIT = 2000


class NoLabels(ValueError):
    pass


class SingularSystem(np.linalg.LinAlgError):
    pass


def _inv_sqrt_degree(W):
    deg = np.asarray(W.sum(axis=1)).ravel()
    out = np.zeros_like(deg)
    pos = deg > 0
    out[pos] = 1.0 / np.sqrt(deg[pos])
    return deg, out


def laplacian(g: SparseGraph, kind: str = "combinatorial") -> sp.csr_matrix:
    """``D - W`` or ``I - D^-1/2 W D^-1/2``; isolated nodes get an all-zero row."""
    if kind not in KINDS:
        raise ValueError(f"unknown Laplacian kind {kind!r}")
    W = g.adjacency()
    if kind == "combinatorial":
        deg = np.asarray(W.sum(axis=1)).ravel()
        return (sp.diags(deg) - W).tocsr()
    deg, dis = _inv_sqrt_degree(W)
    Dm = sp.diags(dis)
    return (sp.diags((deg > 0).astype(float)) - Dm @ W @ Dm).tocsr()


@dataclass
class LabelField:
    scores: np.ndarray  # N x C
    decided: np.ndarray  # -1 where no labeled node is reachable
    flagged: np.ndarray  # unlabeled nodes cut off from every label


def _solve_spd(A, B):
    n = A.shape[0]
    if n <= DENSE_LIMIT:
        try:
            return scipy.linalg.solve(A.toarray(), B, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise SingularSystem(str(exc)) from None
    out = np.empty_like(B)
    for c in range(B.shape[1]):
        x, info = cg(A, B[:, c], rtol=1e-8, atol=0.0, maxiter=10 * n)
        if info != 0:
            raise SingularSystem(f"conjugate gradient did not converge (info={info})")
        out[:, c] = x
    return out


def propagate_labels(g: SparseGraph, labels, kind: str = "combinatorial",
                     n_classes: int | None = None) -> LabelField:
    """Harmonic solution with labeled nodes (``labels >= 0``) as boundary values.

    Ties in the per-node argmax go to the lowest class index.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (g.n,):
        raise ValueError("labels must have one entry per node")
    L_mask = labels >= 0
    if not L_mask.any():
        raise NoLabels("no labeled nodes")
    C = n_classes if n_classes is not None else int(labels.max()) + 1
    F = np.zeros((g.n, C))
    F[np.flatnonzero(L_mask), labels[L_mask]] = 1.0

    W = g.adjacency()
    _, comp = connected_components(W, directed=False)
    reached = np.isin(comp, np.unique(comp[L_mask]))
    flagged = ~L_mask & ~reached
    U = np.flatnonzero(~L_mask & reached)
    Lidx = np.flatnonzero(L_mask)

    if U.size:
        if kind == "combinatorial":
            Lap = laplacian(g, "combinatorial")
            A = Lap[U][:, U]
            B = W[U][:, Lidx] @ F[Lidx]
        elif kind == "sym_normalized":
            _, dis = _inv_sqrt_degree(W)
            S = sp.diags(dis) @ W @ sp.diags(dis)
            A = sp.eye(U.size) - S[U][:, U]
            B = S[U][:, Lidx] @ F[Lidx]
        else:
            raise ValueError(f"unknown Laplacian kind {kind!r}")
        F[U] = _solve_spd(sp.csr_matrix(A), np.asarray(B))

    decided = np.argmax(F, axis=1)
    decided[flagged] = -1
    return LabelField(F, decided, flagged)


def reveal_labels(labels, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Hide all but a stratified random ``fraction`` of labels (at least one per class)."""
    labels = np.asarray(labels)
    n = labels.size
    classes = np.unique(labels[labels >= 0])
    n_lab = max(len(classes), int(round(fraction * n)))
    picked = [rng.choice(np.flatnonzero(labels == c)) for c in classes]
    rest = np.setdiff1d(np.arange(n), picked)
    extra = rng.choice(rest, size=min(n_lab - len(picked), rest.size), replace=False)
    out = np.full(n, -1, dtype=np.int64)
    chosen = np.concatenate([np.asarray(picked, dtype=np.int64), extra.astype(np.int64)])
    out[chosen] = labels[chosen]
    return out


def misclassification(field: LabelField, truth, revealed) -> float:
    truth = np.asarray(truth)
    evaluate = (np.asarray(revealed) < 0) & ~field.flagged
    if not evaluate.any():
        return 0.0
    return float(np.mean(field.decided[evaluate] != truth[evaluate]))


RESULT_COLUMNS = ("builder", "laplacian", "K", "fraction", "trial",
                  "misclassification", "build_seconds", "edge_density")


@dataclass
class SSLResult:
    rows: list = field(default_factory=list)

    def aggregate(self) -> list:
        groups = {}
        for r in self.rows:
            key = (r["builder"], r["laplacian"], r["K"], r["fraction"])
            groups.setdefault(key, []).append(r)
        out = []
        for (b, lap, K, frac), rs in groups.items():
            m = np.array([r["misclassification"] for r in rs])
            base = {"builder": b, "laplacian": lap, "K": K, "fraction": frac,
                    "build_seconds": rs[0]["build_seconds"],
                    "edge_density": rs[0]["edge_density"]}
            out.append({**base, "trial": "mean", "misclassification": float(m.mean())})
            out.append({**base, "trial": "std", "misclassification": float(m.std())})
        return out

    def mean(self, builder, laplacian_kind, K, fraction) -> float:
        m = [r["misclassification"] for r in self.rows
             if r["builder"] == builder and r["laplacian"] == laplacian_kind
             and r["K"] == K and r["fraction"] == fraction]
        return float(np.mean(m))

    def write_csv(self, path, digits: int = 12) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RESULT_COLUMNS)
            for r in self.rows + self.aggregate():
                w.writerow([_fmt(r[c], digits) for c in RESULT_COLUMNS])


def _fmt(v, digits):
    if isinstance(v, float):
        return f"{v:.{digits}g}"
    return v


def ssl_experiment(ps: PointSet, builders: Sequence[str], K, label_fractions: Iterable[float],
                   n_trials: int = 10, seed: int = 0, kinds: Sequence[str] = KINDS,
                   sigma_sq: float | None = None, workers: int = 1) -> SSLResult:
    """Misclassification of harmonic propagation over builders, K values and label fractions.

    Label reveals depend only on ``(seed, fraction, trial)``, so every builder
    sees the same labeled nodes.  Without ``sigma_sq`` the bandwidth places the
    mean K-th neighbor distance at three standard deviations, per K.
    """
    if ps.labels is None:
        raise NoLabels("point set has no labels")
    Ks = [K] if np.isscalar(K) else list(K)
    fractions = list(label_fractions)
    result = SSLResult()
    for k in Ks:
        nl = knn_search(ps, k)
        s2 = sigma_sq if sigma_sq is not None else bandwidth_from_neighbors(ps, k)
        spec = KernelSpec.gaussian(s2)
        for b in builders:
            t0 = time.perf_counter()
            g = build(ps, b, k, spec, neighbors=nl, workers=workers)
            seconds = time.perf_counter() - t0
            density = edge_density(g)
            for f_idx, frac in enumerate(fractions):
                for trial in range(n_trials):
                    rng = np.random.default_rng([seed, f_idx, trial])
                    revealed = reveal_labels(ps.labels, frac, rng)
                    for kind in kinds:
                        fld = propagate_labels(g, revealed, kind, n_classes=ps.n_classes)
                        result.rows.append({
                            "builder": b, "laplacian": kind, "K": k, "fraction": frac,
                            "trial": trial,
                            "misclassification": misclassification(fld, ps.labels, revealed),
                            "build_seconds": seconds, "edge_density": density,
                        })
    return result
