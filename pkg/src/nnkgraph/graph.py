"""Graph construction: NNK, greedy NNK-MP/NNK-OMP, KNN and positive-weight LLE.

Every builder produces one ``LocalFit`` per node (a directed row of weights
together with the candidates it was chosen from and its fit error) and then
merges the rows into an undirected ``SparseGraph``.
"""
from __future__ import annotations

import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import nnqp
from .dataset import PointSet
from .kernel import KernelSpec, kernel_submatrix
from .neighbors import NeighborList, knn_search

BUILDERS = ("nnk", "nnk_mp", "nnk_omp", "knn", "lle_pos")


@dataclass
class LocalFit:
    """Directed result at one node.

    ``candidates`` are the neighbors the node was allowed to pick from
    (they carry the node's error in the symmetrization); ``support`` and
    ``weights`` are the neighbors it actually kept.
    """

    node: int
    candidates: np.ndarray
    support: np.ndarray
    weights: np.ndarray
    objective: float

    def weight_to(self, j: int) -> float:
        hit = np.flatnonzero(self.support == j)
        return float(self.weights[hit[0]]) if hit.size else 0.0


@dataclass
class SparseGraph:
    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    source: np.ndarray  # node whose local fit supplied each edge weight
    builder_tag: str
    fits: list = field(default_factory=list, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def n_edges(self) -> int:
        return len(self.weights)

    def adjacency(self) -> sp.csr_matrix:
        W = sp.coo_matrix((self.weights, (self.rows, self.cols)), shape=(self.n, self.n))
        return (W + W.T).tocsr()

    def dense(self) -> np.ndarray:
        return self.adjacency().toarray()

    def degrees(self) -> np.ndarray:
        return np.bincount(
            np.concatenate([self.rows, self.cols]), minlength=self.n
        )

    def edge_set(self) -> set:
        return set(zip(self.rows.tolist(), self.cols.tolist()))


def symmetrize(fits: list, n: int, builder_tag: str, mode: str = "error") -> SparseGraph:
    """Merge directed local fits into an undirected graph.

    ``mode="error"``: when both endpoints list each other as candidates the
    weight comes from the endpoint with the smaller fit error (the lower index
    on ties), which may be zero; a pair listed by one endpoint only keeps that
    endpoint's weight.  ``mode="union"``: an edge exists if either endpoint
    kept it, with the lower-index proposer's weight.
    """
    proposals = {}
    for fit in fits:
        i = fit.node
        w_row = dict(zip(fit.support.tolist(), fit.weights.tolist()))
        for j in fit.candidates.tolist():
            proposals[(i, j)] = (w_row.get(j, 0.0), fit.objective)

    rows, cols, weights, source = [], [], [], []
    seen = set()
    for (i, j) in proposals:
        a, b = (i, j) if i < j else (j, i)
        if (a, b) in seen:
            continue
        seen.add((a, b))
        pa = proposals.get((a, b))
        pb = proposals.get((b, a))
        if mode == "union":
            options = [(pa, a), (pb, b)]
            kept = [(p[0], s) for p, s in options if p is not None and p[0] > 0]
            if not kept:
                continue
            w, s = kept[0]
        elif pa is not None and pb is not None:
            if pa[1] <= pb[1]:
                w, s = pa[0], a
            else:
                w, s = pb[0], b
        else:
            (w, _), s = (pa, a) if pa is not None else (pb, b)
        if w > 0:
            rows.append(a)
            cols.append(b)
            weights.append(w)
            source.append(s)

    order = np.lexsort((cols, rows)) if rows else np.array([], dtype=int)
    return SparseGraph(
        n=n,
        rows=np.asarray(rows, dtype=np.int64)[order],
        cols=np.asarray(cols, dtype=np.int64)[order],
        weights=np.asarray(weights, dtype=float)[order],
        source=np.asarray(source, dtype=np.int64)[order],
        builder_tag=builder_tag,
        fits=sorted(fits, key=lambda f: f.node),
    )


def _map_nodes(fn, n, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, range(n)))
    return [fn(i) for i in range(n)]


def _attach_node(exc, i):
    exc.node = i
    exc.args = (f"node {i}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
    return exc


def nnk_local_fit(ps: PointSet, i: int, candidates, spec: KernelSpec,
                  zero_tol: float = nnqp.ZERO_TOL) -> LocalFit:
    candidates = np.asarray(candidates, dtype=np.int64)
    K_SS, K_Si = kernel_submatrix(ps, i, candidates, spec)
    try:
        sol = nnqp.solve(nnqp.QPProblem(K_SS.values, K_Si, zero_tol=zero_tol))
    except (nnqp.SingularSystem, nnqp.NonConvergence) as exc:
        raise _attach_node(exc, i)
    keep = sol.theta > 0
    return LocalFit(i, candidates, candidates[keep], sol.theta[keep], sol.objective)


def _neighbors(ps, K, neighbors):
    if neighbors is None:
        return knn_search(ps, K)
    if neighbors.k < K:
        raise ValueError(f"neighbor list has {neighbors.k} < K={K} entries")
    return neighbors


def _meta(K, spec, **extra):
    out = {"K": K, "kernel": spec.to_dict() if spec is not None else None,
           "threshold": nnqp.ZERO_TOL}
    out.update(extra)
    return out


def build_nnk(ps: PointSet, K: int, spec: KernelSpec, *, workers: int = 1,
              neighbors: Optional[NeighborList] = None) -> SparseGraph:
    """NNK graph: a non-negative kernel regression over each node's K nearest neighbors."""
    nl = _neighbors(ps, K, neighbors)
    fits = _map_nodes(lambda i: nnk_local_fit(ps, i, nl.indices[i, :K], spec), ps.n, workers)
    g = symmetrize(fits, ps.n, "nnk")
    g.meta = _meta(K, spec)
    return g


def greedy_local_fit(ps: PointSet, i: int, candidates, spec: KernelSpec, mode: str,
                     zero_tol: float = nnqp.ZERO_TOL) -> LocalFit:
    """Greedy atom selection among ``candidates`` (matching pursuit or its orthogonal form)."""
    candidates = np.asarray(candidates, dtype=np.int64)
    K_CC, K_Ci = kernel_submatrix(ps, i, candidates, spec)
    K_CC = K_CC.values
    first = int(np.argmax(K_Ci))
    sel = [first]
    theta = np.array([K_Ci[first]])
    for _ in range(1, len(candidates)):
        scores = K_Ci - K_CC[sel].T @ theta
        scores[sel] = -np.inf
        j = int(np.argmax(scores))
        if scores[j] < 0 or not np.isfinite(scores[j]):
            break
        sel.append(j)
        if mode == "omp":
            p = nnqp.QPProblem(K_CC[np.ix_(sel, sel)], K_Ci[sel], zero_tol=zero_tol)
            try:
                theta = nnqp.solve(p).theta
            except (nnqp.SingularSystem, nnqp.NonConvergence) as exc:
                raise _attach_node(exc, i)
        else:
            theta = np.append(theta, K_Ci[j])
    sel = np.asarray(sel)
    objective = float(0.5 * theta @ K_CC[np.ix_(sel, sel)] @ theta - K_Ci[sel] @ theta + 0.5)
    keep = theta >= zero_tol
    return LocalFit(i, candidates[sel], candidates[sel][keep], theta[keep], objective)


def build_nnk_greedy(ps: PointSet, K: int, spec: KernelSpec, mode: str = "omp", *,
                     workers: int = 1, neighbors: Optional[NeighborList] = None) -> SparseGraph:
    """NNK-MP (``mode="mp"``) or NNK-OMP (``mode="omp"``) graph.

    Selection is restricted to each node's K nearest neighbors.
    """
    if mode not in ("mp", "omp"):
        raise ValueError(f"mode must be 'mp' or 'omp', got {mode!r}")
    nl = _neighbors(ps, K, neighbors)
    fits = _map_nodes(lambda i: greedy_local_fit(ps, i, nl.indices[i, :K], spec, mode),
                      ps.n, workers)
    g = symmetrize(fits, ps.n, f"nnk_{mode}")
    g.meta = _meta(K, spec, mode=mode)
    return g


def knn_local_fit(ps: PointSet, i: int, candidates, spec: KernelSpec) -> LocalFit:
    candidates = np.asarray(candidates, dtype=np.int64)
    K_SS, K_Si = kernel_submatrix(ps, i, candidates, spec)
    # error of the thresholding weights theta = K_Si, for comparison with NNK
    J = float(0.5 * K_Si @ K_SS.values @ K_Si - K_Si @ K_Si + 0.5)
    return LocalFit(i, candidates, candidates, K_Si.copy(), J)


def build_knn(ps: PointSet, K: int, spec: KernelSpec, *, workers: int = 1,
              neighbors: Optional[NeighborList] = None) -> SparseGraph:
    """Kernel-weighted KNN graph, symmetrized by union."""
    nl = _neighbors(ps, K, neighbors)
    fits = _map_nodes(lambda i: knn_local_fit(ps, i, nl.indices[i, :K], spec), ps.n, workers)
    g = symmetrize(fits, ps.n, "knn", mode="union")
    g.meta = _meta(K, spec)
    return g


def lle_weights(center: np.ndarray, neighbors: np.ndarray, constraint: str = "nonneg_sum1",
                zero_tol: float = nnqp.ZERO_TOL):
    """Non-negative reconstruction weights of ``center`` from rows of ``neighbors``.

    ``nonneg``: min ||x - X'theta||^2 with theta >= 0.
    ``nonneg_sum1``: additionally sum(theta) = 1.  This is the closest point of
    the neighbors' convex hull; it is found as ``u / sum(u)`` where ``u`` solves
    the non-negative problem ``min ||Z'u||^2 + (1'u - 1)^2`` (``Z`` holds the
    neighbor offsets), whose minimizer direction coincides with the simplex
    minimizer.

    Returns ``(theta, residual)`` with residual = ||x - X'theta||^2.
    """
    X = np.asarray(neighbors, dtype=float)
    x = np.asarray(center, dtype=float)
    if constraint == "nonneg":
        A = X @ X.T
        b = X @ x
    elif constraint == "nonneg_sum1":
        Z = X - x
        A = Z @ Z.T + 1.0
        b = np.ones(len(X))
    else:
        raise ValueError(f"unknown constraint {constraint!r}")
    sol = nnqp.solve(nnqp.QPProblem(A, b, zero_tol=0.0))
    theta = sol.theta
    if constraint == "nonneg_sum1":
        theta = theta / theta.sum()
    theta = np.where(theta < zero_tol, 0.0, theta)
    if constraint == "nonneg_sum1":
        theta = theta / theta.sum()
    r = x - theta @ X
    return theta, float(r @ r)


def lle_local_fit(ps: PointSet, i: int, candidates, constraint: str) -> LocalFit:
    candidates = np.asarray(candidates, dtype=np.int64)
    x_i = ps.points[i]
    coincide = np.all(ps.points[candidates] == x_i, axis=1)
    if coincide.any():
        warnings.warn(f"node {i}: dropping {int(coincide.sum())} neighbor(s) coinciding with it")
        candidates = candidates[~coincide]
    if candidates.size == 0:
        return LocalFit(i, candidates, candidates, np.zeros(0), 0.0)
    try:
        theta, resid = lle_weights(x_i, ps.points[candidates], constraint)
    except (nnqp.SingularSystem, nnqp.NonConvergence) as exc:
        raise _attach_node(exc, i)
    keep = theta > 0
    return LocalFit(i, candidates, candidates[keep], theta[keep], resid)


def build_lle_positive(ps: PointSet, K: int, constraint: str = "nonneg_sum1", *,
                       workers: int = 1, neighbors: Optional[NeighborList] = None) -> SparseGraph:
    """Positive-weight LLE graph in observation space; residuals drive symmetrization."""
    nl = _neighbors(ps, K, neighbors)
    fits = _map_nodes(lambda i: lle_local_fit(ps, i, nl.indices[i, :K], constraint),
                      ps.n, workers)
    g = symmetrize(fits, ps.n, "lle_pos")
    g.meta = _meta(K, None, constraint=constraint)
    return g


def build(ps: PointSet, method: str, K: int, spec: Optional[KernelSpec], **kw) -> SparseGraph:
    """Dispatch on a builder tag from ``BUILDERS``."""
    if method == "nnk":
        return build_nnk(ps, K, spec, **kw)
    if method == "nnk_mp":
        return build_nnk_greedy(ps, K, spec, "mp", **kw)
    if method == "nnk_omp":
        return build_nnk_greedy(ps, K, spec, "omp", **kw)
    if method == "knn":
        return build_knn(ps, K, spec, **kw)
    if method == "lle_pos":
        return build_lle_positive(ps, K, **kw)
    raise ValueError(f"unknown builder {method!r}; choose from {BUILDERS}")


def edge_density(g: SparseGraph, threshold: float = 1e-8) -> float:
    """Undirected edges heavier than ``threshold`` per node."""
    if g.n == 0:
        return 0.0
    return float(np.count_nonzero(g.weights > threshold)) / g.n


def header_path(csv_path) -> str:
    root, _ = os.path.splitext(str(csv_path))
    return root + ".json"


def save_graph(g: SparseGraph, path, digits: int = 12) -> str:
    """Write ``i,j,weight`` rows to ``path`` and a JSON header next to it."""
    fmt = f"%d,%d,%.{digits}g\n"
    with open(path, "w") as fh:
        for i, j, w in zip(g.rows, g.cols, g.weights):
            fh.write(fmt % (i, j, w))
    header = {
        "n": g.n,
        "builder_tag": g.builder_tag,
        "kernel": g.meta.get("kernel"),
        "K": g.meta.get("K"),
        "threshold": g.meta.get("threshold", nnqp.ZERO_TOL),
    }
    hp = header_path(path)
    with open(hp, "w") as fh:
        json.dump(header, fh, indent=2)
    return hp


def load_graph(path) -> SparseGraph:
    with open(header_path(path)) as fh:
        header = json.load(fh)
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.size == 0:
        data = np.zeros((0, 3))
    rows = data[:, 0].astype(np.int64)
    cols = data[:, 1].astype(np.int64)
    return SparseGraph(
        n=int(header["n"]), rows=rows, cols=cols, weights=data[:, 2].copy(),
        source=rows.copy(), builder_tag=header["builder_tag"],
        meta={k: header.get(k) for k in ("kernel", "K", "threshold")},
    )
