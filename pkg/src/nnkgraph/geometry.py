"""Checkable geometric characterizations of NNK solutions.

* kernel ratio interval: the three-node connectivity rule;
* plane property: a Gaussian-kernel edge i->j disconnects every candidate
  whose projection on ``x_j - x_i`` lies beyond ``x_j``;
* polytope conditions: KKT conditions read per retained/pruned candidate;
* LLE comparison: NNK under the cosine-at-node kernel vs. positive
  sum-to-one LLE weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import PointSet
from .graph import LocalFit, SparseGraph, lle_weights, nnk_local_fit
from .kernel import DegenerateInput, KernelSpec
from .neighbors import knn_search

SLACK = 1e-8


class InvalidKernelValue(ValueError):
    pass


@dataclass(frozen=True)
class KRIVerdict:
    ratio: float
    lower: float
    upper: float
    j_connected: bool
    k_connected: bool

    @property
    def predicted_support(self) -> tuple:
        return tuple(name for name, on in (("j", self.j_connected), ("k", self.k_connected)) if on)

    @property
    def both_connected(self) -> bool:
        return self.j_connected and self.k_connected


def kri_predict(K_ij: float, K_ik: float, K_jk: float) -> KRIVerdict:
    """Which of j, k node i keeps, from the ratio K_ij / K_ik and K_jk.

    j stays iff ``K_jk < K_ij/K_ik``; k stays iff ``K_ij/K_ik < 1/K_jk``.
    """
    for name, v in (("K_ij", K_ij), ("K_ik", K_ik), ("K_jk", K_jk)):
        if not (0.0 < v <= 1.0):
            raise InvalidKernelValue(f"{name}={v} outside (0, 1]")
    if K_jk >= 1.0:
        raise InvalidKernelValue("K_jk = 1 means j and k coincide")
    ratio = K_ij / K_ik
    return KRIVerdict(ratio, K_jk, 1.0 / K_jk, K_jk < ratio, ratio < 1.0 / K_jk)


def kri_is_boundary(K3, rel: float = 1e-6, zero_tol: float = 1e-8) -> bool:
    """Whether a 3 x 3 kernel matrix sits on the edge of the interval rule.

    That is the ratio within ``rel`` (in log scale) of an interval endpoint, or
    an exact two-neighbor weight smaller than ``zero_tol``, which the solver
    truncates to zero.
    """
    K3 = np.asarray(K3, dtype=float)
    v = kri_predict(K3[0, 1], K3[0, 2], K3[1, 2])
    if min(abs(np.log(v.ratio / v.lower)), abs(np.log(v.upper / v.ratio))) < rel:
        return True
    pair = np.linalg.solve(K3[1:, 1:], K3[0, 1:])
    return bool(np.min(np.abs(pair)) < zero_tol)


def beyond_plane(x_i, x_j, x_k) -> bool:
    """True when ``x_k`` projects past ``x_j`` along the direction ``x_j - x_i``."""
    a = np.asarray(x_j, dtype=float) - x_i
    c = np.asarray(x_k, dtype=float) - x_i
    return bool(c @ a > a @ a)


def check_plane_property(g: SparseGraph, ps: PointSet) -> list:
    """Triples ``(i, j, k)`` where node i kept both j and a candidate k beyond j's plane.

    Checked on each node's own local fit, before symmetrization mixes rows.
    """
    X = ps.points
    violations = []
    for fit in g.fits:
        i = fit.node
        if fit.support.size < 2:
            continue
        kept = set(fit.support.tolist())
        for j in fit.support:
            a = X[j] - X[i]
            proj = (X[fit.candidates] - X[i]) @ a
            for k, pk in zip(fit.candidates, proj):
                if k != j and pk > a @ a and k in kept:
                    violations.append((int(i), int(j), int(k)))
    return violations


def check_plane_property_pairwise(g: SparseGraph, ps: PointSet, sigma_sq: float) -> list:
    """Plane rule on two-candidate sub-problems.

    For every kept edge i->j and candidate k beyond j's plane, the problem
    restricted to ``{j, k}`` must keep j and prune k.  Returns violating triples.
    """
    from .kernel import gaussian_matrix
    from .nnqp import QPProblem, solve

    X = ps.points
    violations = []
    for fit in g.fits:
        i = fit.node
        for j in fit.support:
            for k in fit.candidates:
                if k == j or not beyond_plane(X[i], X[j], X[k]):
                    continue
                K = gaussian_matrix(X[[i, j, k]], sigma_sq)
                theta = solve(QPProblem(K[1:, 1:], K[0, 1:])).theta
                if not (theta[0] > 0 and theta[1] == 0):
                    violations.append((int(i), int(j), int(k)))
    return violations


@dataclass
class PolytopeReport:
    node: int
    candidates: np.ndarray
    passed: np.ndarray
    stationarity: float
    min_pruned_margin: float

    @property
    def ok(self) -> bool:
        return bool(self.passed.all())


def check_polytope_conditions(fit: LocalFit, K_full) -> PolytopeReport:
    """Per-candidate optimality of a local fit.

    Retained neighbors must satisfy ``K_bb theta_b = K_bi``; every pruned
    candidate k needs ``K_bk' theta_b - K_ik >= 0`` (the retained polytope
    already covers it).  ``K_full`` is an N x N kernel matrix.
    """
    K_full = np.asarray(K_full)
    i = fit.node
    beta = fit.support
    theta = fit.weights
    cands = fit.candidates
    passed = np.ones(len(cands), dtype=bool)
    stat = 0.0
    if beta.size:
        resid = K_full[np.ix_(beta, beta)] @ theta - K_full[beta, i]
        stat = float(np.max(np.abs(resid)))
    margins = []
    for c_idx, k in enumerate(cands):
        if k in beta:
            passed[c_idx] = stat <= SLACK
        else:
            m = float(K_full[beta, k] @ theta - K_full[i, k]) if beta.size else -float(K_full[i, k])
            margins.append(m)
            passed[c_idx] = m >= -SLACK
    return PolytopeReport(int(i), cands, passed, stat, min(margins) if margins else np.inf)


def check_lle_equivalence(ps: PointSet, K: int) -> dict:
    """Compare cosine-kernel NNK fits with positive sum-to-one LLE weights node by node.

    Returns the largest support symmetric difference, the largest weight gap
    on the common support, and per-node details.
    """
    nl = knn_search(ps, K)
    spec = KernelSpec.cosine_at_node()
    X = ps.points
    max_sym = 0
    max_dev = 0.0
    per_node = []
    for i in range(ps.n):
        cand = nl.indices[i]
        if np.any(np.all(X[cand] == X[i], axis=1)):
            raise DegenerateInput(f"node {i} has a neighbor at its own position")
        nnk = nnk_local_fit(ps, i, cand, spec)
        theta_lle, _ = lle_weights(X[i], X[cand], "nonneg_sum1")
        lle_support = set(cand[theta_lle > 0].tolist())
        nnk_support = set(nnk.support.tolist())
        sym = len(lle_support ^ nnk_support)
        common = sorted(lle_support & nnk_support)
        dev = 0.0
        for j in common:
            dev = max(dev, abs(nnk.weight_to(j) - theta_lle[np.flatnonzero(cand == j)[0]]))
        max_sym = max(max_sym, sym)
        max_dev = max(max_dev, dev)
        per_node.append({"node": i, "support_diff": sym, "weight_dev": dev})
    return {"max_support_diff": max_sym, "max_weight_dev": max_dev, "per_node": per_node}
