"""Similarity kernels used as inner products in the regression space."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import PointSet


class DimensionMismatch(ValueError):
    pass


class DegenerateInput(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """``kind`` is ``"gaussian"`` (needs ``sigma_sq``) or ``"cosine_at_node"``.

    The cosine kernel is centered at whichever node is being fit, so
    ``center`` is normally left as None and supplied per call.
    """

    kind: str = "gaussian"
    sigma_sq: Optional[float] = None
    center: Optional[int] = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.sigma_sq is None or not math.isfinite(self.sigma_sq) or self.sigma_sq <= 0:
                raise ValueError(f"gaussian kernel needs finite sigma_sq > 0, got {self.sigma_sq}")
        elif self.kind != "cosine_at_node":
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def gaussian(cls, sigma_sq: float) -> "KernelSpec":
        return cls("gaussian", float(sigma_sq))

    @classmethod
    def cosine_at_node(cls, center: Optional[int] = None) -> "KernelSpec":
        return cls("cosine_at_node", None, center)

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "sigma_sq": self.sigma_sq}
        out = {"kind": "cosine_at_node"}
        if self.center is not None:
            out["center_index"] = self.center
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        kind = d.get("kind")
        if kind == "gaussian":
            return cls.gaussian(d["sigma_sq"])
        if kind == "cosine_at_node":
            return cls.cosine_at_node(d.get("center_index"))
        raise ValueError(f"unknown kernel kind {kind!r}")


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    spec: KernelSpec


def _pair(x_i, x_j):
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    if x_i.shape != x_j.shape:
        raise DimensionMismatch(f"{x_i.shape} vs {x_j.shape}")
    return x_i, x_j


def eval_gaussian(x_i, x_j, sigma_sq: float) -> float:
    """exp(-||x_i - x_j||^2 / (2 sigma_sq))"""
    if not sigma_sq > 0:
        raise ValueError("sigma_sq must be positive")
    x_i, x_j = _pair(x_i, x_j)
    diff = x_i - x_j
    return math.exp(-float(diff @ diff) / (2.0 * sigma_sq))


def eval_cosine_at_node(x_p, x_q, x_i) -> float:
    """Shifted cosine similarity of ``x_p - x_i`` and ``x_q - x_i``, in [0, 1].

    An argument equal to the center gives 1 (the limit as it approaches the
    center along the other argument's direction).
    """
    x_p, x_q = _pair(x_p, x_q)
    x_p, x_i = _pair(x_p, x_i)
    u = x_p - x_i
    v = x_q - x_i
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu == 0.0 or nv == 0.0:
        return 1.0
    val = 0.5 + float(u @ v) / (2.0 * nu * nv)
    return min(1.0, max(0.0, val))


def gaussian_from_sqdist(sqdist, sigma_sq: float) -> np.ndarray:
    return np.exp(-np.asarray(sqdist) / (2.0 * sigma_sq))


def cosine_block(points: np.ndarray, center_point: np.ndarray) -> np.ndarray:
    """Pairwise cosine-at-node values among ``points`` (rows) around ``center_point``."""
    z = np.asarray(points, dtype=float) - center_point
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInput("a neighbor coincides with the center node")
    u = z / norms[:, None]
    vals = 0.5 + 0.5 * (u @ u.T)
    vals = np.clip(0.5 * (vals + vals.T), 0.0, 1.0)
    np.fill_diagonal(vals, 1.0)
    return vals


def kernel_submatrix(ps: PointSet, center: int, support, spec: KernelSpec):
    """Return ``(K_SS, K_Si)`` for the neighbors ``support`` of node ``center``."""
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise ValueError("support must be non-empty")
    if np.any(support == center):
        raise ValueError("support must exclude the center")
    X = ps.points[support]
    x_i = ps.points[center]
    if spec.kind == "gaussian":
        d2 = cdist(X, X, "sqeuclidean")
        K_SS = gaussian_from_sqdist(d2, spec.sigma_sq)
        np.fill_diagonal(K_SS, 1.0)
        K_Si = gaussian_from_sqdist(cdist(X, x_i[None, :], "sqeuclidean")[:, 0], spec.sigma_sq)
    else:
        if spec.center is not None and spec.center != center:
            raise ValueError(f"kernel centered at {spec.center}, asked for node {center}")
        K_SS = cosine_block(X, x_i)
        K_Si = np.ones(len(support))
    return KernelMatrix(K_SS, spec), K_Si


def gaussian_matrix(points: np.ndarray, sigma_sq: float) -> np.ndarray:
    K = gaussian_from_sqdist(cdist(points, points, "sqeuclidean"), sigma_sq)
    np.fill_diagonal(K, 1.0)
    return K


def bandwidth_from_neighbors(ps: PointSet, K: int) -> float:
    """sigma^2 such that the mean K-th neighbor distance sits at 3 sigma.

    A single global bandwidth keeps the kernel symmetric.
    """
    from .neighbors import knn_search

    nl = knn_search(ps, K)
    sigma = float(np.mean(nl.distances[:, -1])) / 3.0
    return sigma * sigma
