"""Non-negative quadratic programs ``min_{theta >= 0} 1/2 theta'A theta - b'theta``.

``A`` is a unit-diagonal kernel block ``K_SS`` and ``b`` the center's
similarities ``K_Si``.  The main solver is an active-set method in the
Lawson-Hanson style working on the quadratic form directly; the enumeration
routine is a brute-force oracle for tests.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

ZERO_TOL = 1e-8
RIDGES = (0.0, 1e-10, 1e-8, 1e-6)
# a candidate enters the passive set only if its descent exceeds this
_DESCENT_TOL = 1e-12


class SingularSystem(np.linalg.LinAlgError):
    pass


class NonConvergence(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SizeLimit(ValueError):
    pass


@dataclass
class QPProblem:
    K_SS: np.ndarray
    K_Si: np.ndarray
    zero_tol: float = ZERO_TOL
    ridge: float = 0.0

    def __post_init__(self):
        self.K_SS = np.atleast_2d(np.asarray(self.K_SS, dtype=float))
        self.K_Si = np.atleast_1d(np.asarray(self.K_Si, dtype=float))
        m = self.K_Si.shape[0]
        if self.K_SS.shape != (m, m):
            raise ValueError(f"K_SS shape {self.K_SS.shape} does not match K_Si length {m}")

    @property
    def size(self) -> int:
        return self.K_Si.shape[0]

    def objective(self, theta) -> float:
        """Local fit error J = 1/2 t'At - b't + 1/2 (unit self-similarity)."""
        theta = np.asarray(theta, dtype=float)
        return float(0.5 * theta @ self.K_SS @ theta - self.K_Si @ theta + 0.5)


@dataclass
class QPSolution:
    theta: np.ndarray
    objective: float
    dual: np.ndarray
    active_set: np.ndarray
    ridge: float = 0.0
    iterations: int = 0
    converged: bool = True
    info: dict = field(default_factory=dict)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.theta > 0)


def kkt_residuals(p: QPProblem, theta, dual=None) -> dict:
    """Stationarity, complementarity and dual-feasibility residuals for ``theta``."""
    theta = np.asarray(theta, dtype=float)
    grad = p.K_SS @ theta - p.K_Si
    if dual is None:
        dual = np.where(theta > 0, 0.0, grad)
    return {
        "stationarity": float(np.max(np.abs(grad - dual), initial=0.0)),
        "complementarity": float(abs(dual @ theta)),
        "dual_feasibility": float(max(0.0, -np.min(dual, initial=0.0))),
        "primal_feasibility": float(max(0.0, -np.min(theta, initial=0.0))),
    }


def _block_solve(A, b, P, ridge):
    """Solve ``(A_PP + ridge I) z = b_P``, escalating the ridge if needed."""
    sub = A[np.ix_(P, P)]
    rhs = b[P]
    for r in RIDGES:
        if r < ridge:
            continue
        try:
            c = cho_factor(sub + r * np.eye(len(P)), check_finite=False)
        except LinAlgError:
            continue
        z = cho_solve(c, rhs, check_finite=False)
        if np.all(np.isfinite(z)):
            return z, r
    raise SingularSystem(f"block of size {len(P)} is singular even with ridge {RIDGES[-1]}")


def solve(p: QPProblem, max_iter: int | None = None) -> QPSolution:
    """Active-set solution of the non-negative quadratic program ``p``.

    Raises
    ------
    SingularSystem
        A passive block stays singular after the largest ridge.
    NonConvergence
        More than ``10 |S|`` set changes; ``exc.best`` carries the last iterate.
    """
    A, b = p.K_SS, p.K_Si
    m = p.size
    if max_iter is None:
        max_iter = 10 * max(m, 1)

    theta = np.zeros(m)
    passive = np.zeros(m, dtype=bool)
    ridge = p.ridge
    w = b - A @ theta  # negative gradient
    it = 0
    converged = True

    while True:
        free = ~passive
        if not free.any():
            break
        cand = np.where(free, w, -np.inf)
        t = int(np.argmax(cand))
        if cand[t] <= _DESCENT_TOL:
            break
        if it >= max_iter:
            converged = False
            break
        passive[t] = True
        it += 1

        while True:
            P = np.flatnonzero(passive)
            z, ridge = _block_solve(A, b, P, ridge)
            if np.all(z > 0):
                theta[:] = 0.0
                theta[P] = z
                break
            # step back to the boundary along theta -> z
            neg = np.flatnonzero(z <= 0)
            th = theta[P]
            ratios = th[neg] / (th[neg] - z[neg])
            alpha = ratios.min()
            theta[P] = th + alpha * (z - th)
            hit = neg[np.argmin(ratios)]
            theta[P[hit]] = 0.0
            leaving = P[theta[P] <= p.zero_tol]
            theta[leaving] = 0.0
            passive[leaving] = False
            it += 1
            if not passive.any():
                break
            if it >= max_iter:
                converged = False
                break
        if not converged:
            break
        w = b - A @ theta

    sol = _finalize(p, theta, passive, ridge, it)
    sol.converged = converged
    if not converged:
        raise NonConvergence(f"active-set iteration cap {max_iter} reached", best=sol)
    return sol


def _finalize(p: QPProblem, theta, passive, ridge, it) -> QPSolution:
    A, b = p.K_SS, p.K_Si
    small = (theta > 0) & (theta < p.zero_tol)
    theta = np.where(theta < p.zero_tol, 0.0, theta)
    if small.any():
        # re-fit the surviving block so stationarity holds after truncation
        P = np.flatnonzero(theta > 0)
        if P.size:
            z, r = _block_solve(A, b, P, ridge)
            if np.all(z >= p.zero_tol):
                theta[P] = z
                ridge = r
    grad = A @ theta - b
    dual = np.where(theta > 0, 0.0, grad)
    return QPSolution(
        theta=theta,
        objective=p.objective(theta),
        dual=dual,
        active_set=np.flatnonzero(theta == 0),
        ridge=ridge,
        iterations=it,
        info=kkt_residuals(p, theta, dual),
    )


def solve_by_enumeration(p: QPProblem, max_size: int = 12, slack: float = 1e-12) -> QPSolution:
    """Exhaustive search over all passive/active partitions.

    For each candidate positive set ``beta`` the block system
    ``K_bb theta_b = K_bi`` is solved; the partition is admissible when
    ``theta_b > 0`` and every excluded coordinate has non-negative
    multiplier ``K_gb theta_b - K_gi``.  Among admissible partitions the
    lowest objective wins.
    """
    m = p.size
    if m > max_size:
        raise SizeLimit(f"enumeration limited to |S| <= {max_size}, got {m}")
    A, b = p.K_SS, p.K_Si
    best = None
    best_obj = np.inf
    for r in range(0, m + 1):
        for beta in itertools.combinations(range(m), r):
            beta = list(beta)
            theta = np.zeros(m)
            if beta:
                sub = A[np.ix_(beta, beta)]
                try:
                    z = np.linalg.solve(sub, b[beta])
                except np.linalg.LinAlgError:
                    continue
                if not np.all(z > 0):
                    continue
                theta[beta] = z
            gamma = [j for j in range(m) if j not in beta]
            if gamma:
                lam = A[np.ix_(gamma, beta)] @ theta[beta] - b[gamma] if beta else -b[gamma]
                if np.any(lam < -slack):
                    continue
            obj = p.objective(theta)
            if obj < best_obj:
                best_obj, best = obj, theta
    if best is None:
        raise SingularSystem("no admissible partition found")
    theta = np.where(best < p.zero_tol, 0.0, best)
    grad = A @ theta - b
    dual = np.where(theta > 0, 0.0, grad)
    return QPSolution(
        theta=theta,
        objective=p.objective(theta),
        dual=dual,
        active_set=np.flatnonzero(theta == 0),
        info=kkt_residuals(p, theta, dual),
    )
