"""Lasso regression by cyclic coordinate descent.

Objective minimized over (w, b):

    (1 / 2m) * ||y - X w - b||^2 + lambda * ||w||_1

with the intercept ``b`` unpenalized. Centering X and y removes the intercept
from the problem, after which each sweep works on the d x d Gram matrix
``G = Xc^T Xc / m`` and correlation vector ``q = Xc^T yc / m``; the data matrix
is touched only once per fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from bgn.errors import BGNError

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 10_000
N_LAMBDAS = 50
LAMBDA_RATIO = 1e-4


@dataclass(frozen=True)
class LassoSolution:
    weights: np.ndarray
    intercept: float
    lam: float
    converged: bool
    n_iters: int = 0

    @property
    def nnz(self):
        return int(np.count_nonzero(self.weights))

    @property
    def support(self):
        return np.flatnonzero(self.weights)


@dataclass(frozen=True)
class SparsityTarget:
    max_nnz: int = 2

    def __post_init__(self):
        if self.max_nnz < 1:
            raise ValueError("max_nnz must be >= 1")


class _CenteredProblem:
    def __init__(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 1:
            raise ValueError(f"incompatible shapes X{X.shape}, y{y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise BGNError("lasso inputs must be finite")
        m = X.shape[0]
        self.x_mean = X.mean(axis=0)
        self.y_mean = float(y.mean())
        Xc = X - self.x_mean
        yc = y - self.y_mean
        self.G = Xc.T @ Xc / m
        self.q = Xc.T @ yc / m
        self.yy = float(yc @ yc) / m
        self.d = X.shape[1]

    def lambda_max(self):
        return float(np.max(np.abs(self.q))) if self.d else 0.0

    def objective(self, w, lam):
        return 0.5 * (self.yy - 2.0 * float(self.q @ w) + float(w @ self.G @ w)) + lam * float(np.abs(w).sum())

    def solve(self, lam, tol, max_iters, w0=None, history=None):
        w = np.zeros(self.d) if w0 is None else np.array(w0, dtype=float)
        buf = np.empty(max_iters if history is not None else 0)
        sweeps, converged = _cd_sweeps(self.G, self.q, w, float(lam), float(tol), int(max_iters), buf)
        if history is not None:
            history.extend((0.5 * self.yy + buf[:sweeps]).tolist())
        intercept = self.y_mean - float(self.x_mean @ w)
        return LassoSolution(weights=w, intercept=intercept, lam=float(lam), converged=bool(converged), n_iters=int(sweeps))


@njit(cache=True)
def _cd_sweeps(G, q, w, lam, tol, max_iters, history):
    """Cyclic soft-threshold updates in place on ``w``; returns (sweeps, converged)."""
    d = w.shape[0]
    gw = np.zeros(d)
    for j in range(d):
        for k in range(d):
            gw[k] += G[k, j] * w[j]
    record = history.shape[0] > 0
    for sweep in range(1, max_iters + 1):
        max_change = 0.0
        for j in range(d):
            gjj = G[j, j]
            old = w[j]
            if gjj <= 0.0:
                new = 0.0
            else:
                rho = q[j] - gw[j] + gjj * old
                if rho > lam:
                    new = (rho - lam) / gjj
                elif rho < -lam:
                    new = (rho + lam) / gjj
                else:
                    new = 0.0
            delta = new - old
            if delta != 0.0:
                w[j] = new
                for k in range(d):
                    gw[k] += G[k, j] * delta
                if abs(delta) > max_change:
                    max_change = abs(delta)
        if record:
            # objective minus the constant 0.5 * yy
            val = 0.0
            for j in range(d):
                val += -q[j] * w[j] + 0.5 * w[j] * gw[j] + lam * abs(w[j])
            history[sweep - 1] = val
        if max_change < tol:
            return sweep, True
    return max_iters, False


def fit_lasso(X, y, lam, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS, w0=None, history=None):
    """Coordinate-descent Lasso at a single regularization level.

    ``history``, if a list, receives the objective value after every sweep.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return _CenteredProblem(X, y).solve(lam, tol, max_iters, w0=w0, history=history)


def lambda_grid(lam_max, n=N_LAMBDAS, ratio=LAMBDA_RATIO):
    """Geometric grid from ``lam_max`` down to ``lam_max * ratio``."""
    return lam_max * ratio ** (np.arange(n) / (n - 1))


def lasso_path(X, y, lambdas=None, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS):
    """Warm-started solutions along a decreasing lambda grid."""
    return _path(_CenteredProblem(X, y), lambdas, tol, max_iters)


def _path(prob, lambdas, tol, max_iters):
    if lambdas is None:
        lambdas = lambda_grid(prob.lambda_max())
    path = []
    w = None
    for lam in lambdas:
        sol = prob.solve(float(lam), tol, max_iters, w0=w)
        w = sol.weights
        path.append(sol)
    return path


def fit_with_sparsity(X, y, target, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS):
    """Smallest-lambda grid solution with at most ``target.max_nnz`` non-zero weights.

    If that solution is all-zero while some grid point has a non-empty support,
    the non-empty solution of smallest support is used instead (larger lambda
    wins ties). When even that one is over the target because several weights
    entered between two grid points, lambda is bisected between those points
    until the support size lands in [1, max_nnz].
    """
    prob = _CenteredProblem(X, y)
    lam_max = prob.lambda_max()
    if lam_max == 0.0:
        return prob.solve(0.0, tol, max_iters)
    path = _path(prob, None, tol, max_iters)
    feasible = [s for s in path if s.nnz <= target.max_nnz]
    best = feasible[-1] if feasible else path[0]
    if best.nnz == 0:
        nonzero = [s for s in path if s.nnz > 0]
        if nonzero:
            best = min(nonzero, key=lambda s: s.nnz)
            if best.nnz > target.max_nnz:
                best = _bisect_support(prob, path, target.max_nnz, tol, max_iters) or best
    return best


def _bisect_support(prob, path, max_nnz, tol, max_iters, steps=60):
    k = next(i for i, s in enumerate(path) if s.nnz > 0)
    hi, lo = path[k - 1].lam, path[k].lam  # nnz(hi) == 0, nnz(lo) > max_nnz
    for _ in range(steps):
        mid = 0.5 * (hi + lo)
        sol = prob.solve(mid, tol, max_iters)
        if sol.nnz == 0:
            hi = mid
        elif sol.nnz > max_nnz:
            lo = mid
        else:
            return sol
    return None


def kkt_violation(X, y, sol):
    """Largest violation of the Lasso optimality conditions for ``sol``."""
    prob = _CenteredProblem(X, y)
    grad = -(prob.q - prob.G @ sol.weights)
    w = sol.weights
    active = w != 0
    viol = np.zeros_like(w)
    viol[active] = np.abs(grad[active] + sol.lam * np.sign(w[active]))
    viol[~active] = np.maximum(np.abs(grad[~active]) - sol.lam, 0.0)
    return float(viol.max()) if viol.size else 0.0


def lasso_objective(X, y, weights, intercept, lam):
    X = np.asarray(X, dtype=float)
    resid = np.asarray(y, dtype=float) - X @ weights - intercept
    return 0.5 * float(resid @ resid) / X.shape[0] + lam * float(np.abs(weights).sum())
