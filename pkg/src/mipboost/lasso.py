"""Coordinate-descent LASSO path with cross-validated lambda selection.

Objective: (1/(2n)) ||y - X b||^2 + lam ||b||_1 on standardized X.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._cd import cd_solve
from .data import Dataset, FoldAssignment


class LassoError(RuntimeError):
    pass


@dataclass(frozen=True)
class LassoPath:
    lambdas: np.ndarray
    betas: np.ndarray  # (n_lambda, p)

    @property
    def support_sizes(self) -> np.ndarray:
        return np.count_nonzero(self.betas, axis=1)


@dataclass(frozen=True)
class LassoCv:
    lambdas: np.ndarray
    cvmse: np.ndarray
    fold_sd: np.ndarray
    lambda_min: float
    lambda_1sd: float
    path: LassoPath  # fit on all rows

    def _index(self, lam) -> int:
        return int(np.flatnonzero(self.lambdas == lam)[0])

    def beta_at(self, lam) -> np.ndarray:
        return self.path.betas[self._index(lam)]

    def support_at(self, lam) -> tuple:
        return tuple(int(j) for j in np.flatnonzero(self.beta_at(lam)))

    def rows(self):
        """(lambda, support size, cvmse, fold sd) per grid point."""
        sizes = self.path.support_sizes
        return [(float(l), int(s), float(m), float(sd))
                for l, s, m, sd in zip(self.lambdas, sizes, self.cvmse, self.fold_sd)]


def lambda_max(X, y) -> float:
    X = np.asarray(X, dtype=float)
    return float(np.max(np.abs(X.T @ y)) / X.shape[0])


def lambda_path(X, y, n_lambda: int = 100, ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced grid from the smallest all-zero lambda down to ``ratio`` times it."""
    if n_lambda < 2 or not 0 < ratio < 1:
        raise ValueError("need n_lambda >= 2 and 0 < ratio < 1")
    lmax = lambda_max(X, y)
    if lmax <= 0:
        raise LassoError("lambda_max is 0 (response orthogonal to every feature)")
    return np.geomspace(lmax, ratio * lmax, n_lambda)


def kkt_residual(X, y, beta, lam) -> float:
    """Largest violation of the LASSO optimality conditions at ``beta``."""
    X = np.asarray(X, dtype=float)
    g = X.T @ (y - X @ beta) / X.shape[0]
    nz = beta != 0
    v0 = np.maximum(np.abs(g[~nz]) - lam, 0.0)
    v1 = np.abs(g[nz] - lam * np.sign(beta[nz]))
    return float(max(v0.max(initial=0.0), v1.max(initial=0.0)))


class _Gram:
    def __init__(self, X, y):
        n = X.shape[0]
        self.G = X.T @ X / n
        self.c = X.T @ y / n
        p = X.shape[1]
        self.ub = np.full(p, np.inf)
        self.active = np.ones(p, dtype=bool)


def _gram_kkt(gram: _Gram, beta, lam) -> float:
    g = gram.c - gram.G @ beta
    nz = beta != 0
    v0 = np.maximum(np.abs(g[~nz]) - lam, 0.0)
    v1 = np.abs(g[nz] - lam * np.sign(beta[nz]))
    return float(max(v0.max(initial=0.0), v1.max(initial=0.0)))


def _polish(gram: _Gram, lam, beta, tol):
    """Solve the stationarity equations on the current signed support.

    Cyclic descent crawls when the active columns are nearly collinear (p > n,
    small lambda); once the signs have settled the solution is the root of
    G_AA b = c_A - lam * s_A. Returns None unless the result keeps its signs
    and passes the full KKT check.
    """
    A = np.flatnonzero(beta)
    if A.size == 0:
        return None
    s = np.sign(beta[A])
    bA = np.linalg.lstsq(gram.G[np.ix_(A, A)], gram.c[A] - lam * s, rcond=None)[0]
    if np.any(np.sign(bA) != s):
        return None
    out = np.zeros_like(beta)
    out[A] = bA
    if _gram_kkt(gram, out, lam) > tol:
        return None
    return out


def _cd(gram: _Gram, lam, beta, tol, max_sweeps, history):
    p = beta.shape[0]
    lam_v = np.full(p, float(lam))
    Gb = gram.G @ beta
    sweeps, kkt = cd_solve(gram.G, gram.c, beta, Gb, lam_v, gram.ub, gram.active,
                           tol, max_sweeps, history)
    if kkt > tol:
        polished = _polish(gram, lam, beta, tol)
        if polished is not None:
            beta[:] = polished
            return beta
        raise LassoError(f"coordinate descent did not converge at lambda={lam:.4g}: "
                         f"KKT residual {kkt:.3g} after {sweeps} sweeps")
    return beta


def coordinate_descent(X, y, lam: float, beta0=None, tol: float = 1e-7,
                       max_sweeps: int = 10000, return_history: bool = False):
    """Minimize the LASSO objective at one lambda by cyclic soft-thresholding."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    gram = _Gram(X, y)
    beta = np.zeros(X.shape[1]) if beta0 is None else np.array(beta0, dtype=float)
    hist = np.full(max_sweeps if return_history else 0, np.nan)
    beta = _cd(gram, lam, beta, tol, max_sweeps, hist)
    if return_history:
        return beta, hist[~np.isnan(hist)]
    return beta


def fit_path(X, y, lambdas, tol: float = 1e-7, max_sweeps: int = 10000) -> LassoPath:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambda grid must be strictly descending")
    gram = _Gram(X, y)
    beta = np.zeros(X.shape[1])
    betas = np.empty((lambdas.size, X.shape[1]))
    for i, lam in enumerate(lambdas):
        beta = _cd(gram, lam, beta, tol, max_sweeps, np.empty(0))
        betas[i] = beta
    return LassoPath(lambdas=lambdas, betas=betas)


def cv_lasso(d: Dataset, folds: FoldAssignment, grid=None, use_standard_error: bool = False,
             tol: float = 1e-7) -> LassoCv:
    """v-fold CV over a lambda grid with the minimum and one-standard-deviation rules.

    The 1-SD rule uses the standard deviation of the fold MSEs; set
    ``use_standard_error`` to divide it by sqrt(v).
    """
    if grid is None:
        grid = lambda_path(d.X, d.y)
    grid = np.asarray(grid, dtype=float)
    fold_mse = np.empty((folds.v, grid.size))
    for i, f in enumerate(range(1, folds.v + 1)):
        tr, te = folds.training(f), folds.withheld(f)
        path = fit_path(d.X[tr], d.y[tr], grid, tol=tol)
        resid = d.y[te][:, None] - d.X[te] @ path.betas.T
        fold_mse[i] = np.mean(resid ** 2, axis=0)
    cvmse = fold_mse.mean(axis=0)
    sd = fold_mse.std(axis=0, ddof=1)
    if use_standard_error:
        sd = sd / np.sqrt(folds.v)
    i_min = int(np.argmin(cvmse))
    within = np.flatnonzero(cvmse <= cvmse[i_min] + sd[i_min])
    i_1sd = int(within.min())
    full = fit_path(d.X, d.y, grid, tol=tol)
    return LassoCv(lambdas=grid, cvmse=cvmse, fold_sd=sd, lambda_min=float(grid[i_min]),
                   lambda_1sd=float(grid[i_1sd]), path=full)


def relaxed_refit(X, y, support) -> np.ndarray:
    """OLS on the support columns, zeros elsewhere (minimum-norm if rank deficient)."""
    X = np.asarray(X, dtype=float)
    support = sorted(int(j) for j in support)
    if not support:
        raise ValueError("support must be nonempty")
    if len(support) > X.shape[0] - 1:
        raise ValueError("support larger than n - 1")
    A = X[:, support]
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < len(support):
        warnings.warn("rank-deficient support; using the minimum-norm fit", stacklevel=2)
    beta = np.zeros(X.shape[1])
    beta[support] = coef
    return beta
