"""Greedy forward selection.

Used as a standalone baseline, to warm start the MIQP solver at exactly k
features, and to build the surrogate bound at k+1 features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, FoldAssignment


@dataclass(frozen=True)
class FsPath:
    """Nested forward-selection supports for sizes 1..kmax.

    ``order[i]`` is the feature added at step i+1, ``coefficients[k]`` the
    least-squares fit on the first k selected features, ``sse[k]`` its sum of
    squared errors (``sse[0] = ||y||^2``).
    """

    order: tuple
    coefficients: np.ndarray
    sse: np.ndarray
    n: int

    @property
    def kmax(self) -> int:
        return len(self.order)

    def support(self, k: int) -> tuple:
        return tuple(sorted(self.order[:k]))

    def mse(self, k: int) -> float:
        return float(self.sse[k] / self.n)


def _lstsq_on(X, y, support):
    beta = np.zeros(X.shape[1])
    if len(support):
        cols = list(support)
        coef, *_ = np.linalg.lstsq(X[:, cols], y, rcond=None)
        beta[cols] = coef
    return beta


def fs_path(X, y, kmax: int) -> FsPath:
    """Forward selection by exact SSE reduction.

    Candidate columns are kept orthogonalized against the selected ones
    (a Gram-Schmidt/QR update), so each step costs O(n p). Ties go to the
    lowest column index; columns that are zero or already in the span of the
    selection are only taken when nothing else is left.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if not 1 <= kmax <= min(p, n):
        raise ValueError(f"kmax must lie in [1, min(p, n)] = [1, {min(p, n)}], got {kmax}")
    Xp = X.copy()
    r = y.copy()
    base = np.einsum("ij,ij->j", X, X)
    avail = np.ones(p, dtype=bool)
    order = []
    coefs = np.zeros((kmax + 1, p))
    sse = np.empty(kmax + 1)
    sse[0] = float(y @ y)
    for step in range(1, kmax + 1):
        norms = np.einsum("ij,ij->j", Xp, Xp)
        proj = Xp.T @ r
        ok = avail & (norms > 1e-10 * np.maximum(base, 1e-300))
        gain = np.full(p, -1.0)
        gain[ok] = proj[ok] ** 2 / norms[ok]
        gain[avail & ~ok] = -0.5
        j = int(np.argmax(gain))
        avail[j] = False
        order.append(j)
        if ok[j]:
            q = Xp[:, j] / np.sqrt(norms[j])
            r -= q * (q @ r)
            Xp -= np.outer(q, q @ Xp)
        coefs[step] = _lstsq_on(X, y, order)
        res = y - X @ coefs[step]
        sse[step] = float(res @ res)
    return FsPath(order=tuple(order), coefficients=coefs, sse=sse, n=n)


def fs_warm_start(X, y, k: int, path: FsPath | None = None):
    """Indicator vector and LS coefficients of the size-k forward-selection model."""
    p = np.shape(X)[1]
    if k <= 0:
        return np.zeros(p), np.zeros(p)
    if path is None or path.kmax < k:
        path = fs_path(X, y, k)
    z = np.zeros(p)
    z[list(path.order[:k])] = 1.0
    return z, path.coefficients[k].copy()


def fs_surrogate_bound(X, y, k: int, path: FsPath | None = None) -> float:
    """In-sample MSE of forward selection with k+1 features."""
    n, p = np.shape(X)
    if k + 1 > min(p, n - 1):
        raise ValueError(f"k+1={k + 1} exceeds min(p, n-1)={min(p, n - 1)}")
    if path is None or path.kmax < k + 1:
        path = fs_path(X, y, k + 1)
    return path.mse(k + 1)


def cv_forward_selection(d: Dataset, folds: FoldAssignment, kmax: int):
    """Choose the forward-selection size by v-fold CV; returns ``(k, cvmse_per_k)``.

    ``cvmse_per_k[0]`` is the null model.
    """
    kmax = min(kmax, d.p)
    curves = []
    for f in range(1, folds.v + 1):
        tr, te = folds.training(f), folds.withheld(f)
        km = min(kmax, len(tr) - 1)
        path = fs_path(d.X[tr], d.y[tr], km)
        errs = [np.mean((d.y[te] - d.X[te] @ path.coefficients[k]) ** 2)
                for k in range(km + 1)]
        errs += [np.inf] * (kmax - km)
        curves.append(errs)
    cv = np.mean(curves, axis=0)
    return int(np.argmin(cv)), cv
