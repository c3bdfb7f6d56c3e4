"""ZCA (Mahalanobis) whitening.

``Z = X W`` with ``W = Sigma^{-1/2}``. Because ``W`` is symmetric, column j of
``Z`` stays paired with column j of ``X``; selections made on ``Z`` are
reported as the same indices of the original design.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import DataError, Dataset, Provenance


class WhiteningError(ValueError):
    pass


@dataclass(frozen=True)
class WhiteningTransform:
    W: np.ndarray
    source: str  # "sample_mle" | "user_supplied"
    eigen_floor: float
    floored: bool = False


def estimate_covariance(X) -> np.ndarray:
    """MLE covariance (divisor n) of the column-centered design."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise WhiteningError("need at least 2 rows")
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / X.shape[0]
    return 0.5 * (S + S.T)


def zca_matrix(sigma, eigen_floor=None, source: str = "sample_mle") -> WhiteningTransform:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise WhiteningError(f"covariance must be square, got {sigma.shape}")
    if not np.allclose(sigma, sigma.T, rtol=1e-10, atol=1e-12):
        raise WhiteningError("covariance is not symmetric")
    evals, U = np.linalg.eigh(0.5 * (sigma + sigma.T))
    if evals[0] < -1e-8:
        raise WhiteningError(f"not a covariance matrix: eigenvalue {evals[0]:.3g} < 0")
    if eigen_floor is None:
        eigen_floor = 1e-8 * max(float(evals[-1]), np.finfo(float).tiny)
    floored = bool(np.any(evals < eigen_floor))
    lam = np.maximum(evals, eigen_floor)
    W = (U / np.sqrt(lam)) @ U.T
    W = 0.5 * (W + W.T)
    return WhiteningTransform(W=W, source=source, eigen_floor=float(eigen_floor), floored=floored)


def whiten_dataset(d: Dataset, t: WhiteningTransform) -> Dataset:
    if d.provenance is not Provenance.STANDARDIZED:
        raise WhiteningError(f"whitening expects standardized data, got {d.provenance.value}")
    if t.W.shape != (d.p, d.p):
        raise WhiteningError(f"whitening matrix is {t.W.shape}, data has p={d.p}")
    return replace(d, X=d.X @ t.W, provenance=Provenance.WHITENED)


def distortion(X, Z) -> float:
    """Relative Frobenius distance ||X - Z|| / ||X||; diagnostic for index pairing."""
    X = np.asarray(X)
    return float(np.linalg.norm(X - Z) / np.linalg.norm(X))


def load_covariance_csv(path, p: int) -> np.ndarray:
    """Read a p x p covariance matrix; a header row of column names is skipped."""
    path = Path(path)
    if not path.is_file():
        raise WhiteningError(f"covariance file not found: {path}")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    rows = []
    for i, ln in enumerate(lines):
        cells = ln.split(",")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            if i == 0:
                continue
            raise DataError(f"{path}: non-numeric entry on line {i + 1}") from None
    S = np.array(rows, dtype=float)
    if S.shape != (p, p):
        raise WhiteningError(f"{path}: expected a {p}x{p} matrix, got {S.shape}")
    return S


def whiten(d: Dataset, sigma=None, eigen_floor=None):
    """Whiten a standardized dataset; sample MLE covariance unless ``sigma`` is given.

    With ``p >= n`` the sample covariance is singular, so a covariance must be
    supplied.
    """
    if sigma is None:
        if d.p >= d.n:
            raise WhiteningError(
                f"p={d.p} >= n={d.n}: sample covariance is singular; supply a covariance matrix")
        t = zca_matrix(estimate_covariance(d.X), eigen_floor, source="sample_mle")
    else:
        t = zca_matrix(sigma, eigen_floor, source="user_supplied")
    return whiten_dataset(d, t), t
