import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mipboost.data import Dataset, make_folds, standardize
from mipboost.lasso import (LassoError, coordinate_descent, cv_lasso, fit_path, kkt_residual,
                            lambda_max, lambda_path, relaxed_refit)


def _objective(X, y, b, lam):
    r = y - X @ b
    return r @ r / (2 * len(y)) + lam * np.abs(b).sum()


def ista(X, y, lam, iters=200_000):
    """Proximal-gradient oracle, independent of the coordinate-descent kernel."""
    n = X.shape[0]
    L = np.linalg.eigvalsh(X.T @ X / n).max()
    b = np.zeros(X.shape[1])
    for _ in range(iters):
        g = b - (X.T @ (X @ b - y) / n) / L
        b_new = np.sign(g) * np.maximum(np.abs(g) - lam / L, 0)
        if np.max(np.abs(b_new - b)) < 1e-15:
            break
        b = b_new
    return b


def _orthonormal(n, p, seed):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(n, p)))
    return Q * np.sqrt(n)  # X'X/n = I


def test_lambda_max_and_grid():
    X = _orthonormal(10, 2, 0)
    y = X @ np.array([0.9, -0.4])
    assert lambda_max(X, y) == pytest.approx(0.9)
    assert not coordinate_descent(X, y, lambda_max(X, y)).any()
    g = lambda_path(X, y, n_lambda=3, ratio=0.01)
    np.testing.assert_allclose(g, [0.9, 0.09, 0.009])
    with pytest.raises(LassoError):
        lambda_path(X, np.zeros(10))
    with pytest.raises(ValueError):
        lambda_path(X, y, n_lambda=1)


def test_orthonormal_path_is_soft_threshold():
    X = _orthonormal(50, 6, 1)
    y = np.random.default_rng(2).normal(size=50)
    c = X.T @ y / 50
    path = fit_path(X, y, lambda_path(X, y, 40, 1e-3), tol=1e-12)
    for lam, b in zip(path.lambdas, path.betas):
        np.testing.assert_allclose(b, np.sign(c) * np.maximum(np.abs(c) - lam, 0), atol=1e-10)
    assert not path.betas[0].any()


def test_single_feature_soft_threshold():
    x = np.array([[1.0], [-1.0]])
    y = np.array([0.8, -0.8])  # x'y/n = 0.8
    assert coordinate_descent(x, y, 0.3)[0] == pytest.approx(0.5)
    assert coordinate_descent(x, y, 0.9)[0] == 0


@given(st.integers(0, 2**31))
@settings(max_examples=10)
def test_matches_first_order_oracle(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(40, 6)), rng.normal(size=40)
    lam = 0.3 * lambda_max(X, y)
    b = coordinate_descent(X, y, lam, tol=1e-10)
    assert _objective(X, y, b, lam) == pytest.approx(_objective(X, y, ista(X, y, lam), lam),
                                                     abs=1e-6)


@given(st.integers(0, 2**31))
@settings(max_examples=10)
def test_kkt_along_path_and_monotone_sweeps(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 15))
    y = X[:, :3].sum(axis=1) + rng.normal(size=60)
    path = fit_path(X, y, lambda_path(X, y, 30))
    for lam, b in zip(path.lambdas, path.betas):
        assert kkt_residual(X, y, b, lam) <= 1e-6
    _, hist = coordinate_descent(X, y, path.lambdas[-1], return_history=True)
    assert np.all(np.diff(hist) <= 1e-14 * np.abs(hist[:-1]).max())


def test_path_requires_descending_grid(rng):
    X, y = rng.normal(size=(10, 3)), rng.normal(size=10)
    with pytest.raises(ValueError):
        fit_path(X, y, [0.1, 0.2])


def test_nonconvergence_reports_residual(rng):
    X = rng.normal(size=(30, 10))
    with pytest.raises(LassoError, match="KKT residual"):
        coordinate_descent(X, rng.normal(size=30), 1e-3, max_sweeps=0)


@given(st.integers(0, 2**31))
@settings(max_examples=10)
def test_wide_design_path_is_certified(seed):
    # p > n down to lambda_max / 1000: the active columns become nearly collinear
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, 30))
    y = X[:, :2].sum(axis=1) + 0.5 * rng.normal(size=20)
    path = fit_path(X, y, lambda_path(X, y))
    for lam, b in zip(path.lambdas, path.betas):
        assert kkt_residual(X, y, b, lam) <= 1e-6


def _dataset(X, y):
    return standardize(Dataset(y=y, X=X, feature_names=[f"x{j}" for j in range(X.shape[1])]))[0]


def test_cv_noiseless_screens_true_support(rng):
    X = rng.normal(size=(100, 20))
    d = _dataset(X, X[:, [0, 4, 9]] @ np.array([2.0, -1.5, 1.0]))
    cv = cv_lasso(d, make_folds(100, 5, 0))
    assert {0, 4, 9} <= set(cv.support_at(cv.lambda_min))
    assert cv.lambda_1sd >= cv.lambda_min
    assert cv.cvmse[list(cv.lambdas).index(cv.lambda_min)] == cv.cvmse.min()
    rows = cv.rows()
    assert len(rows) == 100 and rows[0][1] == 0


def test_cv_flat_curve_takes_largest_lambda(rng):
    d = _dataset(rng.normal(size=(40, 5)), rng.normal(size=40))
    grid = np.array([1e3, 1e2, 1e1])  # every lambda gives the zero model
    cv = cv_lasso(d, make_folds(40, 4, 0), grid=grid)
    assert cv.lambda_1sd == 1e3


def test_standard_error_switch_is_tighter(rng):
    X = rng.normal(size=(80, 10))
    d = _dataset(X, X[:, 0] + rng.normal(size=80))
    folds = make_folds(80, 5, 1)
    sd = cv_lasso(d, folds)
    se = cv_lasso(d, folds, use_standard_error=True)
    assert se.lambda_1sd <= sd.lambda_1sd


def test_relaxed_refit_examples(rng):
    X, y = rng.normal(size=(20, 4)), rng.normal(size=20)
    np.testing.assert_allclose(relaxed_refit(X, y, range(4)), np.linalg.lstsq(X, y, rcond=None)[0])
    Q = _orthonormal(20, 4, 3) / np.sqrt(20)
    assert relaxed_refit(Q, y, [2])[2] == pytest.approx(Q[:, 2] @ y)
    lam = 0.2 * lambda_max(X, y)
    b = coordinate_descent(X, y, lam)
    refit = relaxed_refit(X, y, np.flatnonzero(b))
    assert np.sum((y - X @ refit) ** 2) <= np.sum((y - X @ b) ** 2) + 1e-12
    with pytest.raises(ValueError):
        relaxed_refit(X, y, [])
    Xd = np.column_stack([X[:, 0], X[:, 0]])
    with pytest.warns(UserWarning, match="rank-deficient"):
        relaxed_refit(Xd, y, [0, 1])
