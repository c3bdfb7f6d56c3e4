import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mipboost.data import (DataError, Dataset, Provenance, apply_scaling, coefficients_to_raw,
                           expand_features, load_csv, make_folds, standardize, unstandardize,
                           write_csv)


def _ds(X, y, names=None):
    X = np.asarray(X, dtype=float)
    names = names or [f"x{j}" for j in range(X.shape[1])]
    return Dataset(y=np.asarray(y, dtype=float), X=X, feature_names=names)


def test_load_csv_basic(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("y,a,b\n1,2,3\n4,5,6\n7,8,10\n")
    d = load_csv(f, "y")
    assert (d.n, d.p) == (3, 2)
    assert d.feature_names == ("a", "b")
    assert d.provenance is Provenance.RAW
    np.testing.assert_array_equal(d.y, [1, 4, 7])


def test_load_csv_reports_bad_cell(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("y,a\n1,2\n3,oops\n")
    with pytest.raises(DataError, match=r"row 2.*'a'"):
        load_csv(f, "y")


def test_load_csv_missing_response(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("y,a\n1,2\n3,4\n")
    with pytest.raises(DataError, match="response column not found"):
        load_csv(f, "target")


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv")


def test_load_csv_warns_on_constant_column(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("y,a,c\n1,2,5\n3,4,5\n")
    with pytest.warns(UserWarning, match="'c'"):
        load_csv(f, "y")


def test_csv_round_trip(tmp_path, rng):
    d = _ds(rng.normal(size=(7, 3)), rng.normal(size=7))
    back = load_csv(write_csv(d, tmp_path / "x.csv"), "y")
    np.testing.assert_array_equal(back.X, d.X)
    np.testing.assert_array_equal(back.y, d.y)


def test_dataset_rejects_nonfinite_and_duplicates():
    with pytest.raises(DataError):
        _ds([[1.0], [np.nan]], [1, 2])
    with pytest.raises(DataError):
        _ds([[1.0, 2.0], [3.0, 4.0]], [1, 2], names=["a", "a"])


def test_dataset_is_read_only(rng):
    d = _ds(rng.normal(size=(4, 2)), rng.normal(size=4))
    with pytest.raises(ValueError):
        d.X[0, 0] = 1.0


def test_standardize_three_points():
    s, rec = standardize(_ds([[1], [2], [3]], [4, 5, 6]))
    np.testing.assert_allclose(s.X[:, 0], [-1, 0, 1], atol=1e-15)
    np.testing.assert_allclose(s.y, [-1, 0, 1], atol=1e-15)
    assert s.provenance is Provenance.STANDARDIZED
    assert rec.y_mean == 5.0


def test_standardize_guards():
    s, _ = standardize(_ds([[1], [2], [3]], [4, 5, 6]))
    with pytest.raises(DataError):
        standardize(s)
    with pytest.raises(DataError, match="'const'"):
        standardize(_ds([[1, 5], [2, 5], [3, 5]], [1, 2, 3], names=["a", "const"]))


def test_coefficients_to_raw_predicts_same(rng):
    d = _ds(rng.normal(3, 2, size=(20, 3)), rng.normal(size=20))
    s, rec = standardize(d)
    beta = np.array([0.5, -1.0, 2.0])
    b0, b = coefficients_to_raw(beta, rec)
    np.testing.assert_allclose(b0 + d.X @ b, rec.y_mean + s.X @ beta, atol=1e-12)


@given(arrays(np.float64, st.tuples(st.integers(3, 12), st.integers(1, 5)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)),
       st.booleans())
def test_standardize_round_trip(X, scale_y):
    if np.any(X.std(axis=0, ddof=1) < 1e-3 * (1 + np.abs(X).max())):
        return
    y = X.sum(axis=1) + np.arange(X.shape[0])
    d = _ds(X, y)
    s, rec = standardize(d, scale_response=scale_y)
    np.testing.assert_allclose(s.X.mean(axis=0), 0, atol=1e-10)
    np.testing.assert_allclose(s.X.std(axis=0, ddof=1), 1, atol=1e-10)
    assert abs(s.y.mean()) < 1e-10 * max(1, np.abs(y).max())
    back = unstandardize(s, rec)
    np.testing.assert_allclose(back.X, X, rtol=1e-12, atol=1e-12 * np.abs(X).max())
    np.testing.assert_allclose(back.y, y, rtol=1e-12, atol=1e-12 * np.abs(y).max())


def test_apply_scaling_uses_training_stats(rng):
    tr, rec = standardize(_ds(rng.normal(size=(10, 2)), rng.normal(size=10)))
    va = apply_scaling(_ds(rng.normal(size=(5, 2)), rng.normal(size=5)), rec)
    assert va.scaling is rec


@pytest.mark.parametrize("n,v,sizes", [(10, 10, [1] * 10), (11, 10, [1] * 9 + [2])])
def test_make_folds_forced_sizes(n, v, sizes):
    f = make_folds(n, v, seed=7)
    assert sorted(np.bincount(f.assignment)[1:]) == sizes


def test_make_folds_errors_and_determinism():
    with pytest.raises(DataError):
        make_folds(5, 6, 0)
    with pytest.raises(DataError):
        make_folds(5, 1, 0)
    np.testing.assert_array_equal(make_folds(50, 7, 3).assignment, make_folds(50, 7, 3).assignment)


@given(st.integers(2, 200), st.data())
def test_make_folds_balanced(n, data):
    v = data.draw(st.integers(2, n))
    f = make_folds(n, v, data.draw(st.integers(0, 2**31)))
    counts = np.bincount(f.assignment, minlength=v + 1)[1:]
    assert counts.min() >= 1 and counts.max() - counts.min() <= 1
    for k in range(1, v + 1):
        assert len(f.withheld(k)) + len(f.training(k)) == n


def test_expand_features_counts_and_names(rng):
    names = ["age", "sex"] + [f"x{j}" for j in range(8)]
    d = _ds(rng.normal(size=(5, 10)), rng.normal(size=5), names)
    e = expand_features(d, ["sex"])
    assert e.p == 64
    assert "age*sex" in e.feature_names and "age^2" in e.feature_names
    assert "sex^2" not in e.feature_names
    assert expand_features(_ds(rng.normal(size=(4, 2)), np.zeros(4))).p == 5
    assert expand_features(_ds(rng.normal(size=(4, 1)), np.zeros(4), ["a"]), ["a"]).p == 1
    with pytest.raises(DataError):
        expand_features(d, ["nope"])


@given(st.integers(1, 9), st.data())
def test_expand_features_dimension(p, data):
    excl = data.draw(st.sets(st.integers(0, p - 1)))
    X = np.arange(1.0, 4.0 * p + 1).reshape(4, p) ** 1.5
    d = _ds(X, np.zeros(4))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e = expand_features(d, [d.feature_names[j] for j in excl])
    assert e.p == p + p * (p - 1) // 2 + (p - len(excl))


def test_expand_features_centered_products(rng):
    X = rng.normal(size=(200, 2)) + np.array([50.0, 20.0])
    d = _ds(X, np.zeros(200), ["a", "b"])
    raw, cen = expand_features(d), expand_features(d, center=True)
    np.testing.assert_array_equal(cen.X[:, :2], X)
    Xc = X - X.mean(axis=0)
    np.testing.assert_allclose(cen.X[:, 2], Xc[:, 0] * Xc[:, 1])
    np.testing.assert_allclose(cen.X[:, 3], Xc[:, 0] ** 2)

    def r2_on_main(col):
        A = np.column_stack([np.ones(200), X])
        r = col - A @ np.linalg.lstsq(A, col, rcond=None)[0]
        return 1 - r @ r / np.sum((col - col.mean()) ** 2)

    assert r2_on_main(raw.X[:, 2]) > 0.99  # raw product is almost a main-effect combination
    assert r2_on_main(cen.X[:, 2]) < 0.1
