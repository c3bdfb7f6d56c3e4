import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=40
)
settings.load_profile("default")


def brute_force(X, y, k, M=None):
    """Best subset of size <= k by enumeration (box constraints checked when M given)."""
    from itertools import combinations

    n, p = X.shape
    best = (float(y @ y) / n, ())
    for size in range(1, k + 1):
        for S in combinations(range(p), size):
            coef, *_ = np.linalg.lstsq(X[:, S], y, rcond=None)
            if M is not None and np.any(np.abs(coef) > M[list(S)] * (1 + 1e-9)):
                from scipy.optimize import lsq_linear

                coef = lsq_linear(X[:, S], y, bounds=(-M[list(S)], M[list(S)]), tol=1e-14).x
            r = y - X[:, S] @ coef
            obj = float(r @ r) / n
            if obj < best[0] - 1e-12:
                best = (obj, S)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
