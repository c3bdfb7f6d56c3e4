"""Integrated cross-validation over the sparsity bound.

Withheld rows are dropped from each fold's objective (the limit of relaxing
their residual constraints by an arbitrarily large amount). Folds are solved
in order; each fold is warm-started from the previous fold's support refit on
its own training rows, or from forward selection if that is better, and gets
forward selection at k+1 as its surrogate bound.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .data import Dataset, FoldAssignment
from .forward import fs_path, fs_warm_start
from .solver import MiqpOptions, MiqpProblem, big_m_bounds, solve

MODES = ("integrated", "standard", "parallel")


@dataclass(frozen=True)
class IcvFoldProblem:
    fold_index: int
    withheld: np.ndarray
    training: np.ndarray


def fold_problems(folds: FoldAssignment) -> list:
    return [IcvFoldProblem(f, folds.withheld(f), folds.training(f))
            for f in range(1, folds.v + 1)]


@dataclass
class CvResult:
    k: int
    cvmse: float
    fold_mse: np.ndarray
    fold_supports: list
    fold_sd: float
    total_time: float
    fold_status: list
    fold_times: list
    fold_nodes: list

    def csv_row(self) -> dict:
        return {
            "k": self.k,
            "cvmse": repr(float(self.cvmse)),
            "fold_sd": repr(float(self.fold_sd)),
            "total_time": f"{self.total_time:.6f}",
            "fold_status": ";".join(self.fold_status),
        }


def _refit_support(X, y, support, bigM):
    """LS refit of a carried support on new rows, clipped into the box."""
    beta = np.zeros(X.shape[1])
    if support:
        cols = list(support)
        coef, *_ = np.linalg.lstsq(X[:, cols], y, rcond=None)
        beta[cols] = np.clip(coef, -bigM[cols], bigM[cols])
    z = np.zeros(X.shape[1])
    z[list(support)] = 1.0
    return z, beta


def solve_fold(X, y, bigM, fold: IcvFoldProblem, k: int, options: MiqpOptions,
               carry_warm_start: Optional[tuple] = None, use_fs: bool = True,
               refit: bool = False):
    """Solve one fold on its training rows; returns ``(Solution, withheld MSE)``.

    The withheld rows are scored with the solver's beta, or with an unboxed OLS
    refit on its support when ``refit`` is set.
    """
    tr, te = fold.training, fold.withheld
    if len(tr) < k + 1:
        raise ValueError(f"fold {fold.fold_index} has {len(tr)} training rows, need >= k+1={k + 1}")
    Xt, yt = X[tr], y[tr]
    n_t, p = Xt.shape
    warm = None
    surrogate = None
    if use_fs and 0 < k < p:
        kmax = min(k + 1, p, n_t - 1)
        path = fs_path(Xt, yt, kmax)
        warm = fs_warm_start(Xt, yt, k, path)
        if k + 1 <= kmax:
            surrogate = path.mse(k + 1)
    if carry_warm_start is not None and 0 < k < p:
        support = sorted(int(j) for j in np.flatnonzero(np.asarray(carry_warm_start[0]) > 0.5))
        cz, cb = _refit_support(Xt, yt, support, bigM)
        if warm is None or _mse(Xt, yt, cb) <= _mse(Xt, yt, warm[1]):
            warm = (cz, cb)
    opts = replace(options, warm_start=warm, surrogate_bound=surrogate)
    sol = solve(MiqpProblem(Xt, yt, k, bigM), opts)
    beta = sol.beta
    if refit and sol.support:
        beta = np.zeros(p)
        beta[list(sol.support)] = np.linalg.lstsq(Xt[:, list(sol.support)], yt, rcond=None)[0]
    r = y[te] - X[te] @ beta
    return sol, float(r @ r) / len(te)


def _mse(X, y, beta):
    r = y - X @ beta
    return float(r @ r) / len(y)


class CvEvaluator:
    """Memoized k -> CvResult.

    ``mode`` is ``integrated`` (chained warm starts, FS warm starts and
    surrogate bound), ``standard`` (independent cold solves, no surrogate) or
    ``parallel`` (FS warm starts, no chaining; folds run on a thread pool).
    ``fold_refit`` scores folds with an OLS refit on the selected support.
    """

    def __init__(self, dataset: Dataset, folds: FoldAssignment, options: MiqpOptions,
                 mode: str = "integrated", bigM=None, c: float = 5.0, workers: int = 1,
                 fold_refit: bool = False):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if folds.n != dataset.n:
            raise ValueError("fold assignment does not match the dataset size")
        self.dataset = dataset
        self.folds = folds
        self.options = options
        self.mode = mode
        self.workers = workers
        self.fold_refit = fold_refit
        self.bigM = big_m_bounds(dataset.X, dataset.y, c) if bigM is None else np.asarray(bigM)
        self.problems = fold_problems(folds)
        self.cache = {}
        self.solver_calls = 0

    def result(self, k: int) -> CvResult:
        k = int(k)
        if k in self.cache:
            return self.cache[k]
        if k < 0:
            raise ValueError("k must be >= 0")
        X, y = self.dataset.X, self.dataset.y
        t0 = time.perf_counter()
        if k == 0:
            mse = np.array([float(np.mean(y[f.withheld] ** 2)) for f in self.problems])
            res = CvResult(0, float(mse.mean()), mse, [()] * len(mse),
                           float(mse.std(ddof=1)), time.perf_counter() - t0,
                           ["optimal"] * len(mse), [0.0] * len(mse), [0] * len(mse))
            self.cache[k] = res
            return res

        def run(fold, carry):
            self.solver_calls += 1
            return solve_fold(X, y, self.bigM, fold, k, self.options, carry,
                              use_fs=self.mode != "standard", refit=self.fold_refit)

        if self.mode == "parallel" and self.workers > 1:
            with ThreadPoolExecutor(self.workers) as ex:
                outs = list(ex.map(lambda f: run(f, None), self.problems))
        else:
            outs = []
            carry = None
            for fold in self.problems:
                sol, mse = run(fold, carry)
                outs.append((sol, mse))
                if self.mode == "integrated":
                    carry = (sol.z, sol.beta)
        sols = [s for s, _ in outs]
        mse = np.array([m for _, m in outs])
        res = CvResult(
            k=k, cvmse=float(mse.mean()), fold_mse=mse,
            fold_supports=[s.support for s in sols],
            fold_sd=float(mse.std(ddof=1)) if len(mse) > 1 else 0.0,
            total_time=time.perf_counter() - t0,
            fold_status=[s.status for s in sols],
            fold_times=[s.wall_time for s in sols],
            fold_nodes=[s.nodes for s in sols],
        )
        self.cache[k] = res
        return res

    def __call__(self, k: int) -> CvResult:
        return self.result(k)


def cv_error_at_k(dataset: Dataset, folds: FoldAssignment, k: int, options: MiqpOptions,
                  mode: str = "integrated", evaluator: Optional[CvEvaluator] = None) -> CvResult:
    ev = evaluator or CvEvaluator(dataset, folds, options, mode=mode)
    return ev.result(k)


def write_cv_csv(results, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [r.csv_row() for r in sorted(results, key=lambda r: r.k)]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["k", "cvmse", "fold_sd", "total_time", "fold_status"])
        w.writeheader()
        w.writerows(rows)
    return path
