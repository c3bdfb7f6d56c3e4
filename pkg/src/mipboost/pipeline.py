"""End-to-end selection: whiten, tune k by bisection over ICV, final solve, OLS refit."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .bisection import BfOptions, BfTrace, initial_upper_bound, tune
from .data import Dataset, FoldAssignment, Provenance, make_folds
from .forward import cv_forward_selection, fs_path, fs_warm_start
from .icv import CvEvaluator
from .lasso import cv_lasso, relaxed_refit
from .solver import MiqpOptions, MiqpProblem, Solution, big_m_bounds, solve
from .whitening import WhiteningTransform, whiten


@dataclass
class MipBoostConfig:
    """Pipeline settings; defaults match the usual desk-scale simulation protocol."""

    v: int = 10
    seed: int = 0
    delta: float = 0.01
    feeler_radius: int = 1
    max_restarts: int = 1
    itermax: Optional[int] = None
    c0: Optional[int] = None
    eps_gap: float = 0.05
    eps_fs: float = 0.05
    maxtime: float = 180.0
    totaltime: float = 600.0
    bigm_c: float = 5.0
    whiten: bool = False
    cv_mode: str = "integrated"
    workers: int = 1

    def miqp_options(self) -> MiqpOptions:
        return MiqpOptions(eps_gap=self.eps_gap, eps_fs=self.eps_fs, maxtime=self.maxtime,
                           totaltime=self.totaltime, workers=self.workers)

    def bf_options(self) -> BfOptions:
        return BfOptions(delta=self.delta, feeler_radius=self.feeler_radius,
                         itermax=self.itermax, max_restarts=self.max_restarts)

    def snapshot(self) -> dict:
        return asdict(self)


@dataclass
class SelectionResult:
    method: str
    support: tuple
    beta: np.ndarray  # OLS refit on standardized original features
    k_hat: int
    wall_time: float
    c0: Optional[int] = None
    trace: Optional[BfTrace] = None
    final: Optional[Solution] = None
    whitening: Optional[WhiteningTransform] = None
    extra: dict = field(default_factory=dict)


def ols_refit(d: Dataset, support) -> np.ndarray:
    if not len(support):
        return np.zeros(d.p)
    return relaxed_refit(d.X, d.y, support)


def _prepare(d: Dataset, whiten_data: bool, sigma=None):
    if d.provenance is not Provenance.STANDARDIZED:
        raise ValueError("pipeline expects standardized data")
    if not whiten_data:
        return d, None
    return whiten(d, sigma)


def solve_at_k(work: Dataset, k: int, cfg: MipBoostConfig) -> Solution:
    """Final full-data solve at k with FS warm start and FS(k+1) surrogate bound."""
    X, y = work.X, work.y
    M = big_m_bounds(X, y, cfg.bigm_c)
    opts = cfg.miqp_options()
    if 0 < k < work.p:
        kmax = min(k + 1, work.p, work.n - 1)
        path = fs_path(X, y, kmax)
        opts.warm_start = fs_warm_start(X, y, min(k, kmax), path)
        if k + 1 <= kmax:
            opts.surrogate_bound = path.mse(k + 1)
    return solve(MiqpProblem(X, y, k, M), opts)


def mipboost_select(d: Dataset, cfg: MipBoostConfig, sigma=None,
                    folds: Optional[FoldAssignment] = None, k: Optional[int] = None,
                    lasso_cv=None) -> SelectionResult:
    """Select features on standardized data.

    With ``k`` given, tuning is skipped and the MIQP is solved at that bound.
    The support found on (optionally whitened) data is refit by OLS on the
    original standardized features.
    """
    t0 = time.perf_counter()
    work, transform = _prepare(d, cfg.whiten, sigma)
    trace = None
    c0 = None
    if k is None:
        folds = folds or make_folds(work.n, cfg.v, cfg.seed)
        if cfg.c0 is not None:
            c0 = cfg.c0
        else:
            c0 = initial_upper_bound(work, folds, lasso_cv or cv_lasso(work, folds))
        c0 = int(min(c0, work.p, work.n))
        ev = CvEvaluator(work, folds, cfg.miqp_options(), mode=cfg.cv_mode, c=cfg.bigm_c,
                         workers=cfg.workers)
        k, trace = tune(ev, cfg.bf_options(), c0)
    final = solve_at_k(work, k, cfg)
    support = final.support
    return SelectionResult(
        method="mipboost", support=support, beta=ols_refit(d, support), k_hat=int(k),
        wall_time=time.perf_counter() - t0, c0=c0, trace=trace, final=final,
        whitening=transform,
    )


def lasso_select(d: Dataset, rule: str = "min", folds: Optional[FoldAssignment] = None,
                 v: int = 10, seed: int = 0, whiten_data: bool = False, sigma=None,
                 lasso_cv=None) -> SelectionResult:
    t0 = time.perf_counter()
    work, transform = _prepare(d, whiten_data, sigma)
    folds = folds or make_folds(work.n, v, seed)
    cv = lasso_cv or cv_lasso(work, folds)
    lam = cv.lambda_min if rule == "min" else cv.lambda_1sd
    support = cv.support_at(lam)
    return SelectionResult(method=f"lasso_{rule}", support=support, beta=ols_refit(d, support),
                           k_hat=len(support), wall_time=time.perf_counter() - t0,
                           whitening=transform, extra={"lambda": lam})


def fs_select(d: Dataset, folds: Optional[FoldAssignment] = None, v: int = 10, seed: int = 0,
              kmax: Optional[int] = None, whiten_data: bool = False, sigma=None) -> SelectionResult:
    t0 = time.perf_counter()
    work, transform = _prepare(d, whiten_data, sigma)
    folds = folds or make_folds(work.n, v, seed)
    n_train_min = min(len(folds.training(f)) for f in range(1, folds.v + 1))
    kmax = min(kmax or work.p, work.p, n_train_min - 1)
    k, _ = cv_forward_selection(work, folds, kmax)
    support = fs_path(work.X, work.y, k).support(k) if k > 0 else ()
    return SelectionResult(method="fs", support=support, beta=ols_refit(d, support), k_hat=k,
                           wall_time=time.perf_counter() - t0, whitening=transform)
