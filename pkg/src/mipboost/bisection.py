"""Bisection with feelers: tune the sparsity bound from few CV evaluations.

The search compares relative slopes of the CV curve,

    delta_f(x, y) = -(f(y) - f(x)) / (f(x) * (y - x)),

against a threshold ``delta`` so that it stops at an elbow instead of chasing
negligible gains. After convergence, probes at ``k_hat -/+ feeler_radius``
decide whether to restart on one side.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .data import Dataset, FoldAssignment
from .lasso import cv_lasso


@dataclass
class BfOptions:
    delta: float = 0.01
    feeler_radius: int = 1
    itermax: Optional[int] = None
    max_restarts: int = 1
    a0: int = 1
    c0: Optional[int] = None

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.feeler_radius < 1:
            raise ValueError("feeler_radius must be >= 1")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be >= 0")
        if self.c0 is not None and not 1 <= self.a0 < self.c0:
            raise ValueError("need 1 <= a0 < c0")

    def resolved_itermax(self, c0: int) -> int:
        if self.itermax is not None:
            return self.itermax
        return 3 * math.ceil(math.log2(max(c0, 2))) + 10

    def evaluation_bound(self, c0: int) -> int:
        """Worst-case evaluation count of one search pass times the passes allowed."""
        per_pass = math.ceil(math.log2(max(c0, 2))) + 2 * self.feeler_radius + 3
        return (self.max_restarts + 1) * per_pass


@dataclass
class BfTrace:
    evaluated: dict = field(default_factory=dict)  # k -> f(k) (inf if failed)
    details: dict = field(default_factory=dict)  # k -> evaluator result object
    order: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    failed: dict = field(default_factory=dict)
    restarts: int = 0
    k_hat: Optional[int] = None
    hit_itermax: bool = False

    def rows(self):
        """(k, f(k), fold_sd, decision) rows in k order for plotting."""
        tags = {}
        for d in self.decisions:
            for k in d.get("ks", ()):
                tags.setdefault(k, []).append(d["action"])
        out = []
        for k in sorted(self.evaluated):
            sd = getattr(self.details.get(k), "fold_sd", float("nan"))
            tag = "k_hat" if k == self.k_hat else "|".join(dict.fromkeys(tags.get(k, [])))
            out.append((k, self.evaluated[k], sd, tag))
        return out

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "cvmse", "fold_sd", "decision"])
            for k, f, sd, tag in self.rows():
                w.writerow([k, repr(float(f)), repr(float(sd)), tag])
        return path


def delta_f(f_x: float, f_y: float, x: int, y: int) -> float:
    """Relative decrease of f per unit step from x to y (positive when f falls)."""
    if not x < y:
        raise ValueError("need x < y")
    if math.isinf(f_x) or math.isinf(f_y):
        if math.isinf(f_y) and not math.isinf(f_x):
            return -math.inf
        if math.isinf(f_x) and not math.isinf(f_y):
            return math.inf
        return 0.0
    return -(f_y - f_x) / (max(f_x, 1e-12) * (y - x))


class _ItermaxReached(Exception):
    pass


def initial_upper_bound(dataset: Dataset, folds: FoldAssignment, lasso_cv=None) -> int:
    """Support size of the min-CV LASSO, clipped to [2, min(p, n)]."""
    cv = lasso_cv if lasso_cv is not None else cv_lasso(dataset, folds)
    top = min(dataset.p, dataset.n)
    size = len(cv.support_at(cv.lambda_min))
    if size == 0:
        return top
    return int(min(max(size, 2), top))


def _sparsest_near_min(ks, fvals, delta):
    finite = [(k, f) for k, f in zip(ks, fvals) if not math.isinf(f)]
    if not finite:
        return min(ks)
    fmin = min(f for _, f in finite)
    return min(k for k, f in finite if f <= fmin + delta * abs(fmin))


def tune(evaluate: Callable, options: BfOptions, c0: Optional[int] = None):
    """Run the search. ``evaluate(k)`` returns f(k) or an object with ``.cvmse``.

    Returns ``(k_hat, BfTrace)``.
    """
    c0 = c0 if c0 is not None else options.c0
    if c0 is None or int(c0) < options.a0:
        raise ValueError("an upper end c0 >= a0 is required")
    c0 = int(c0)
    delta, lf = options.delta, options.feeler_radius
    itermax = options.resolved_itermax(c0)
    trace = BfTrace()

    def f(k: int) -> float:
        if k in trace.evaluated:
            return trace.evaluated[k]
        if len(trace.evaluated) >= itermax:
            raise _ItermaxReached
        try:
            res = evaluate(k)
            val = float(getattr(res, "cvmse", res))
            trace.details[k] = res
        except Exception as exc:  # evaluator failure: treat as +inf, keep going
            val = math.inf
            trace.failed[k] = repr(exc)
        if math.isnan(val):
            val = math.inf
            trace.failed.setdefault(k, "nan")
        trace.evaluated[k] = val
        trace.order.append(k)
        return val

    def search(a: int, c: int) -> int:
        while c - a > 2:
            b = (a + c) // 2
            fa, fb, fc = f(a), f(b), f(c)
            d_ab = delta_f(fa, fb, a, b)
            d_bc = delta_f(fb, fc, b, c)
            if d_ab <= -delta:
                action = "left(overfit)"
                c = b
            elif d_bc <= delta:
                action = "left"
                c = b
            else:
                action = "right"
                a = b
            trace.decisions.append({"interval": (a, c), "ks": (a, b, c) if action == "right"
                                    else (a, c), "df_ab": d_ab, "df_bc": d_bc, "action": action,
                                    "delta": delta})
        ks = list(range(a, c + 1))
        fvals = [f(k) for k in ks]
        k_hat = _sparsest_near_min(ks, fvals, delta)
        trace.decisions.append({"interval": (a, c), "ks": tuple(ks), "action": "converged",
                                "k_hat": k_hat, "delta": delta})
        return k_hat

    a, c = options.a0, c0
    try:
        while True:
            k_hat = search(a, c)
            left, right = k_hat - lf, k_hat + lf
            d_left = delta_f(f(left), f(k_hat), left, k_hat) if left >= 1 else 0.0
            d_right = delta_f(f(k_hat), f(right), k_hat, right) if right <= c0 else 0.0
            if d_right > delta:
                action, na, nc = "restart_right", right, c0
            elif d_left <= delta and d_right <= delta:
                action, na, nc = "restart_left", 1, left
            else:
                action, na, nc = "accept", None, None
            can_restart = (action != "accept" and trace.restarts < options.max_restarts
                           and na is not None and 1 <= na <= nc)
            trace.decisions.append({"k_hat": k_hat, "ks": (left, k_hat, right),
                                    "df_left": d_left, "df_right": d_right, "delta": delta,
                                    "action": action if can_restart else "accept"})
            if not can_restart:
                break
            trace.restarts += 1
            a, c = na, nc
    except _ItermaxReached:
        trace.hit_itermax = True
        ks = sorted(trace.evaluated)
        k_hat = _sparsest_near_min(ks, [trace.evaluated[k] for k in ks], delta)
        trace.decisions.append({"action": "itermax", "k_hat": k_hat, "ks": ()})
    trace.k_hat = k_hat
    return k_hat, trace
