"""Branch-and-bound for best-subset regression with big-M bounds.

Problem::

    min  (1/n) ||y - X b||^2
    s.t. -M_j z_j <= b_j <= M_j z_j,   sum_j z_j <= k,   z in {0,1}^p

Node relaxations drop integrality. Eliminating z gives a box-constrained
least-squares problem with one budget constraint
``sum_{free} |b_j| / M_j <= k - |F1|``; we dualize the budget with a scalar
multiplier mu and solve each Lagrangian subproblem by coordinate descent.
Every reported node bound is a weak-duality bound minus a rigorous
(Frank-Wolfe) bound on the inner-solve error, so it never exceeds the best
integer completion of the node.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import lsq_linear

from ._cd import cd_solve

_NO_HISTORY = np.empty(0)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

STATUSES = ("optimal", "gap_reached", "surrogate_reached", "time_capped", "infeasible_k")


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class MiqpProblem:
    X: np.ndarray
    y: np.ndarray
    k: int
    bigM: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        M = np.asarray(self.bigM, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("X and y dimensions disagree")
        if M.shape != (X.shape[1],):
            raise ValueError(f"bigM must have length p={X.shape[1]}")
        if np.any(~(M > 0)):
            raise ValueError("all big-M bounds must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "bigM", M)
        object.__setattr__(self, "k", int(self.k))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass
class MiqpOptions:
    """Solver controls.

    ``maxtime`` is when the surrogate-bound rule switches on; ``totaltime`` is
    the hard wall-clock cap. ``warm_start`` is ``(z, beta)``.
    """

    eps_gap: float = 0.05
    eps_fs: float = 0.05
    maxtime: float = 180.0
    totaltime: float = 600.0
    surrogate_bound: Optional[float] = None
    warm_start: Optional[tuple] = None
    node_limit: Optional[int] = None
    workers: int = 1
    mu_iterations: int = 20
    cd_tol: float = 1e-8
    dive: bool = True
    record_nodes: bool = False
    event_log: Optional[object] = None  # path or text stream

    def __post_init__(self):
        if not 0 <= self.eps_gap < 1:
            raise ValueError("eps_gap must lie in [0, 1)")
        if not 0 <= self.eps_fs < 1:
            raise ValueError("eps_fs must lie in [0, 1)")
        if self.maxtime > self.totaltime:
            raise ValueError("maxtime must not exceed totaltime")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class Node:
    fixed_in: frozenset
    fixed_out: frozenset
    lower_bound: float = -math.inf
    relaxed_beta: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    depth: int = 0


@dataclass
class Solution:
    beta: np.ndarray
    z: np.ndarray
    objective: float
    lower_bound: float
    gap: float
    status: str
    nodes: int
    wall_time: float
    events: list = field(default_factory=list, repr=False)
    explored: list = field(default_factory=list, repr=False)

    @property
    def support(self) -> tuple:
        return tuple(int(j) for j in np.flatnonzero(self.z > 0.5))


@dataclass
class RelaxResult:
    beta: np.ndarray
    lower_bound: float
    z: np.ndarray
    mu: float
    leaf: bool


def relative_gap(ub: float, lb: float) -> float:
    return max(0.0, (ub - lb) / max(ub, 1e-12))


def big_m_bounds(X, y, c: float = 5.0, floor: float = 1e-6):
    """``M_j = c |b_j|`` from (minimum-norm) least squares, floored at ``floor * max M``."""
    if c <= 0:
        raise ValueError("scaling constant c must be positive")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    M = c * np.abs(beta)
    top = float(M.max()) if M.size else 0.0
    if top <= 0:
        warnings.warn("least-squares coefficients are all zero; big-M bounds set to the floor",
                      stacklevel=2)
        return np.full(X.shape[1], floor)
    low = M < floor * top
    if np.any(low):
        warnings.warn(f"{int(low.sum())} big-M bound(s) raised to the floor {floor * top:.3g}",
                      stacklevel=2)
        M[low] = floor * top
    return M


def _box_lstsq(X, y, support, M):
    """Least squares on ``support`` with ``|b_j| <= M_j``."""
    p = X.shape[1]
    beta = np.zeros(p)
    if not support:
        return beta
    cols = list(support)
    A = X[:, cols]
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    bound = M[cols]
    if np.any(np.abs(coef) > bound):
        coef = lsq_linear(A, y, bounds=(-bound, bound), method="bvls",
                          tol=1e-14, lsmr_tol="auto").x
        coef = np.clip(coef, -bound, bound)
    beta[cols] = coef
    return beta


class _Workspace:
    """Problem data in Gram form plus an incumbent-refit cache."""

    def __init__(self, problem: MiqpProblem, opts: MiqpOptions):
        X, y = problem.X, problem.y
        n = problem.n
        self.problem = problem
        self.X, self.y, self.M = X, y, problem.bigM
        self.G = X.T @ X / n
        self.c = X.T @ y / n
        self.yy = float(y @ y) / n
        self.safety = 1e-12 * max(self.yy, 1e-300)
        self.tol = opts.cd_tol
        self.max_sweeps = max(100, 10 * problem.p)
        self.mu_iterations = opts.mu_iterations
        self._refits = {}

    def objective(self, beta) -> float:
        r = self.y - self.X @ beta
        return float(r @ r) / self.problem.n

    def refit(self, support):
        key = frozenset(int(j) for j in support)
        hit = self._refits.get(key)
        if hit is None:
            beta = _box_lstsq(self.X, self.y, sorted(key), self.M)
            hit = (beta, self.objective(beta))
            self._refits[key] = hit
        return hit[0].copy(), hit[1]

    def _inner(self, beta, lam, active):
        Gb = self.G @ beta
        cd_solve(self.G, self.c, beta, Gb, lam, self.M, active, self.tol, self.max_sweeps,
                 _NO_HISTORY)
        return beta

    def _certified(self, beta, lam, active) -> float:
        """Lower bound on min_box (1/n)||y - Xb||^2 + sum 2 lam_j |b_j| over active coords."""
        Gb = self.G @ beta
        h = Gb - self.c
        ab = np.abs(beta)
        primal = 0.5 * beta @ Gb - self.c @ beta + lam @ ab
        slack = np.minimum(0.0, self.M * (lam - np.abs(h))) - h * beta - lam * ab
        return self.yy + 2.0 * (primal + float(slack[active].sum()))

    def relax(self, fixed_in: np.ndarray, fixed_out: np.ndarray, k: int, beta0=None):
        """Solve the node relaxation; ``None`` if the node is infeasible."""
        budget = k - int(fixed_in.sum())
        if budget < 0:
            return None
        p = self.problem.p
        free = ~(fixed_in | fixed_out)
        n_free = int(free.sum())
        beta = np.zeros(p) if beta0 is None else np.clip(beta0, -self.M, self.M)
        zero = np.zeros(p)
        if budget == 0 or n_free <= budget:
            active = fixed_in if budget == 0 else (fixed_in | free)
            beta = np.where(active, beta, 0.0)
            beta = self._inner(beta, zero, active)
            lb = self._certified(beta, zero, active) - self.safety
            z = np.where(active, 1.0, 0.0)
            return RelaxResult(beta, lb, z, 0.0, True)

        active = fixed_in | free
        beta = np.where(active, beta, 0.0)
        inv_m = np.where(free, 1.0 / self.M, 0.0)

        def evaluate(mu, b):
            lam = 0.5 * mu * inv_m
            b = self._inner(b, lam, active)
            return self._certified(b, lam, active) - mu * budget, b

        val0, b0 = evaluate(0.0, beta)
        best = (val0, 0.0, b0.copy())
        if float(np.abs(b0) @ inv_m) > budget + 1e-12:
            bF = self._inner(np.where(fixed_in, b0, 0.0), zero, fixed_in)
            h = self.G @ bF - self.c
            mu_max = float(np.max(np.where(free, 2.0 * self.M * np.abs(h), 0.0)))
            if mu_max > 0:
                lo, hi = 0.0, mu_max
                x1 = hi - _GOLDEN * (hi - lo)
                x2 = lo + _GOLDEN * (hi - lo)
                f1, b = evaluate(x1, b0.copy())
                best = max(best, (f1, x1, b.copy()), key=lambda t: t[0])
                f2, b = evaluate(x2, b)
                best = max(best, (f2, x2, b.copy()), key=lambda t: t[0])
                for _ in range(self.mu_iterations):
                    if f1 < f2:
                        lo, x1, f1 = x1, x2, f2
                        x2 = lo + _GOLDEN * (hi - lo)
                        f2, b = evaluate(x2, b)
                        best = max(best, (f2, x2, b.copy()), key=lambda t: t[0])
                    else:
                        hi, x2, f2 = x2, x1, f1
                        x1 = hi - _GOLDEN * (hi - lo)
                        f1, b = evaluate(x1, b)
                        best = max(best, (f1, x1, b.copy()), key=lambda t: t[0])
        val, mu, b = best
        z = np.where(fixed_in, 1.0, np.abs(b) * inv_m)
        return RelaxResult(b, val - self.safety, z, mu, False)


def _masks(node: Node, p: int):
    fi = np.zeros(p, dtype=bool)
    fo = np.zeros(p, dtype=bool)
    fi[list(node.fixed_in)] = True
    fo[list(node.fixed_out)] = True
    return fi, fo


def solve_node_relaxation(problem: MiqpProblem, node: Node, mu_tolerance: float = 1e-8):
    """Relax one node. Returns ``(beta, certified_lower_bound, fractional_z)``.

    Raises ``SolverError`` if more than k variables are fixed in.
    """
    ws = _Workspace(problem, MiqpOptions(cd_tol=mu_tolerance))
    fi, fo = _masks(node, problem.p)
    res = ws.relax(fi, fo, problem.k)
    if res is None:
        raise SolverError("node is infeasible: more than k variables fixed to 1")
    return res.beta, res.lower_bound, res.z


def _round(ws: _Workspace, fixed_in, fixed_out, k, beta):
    free = ~(fixed_in | fixed_out)
    budget = k - int(fixed_in.sum())
    mag = np.where(free, np.abs(beta), 0.0)
    cand = np.flatnonzero(mag > 0)
    cand = cand[np.lexsort((cand, -mag[cand]))][:budget]
    support = sorted(set(np.flatnonzero(fixed_in).tolist()) | set(cand.tolist()))
    b, obj = ws.refit(support)
    z = np.zeros(ws.problem.p)
    z[support] = 1.0
    return z, b, obj


def round_incumbent(problem: MiqpProblem, node: Node, relaxed_beta):
    """Primal heuristic: F1 plus the largest free |beta_j|, refit by least squares in the box."""
    ws = _Workspace(problem, MiqpOptions())
    fi, fo = _masks(node, problem.p)
    return _round(ws, fi, fo, problem.k, np.asarray(relaxed_beta, dtype=float))


def _branch_variable(res: RelaxResult, fixed_in, fixed_out, ws: _Workspace) -> int:
    free = np.flatnonzero(~(fixed_in | fixed_out))
    z = res.z[free]
    frac = np.minimum(z, 1.0 - z)
    mag = np.abs(res.beta[free])
    grad = np.abs(ws.G[free] @ res.beta - ws.c[free])
    # most fractional, then larger |beta|, then larger gradient, then lowest index
    order = np.lexsort((free, -grad, -mag, -frac))
    return int(free[order[0]])


class _EventLog:
    def __init__(self, target):
        self._own = False
        self._fh = None
        if target is None:
            return
        if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
            self._fh = open(target, "w", encoding="utf-8")
            self._own = True
        else:
            self._fh = target
        self._fh.write("# wall_time\tupper_bound\tlower_bound\tgap\tevent\n")

    def write(self, t, ub, lb, gap, what):
        if self._fh is not None:
            self._fh.write(f"{t:.6f}\t{ub:.12g}\t{lb:.12g}\t{gap:.6g}\t{what}\n")

    def close(self):
        if self._own:
            self._fh.close()


def solve(problem: MiqpProblem, options: Optional[MiqpOptions] = None) -> Solution:
    """Best-first branch-and-bound on the big-M best-subset problem."""
    opts = options or MiqpOptions()
    t0 = time.perf_counter()
    p, k = problem.p, problem.k

    if k < 0:
        return Solution(np.zeros(p), np.zeros(p), math.nan, math.nan, math.nan,
                        "infeasible_k", 0, 0.0)
    ws = _Workspace(problem, opts)
    if k == 0 or k >= p:
        support = [] if k == 0 else list(range(p))
        beta, obj = ws.refit(support)
        z = np.zeros(p)
        z[support] = 1.0
        return Solution(beta, z, obj, obj, 0.0, "optimal", 0, time.perf_counter() - t0)

    log = _EventLog(opts.event_log)
    events = []
    explored = []
    counter = itertools.count()
    inc = {"obj": math.inf, "beta": np.zeros(p), "z": np.zeros(p)}
    nodes = 0
    state = {"lb": -math.inf}

    def elapsed():
        return time.perf_counter() - t0

    def record(what, global_lb):
        gap = relative_gap(inc["obj"], global_lb)
        ev = (elapsed(), inc["obj"], global_lb, gap, what)
        events.append(ev)
        log.write(*ev)

    def offer(z, beta, obj, global_lb):
        if obj < inc["obj"] - 1e-15 * max(1.0, abs(obj)):
            inc.update(obj=obj, beta=beta, z=z)
            record("incumbent", global_lb)

    def prune_level():
        return inc["obj"] - 1e-10 * max(inc["obj"], 1e-12) - 1e-14

    if opts.warm_start is not None:
        wz, wb = (np.asarray(a, dtype=float) for a in opts.warm_start)
        supp = sorted(set(np.flatnonzero(wz > 0.5).tolist()) | set(np.flatnonzero(wb).tolist()))
        if len(supp) <= k:
            wb = np.where(np.isin(np.arange(p), supp), wb, 0.0)
            if np.all(np.abs(wb) <= problem.bigM):
                z = np.zeros(p)
                z[supp] = 1.0
                offer(z, wb, ws.objective(wb), -math.inf)
            b, obj = ws.refit(supp)
            z = np.zeros(p)
            z[supp] = 1.0
            offer(z, b, obj, -math.inf)

    def evaluate(node: Node, parent_lb: float, warm):
        fi, fo = _masks(node, p)
        res = ws.relax(fi, fo, k, warm)
        return node, fi, fo, res, parent_lb

    def process(item):
        """Bookkeeping after a relaxation; returns a pushable node or None."""
        nonlocal nodes
        node, fi, fo, res, parent_lb = item
        nodes += 1
        if res is None:
            return None
        lb = max(res.lower_bound, parent_lb)
        if opts.record_nodes:
            explored.append((node.fixed_in, node.fixed_out, lb))
        if res.leaf:
            allowed = np.flatnonzero(fi | (~fo if int(fi.sum()) < k else fi))
            b, obj = ws.refit(allowed.tolist())
            z = np.zeros(p)
            z[allowed] = 1.0
            offer(z, b, obj, state["lb"])
            return None
        z, b, obj = _round(ws, fi, fo, k, res.beta)
        offer(z, b, obj, state["lb"])
        if lb >= prune_level():
            return None
        return Node(node.fixed_in, node.fixed_out, lb, res.beta, node.depth), fi, fo, res

    def children(entry):
        node, fi, fo, res = entry
        j = _branch_variable(res, fi, fo, ws)
        out = Node(node.fixed_in, node.fixed_out | {j}, node.lower_bound, depth=node.depth + 1)
        inn = Node(node.fixed_in | {j}, node.fixed_out, node.lower_bound, depth=node.depth + 1)
        return [(out, res.beta), (inn, res.beta)]

    heap = []

    def push(entry):
        node = entry[0]
        heapq.heappush(heap, (node.lower_bound, -node.depth, next(counter), entry))

    root = process(evaluate(Node(frozenset(), frozenset()), -math.inf, None))
    if root is not None:
        push(root)
        if opts.dive and opts.warm_start is None:
            entry = root
            while entry is not None and elapsed() <= opts.totaltime:
                (node_in, warm) = children(entry)[1]
                entry = process(evaluate(node_in, entry[0].lower_bound, warm))

    pool = ThreadPoolExecutor(opts.workers) if opts.workers > 1 else None
    status = None
    try:
        while True:
            global_lb = min(heap[0][0], inc["obj"]) if heap else inc["obj"]
            if global_lb > state["lb"]:
                state["lb"] = global_lb
                record("bound", global_lb)
            ub = inc["obj"]
            gap = relative_gap(ub, global_lb)
            if not heap or ub - global_lb <= 1e-9 * max(ub, 1e-12):
                status = "optimal"
                break
            if gap <= opts.eps_gap:
                status = "gap_reached"
                break
            t = elapsed()
            if (opts.surrogate_bound is not None and t > opts.maxtime
                    and (ub - opts.surrogate_bound) / max(opts.surrogate_bound, 1e-12)
                    <= opts.eps_fs):
                status = "surrogate_reached"
                break
            if t > opts.totaltime or (opts.node_limit is not None and nodes >= opts.node_limit):
                status = "time_capped"
                break
            batch = []
            while heap and len(batch) < opts.workers:
                lb, _, _, entry = heapq.heappop(heap)
                if lb >= prune_level():
                    continue
                batch.append(entry)
            jobs = [(child, entry[0].lower_bound, warm)
                    for entry in batch for child, warm in children(entry)]
            if pool is None:
                results = [evaluate(*job) for job in jobs]
            else:
                results = list(pool.map(lambda job: evaluate(*job), jobs))
            for item in results:
                entry = process(item)
                if entry is not None:
                    push(entry)
    finally:
        if pool is not None:
            pool.shutdown()

    global_lb = min(heap[0][0], inc["obj"]) if heap else inc["obj"]
    global_lb = min(inc["obj"], max(global_lb, state["lb"]))
    sol = Solution(
        beta=inc["beta"], z=inc["z"], objective=inc["obj"], lower_bound=global_lb,
        gap=relative_gap(inc["obj"], global_lb), status=status, nodes=nodes,
        wall_time=elapsed(), events=events, explored=explored,
    )
    log.close()
    return sol
