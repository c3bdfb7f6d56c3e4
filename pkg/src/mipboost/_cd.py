"""Coordinate descent for box-constrained, weighted-L1 quadratic problems.

Solves

    min_b  0.5 b'Gb - c'b + sum_j lam_j |b_j|
    s.t.   |b_j| <= ub_j,   b_j = 0 where not active

in Gram form (G = X'X/n, c = X'y/n). Both the LASSO and the branch-and-bound
node relaxations reduce to this.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _kkt_residual(G, c, beta, Gb, lam, ub, active):
    p = beta.shape[0]
    worst = 0.0
    for j in range(p):
        if not active[j]:
            continue
        h = Gb[j] - c[j]
        b = beta[j]
        if b == 0.0:
            v = abs(h) - lam[j]
        elif b >= ub[j]:
            v = h + lam[j]
        elif b <= -ub[j]:
            v = lam[j] - h
        elif b > 0.0:
            v = abs(h + lam[j])
        else:
            v = abs(h - lam[j])
        if v > worst:
            worst = v
    return worst


@njit(cache=True, nogil=True)
def _objective(c, beta, Gb, lam):
    s = 0.0
    for j in range(beta.shape[0]):
        s += 0.5 * beta[j] * Gb[j] - c[j] * beta[j] + lam[j] * abs(beta[j])
    return s


@njit(cache=True, nogil=True)
def cd_solve(G, c, beta, Gb, lam, ub, active, tol, max_sweeps, history):
    """Cyclic soft-threshold-then-clip updates, in place on ``beta`` and ``Gb``.

    Returns ``(sweeps, kkt_residual)``. If ``history`` has room, the objective
    after each sweep is stored there.
    """
    p = beta.shape[0]
    kkt = _kkt_residual(G, c, beta, Gb, lam, ub, active)
    if kkt <= tol:
        return 0, kkt
    sweeps = 0
    for sweep in range(max_sweeps):
        for j in range(p):
            if not active[j]:
                continue
            gjj = G[j, j]
            old = beta[j]
            if gjj <= 0.0:
                new = 0.0
            else:
                g = c[j] - Gb[j] + gjj * old
                if g > lam[j]:
                    new = (g - lam[j]) / gjj
                elif g < -lam[j]:
                    new = (g + lam[j]) / gjj
                else:
                    new = 0.0
                if new > ub[j]:
                    new = ub[j]
                elif new < -ub[j]:
                    new = -ub[j]
            d = new - old
            if d != 0.0:
                beta[j] = new
                for i in range(p):
                    Gb[i] += d * G[i, j]
        sweeps = sweep + 1
        if sweep < history.shape[0]:
            history[sweep] = _objective(c, beta, Gb, lam)
        kkt = _kkt_residual(G, c, beta, Gb, lam, ub, active)
        if kkt <= tol:
            break
    return sweeps, kkt


_NO_HISTORY = np.empty(0)


def solve_box_l1(G, c, lam, ub, active, beta0=None, tol=1e-8, max_sweeps=1000, history=None):
    """Convenience wrapper returning ``(beta, sweeps, kkt)``."""
    p = c.shape[0]
    beta = np.zeros(p) if beta0 is None else np.where(active, beta0, 0.0).astype(float)
    beta = np.clip(beta, -ub, ub)
    Gb = G @ beta
    sweeps, kkt = cd_solve(G, c, beta, Gb, lam, ub, active, tol, max_sweeps,
                           _NO_HISTORY if history is None else history)
    return beta, sweeps, kkt
