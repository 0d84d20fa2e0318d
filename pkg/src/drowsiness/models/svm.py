"""RBF support vector machines trained by SMO.

One dual solver handles both tasks (the LIBSVM formulation)::

    min_a  1/2 a^T Q a + p^T a   s.t.  s^T a = 0,  0 <= a <= C,
    Q_ij = s_i s_j K(x_i, x_j)

Classification uses ``s = y in {+1, -1}``, ``p = -1``. epsilon-SVR doubles the
variables: ``a = (a+, a-)``, ``s = (+1, -1)``, ``p = (eps - z, eps + z)``.
Working pairs are chosen by maximal violation for ``i`` and second-order gain
for ``j``; argmax ties go to the earliest index in a seeded scan order. The
solver stops when the maximal KKT violation drops below ``tol``, and flags
non-convergence after ``10 l`` iterations without a new best violation.
"""

from __future__ import annotations

import numba
import numpy as np
from scipy.spatial.distance import cdist

from ..rng import SplitMix64, derive_seed

KKT_TOL = 1e-3
TAU = 1e-12


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(np.atleast_2d(A), np.atleast_2d(B), "sqeuclidean"))


@numba.njit(cache=True)
def _smo(K, kidx, s, p, C, tol, order, hard_cap):
    l = s.shape[0]
    alpha = np.zeros(l)
    G = p.copy()
    best_gap = np.inf
    stall = 0
    it = 0
    converged = False
    while True:
        gmax = -np.inf
        i = -1
        for oi in range(l):
            t = order[oi]
            if (s[t] > 0 and alpha[t] < C) or (s[t] < 0 and alpha[t] > 0):
                v = -s[t] * G[t]
                if v > gmax:
                    gmax = v
                    i = t
        gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        for oi in range(l):
            t = order[oi]
            if (s[t] > 0 and alpha[t] > 0) or (s[t] < 0 and alpha[t] < C):
                v = s[t] * G[t]
                if v > gmax2:
                    gmax2 = v
                if i >= 0:
                    b = gmax + v
                    if b > 0:
                        ki = kidx[i]
                        kt = kidx[t]
                        a = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                        if a <= 0:
                            a = TAU
                        obj = -(b * b) / a
                        if obj < obj_min:
                            obj_min = obj
                            j = t
        gap = gmax + gmax2
        if gap < tol or i < 0 or j < 0:
            converged = True
            break
        if gap < best_gap:
            best_gap = gap
            stall = 0
        else:
            stall += 1
            if stall >= 10 * l:
                break
        it += 1
        if it >= hard_cap:
            break

        ki = kidx[i]
        kj = kidx[j]
        quad = K[ki, ki] + K[kj, kj] - 2.0 * K[ki, kj]
        if quad <= 0:
            quad = TAU
        ai_old = alpha[i]
        aj_old = alpha[j]
        if s[i] != s[j]:
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(l):
            kt = kidx[t]
            G[t] += s[t] * (s[i] * K[kt, ki] * dai + s[j] * K[kt, kj] * daj)

    # offset rho: mean over free variables, else midpoint of the feasible range
    ub = np.inf
    lb = -np.inf
    acc = 0.0
    n_free = 0
    for t in range(l):
        yg = s[t] * G[t]
        if alpha[t] >= C:
            if s[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if s[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            acc += yg
    if n_free > 0:
        rho = acc / n_free
    else:
        rho = 0.5 * (ub + lb)
    return alpha, rho, converged, it


def _scan_order(l: int, seed: int) -> np.ndarray:
    return SplitMix64(seed).permutation(l)


def _hard_cap(l: int) -> int:
    return max(100_000, 1000 * l)


def solve_binary(K, labels, C, seed=0, tol=KKT_TOL):
    """Binary C-SVM dual on a precomputed kernel; ``labels`` in {+1, -1}.

    Returns ``(coef, rho, converged, iterations, alpha)`` with decision
    ``f(x) = sum_i coef_i K(x_i, x) - rho`` and ``coef_i = y_i alpha_i``.
    """
    s = np.asarray(labels, dtype=np.float64)
    l = s.shape[0]
    alpha, rho, conv, it = _smo(
        np.ascontiguousarray(K), np.arange(l), s, -np.ones(l), float(C), tol,
        _scan_order(l, seed), _hard_cap(l),
    )
    return s * alpha, rho, conv, it, alpha


def solve_svr(K, z, C, epsilon, seed=0, tol=KKT_TOL):
    """epsilon-SVR dual; returns ``(coef, rho, converged, iterations)``."""
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    s = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - z, epsilon + z])
    kidx = np.concatenate([np.arange(n), np.arange(n)])
    alpha, rho, conv, it = _smo(
        np.ascontiguousarray(K), kidx, s, p, float(C), tol, _scan_order(2 * n, seed), _hard_cap(2 * n),
    )
    return alpha[:n] - alpha[n:], rho, conv, it


PAIRS = ((0, 1), (0, 2), (1, 2))


def fit_svc(X, y, C, gamma, seed=0, n_classes=3) -> dict:
    """One-vs-one RBF SVC over the classes present in ``y``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    K = rbf_kernel(X, X, gamma)
    present = sorted(set(y.tolist()))
    machines = []
    for m, (a, b) in enumerate(PAIRS):
        if a >= n_classes or b >= n_classes:
            continue
        rows = np.flatnonzero((y == a) | (y == b))
        has_a = bool(np.any(y[rows] == a))
        has_b = bool(np.any(y[rows] == b))
        if not (has_a and has_b):
            machines.append({"pair": (a, b), "constant": a if has_a else (b if has_b else -1)})
            continue
        labels = np.where(y[rows] == a, 1.0, -1.0)
        coef, rho, conv, it, alpha = solve_binary(K[np.ix_(rows, rows)], labels, C, seed=derive_seed(seed, m))
        sv = np.flatnonzero(coef != 0)
        machines.append({
            "pair": (a, b), "constant": None, "sv": X[rows][sv], "coef": coef[sv], "rho": rho,
            "converged": conv, "iterations": it,
        })
    return {"gamma": float(gamma), "machines": machines, "present": present}


def predict_svc(state, X, n_classes=3) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    votes = np.zeros((X.shape[0], n_classes), dtype=np.int64)
    present = state["present"]
    if len(present) == 1:
        return np.full(X.shape[0], present[0], dtype=np.int64)
    for mach in state["machines"]:
        a, b = mach["pair"]
        if mach["constant"] is not None:
            c = mach["constant"]
            if c >= 0:
                votes[:, c] += 1
            continue
        f = rbf_kernel(X, mach["sv"], state["gamma"]) @ mach["coef"] - mach["rho"]
        winner = np.where(f >= 0, a, b)
        for k in (a, b):
            votes[:, k] += winner == k
    return np.argmax(votes, axis=1)


def fit_svr(X, z, C, gamma, epsilon, seed=0) -> dict:
    X = np.asarray(X, dtype=np.float64)
    K = rbf_kernel(X, X, gamma)
    coef, rho, conv, it = solve_svr(K, z, C, epsilon, seed=seed)
    sv = np.flatnonzero(coef != 0)
    return {"gamma": float(gamma), "sv": X[sv], "coef": coef[sv], "rho": rho,
            "converged": conv, "iterations": it}


def predict_svr(state, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if state["sv"].shape[0] == 0:
        return np.full(X.shape[0], -state["rho"])
    return rbf_kernel(X, state["sv"], state["gamma"]) @ state["coef"] - state["rho"]
