"""Exact solver for small dense least-distance QPs.

    minimize  ||mu - u_d||^2   subject to   G mu >= g

The Hessian is a multiple of the identity, so every working-set subproblem
is an orthogonal projection onto an affine set. A primal active-set loop
walks between such projections until the multipliers are nonnegative.

Multipliers follow the ``mu = u_d + G^T lam`` convention, i.e. they are the
duals of ``0.5 * ||mu - u_d||^2``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

PIVOT_TOL = 1e-12


class QpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


class QpDegeneracyError(RuntimeError):
    """Raised when the active-set loop exceeds its iteration cap."""


@dataclass(frozen=True, eq=False)
class QpProblem:
    u_d: np.ndarray
    G: np.ndarray = field(default=None)
    g: np.ndarray = field(default=None)

    def __post_init__(self):
        u_d = np.atleast_1d(np.asarray(self.u_d, dtype=float))
        n = u_d.shape[0]
        G = np.zeros((0, n)) if self.G is None else np.asarray(self.G, dtype=float)
        g = np.zeros(0) if self.g is None else np.atleast_1d(np.asarray(self.g, dtype=float))
        G = G.reshape(-1, n)
        if n < 1 or u_d.ndim != 1:
            raise ValueError("u_d must be a nonempty vector")
        if G.shape[0] != g.shape[0]:
            raise ValueError(f"G has {G.shape[0]} rows but g has {g.shape[0]} entries")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(g)) and np.all(np.isfinite(u_d))):
            raise ValueError("QP data must be finite")
        object.__setattr__(self, "u_d", u_d)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)

    @property
    def n(self) -> int:
        return self.u_d.shape[0]

    @property
    def k(self) -> int:
        return self.G.shape[0]


@dataclass(frozen=True, eq=False)
class QpSolution:
    mu: np.ndarray
    duals: np.ndarray
    active_set: tuple
    kkt_residual: float
    status: QpStatus
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def kkt_residual(p: QpProblem, s: QpSolution | None = None, *, mu=None, duals=None) -> float:
    """Max-norm of the stationarity, feasibility, sign and complementarity violations."""
    if s is not None:
        mu, duals = s.mu, s.duals
    mu = np.asarray(mu, dtype=float)
    lam = np.zeros(p.k) if duals is None else np.asarray(duals, dtype=float)
    if mu.shape != (p.n,) or lam.shape != (p.k,):
        raise ValueError("dimension mismatch between problem and solution")
    stat = (mu - p.u_d) - p.G.T @ lam
    slack = p.G @ mu - p.g
    terms = [np.max(np.abs(stat))]
    if p.k:
        terms.append(np.max(np.maximum(0.0, -slack)))
        terms.append(np.max(np.maximum(0.0, -lam)))
        terms.append(np.max(np.abs(lam * slack)))
    return float(max(terms))


def _project(u_d, Gw, gw):
    """Projection of u_d onto {x : Gw x = gw}; returns (x, multipliers)."""
    if Gw.shape[0] == 0:
        return u_d.copy(), np.zeros(0)
    Q, R = np.linalg.qr(Gw.T)
    rhs = gw - Gw @ u_d
    y = linalg.solve_triangular(R, rhs, trans="T")
    nu = linalg.solve_triangular(R, y)
    return u_d + Gw.T @ nu, nu


def _independent(Gw, row) -> bool:
    if Gw.shape[0] == 0:
        return np.linalg.norm(row) > PIVOT_TOL
    M = np.vstack([Gw, row]).T
    R = linalg.qr(M, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(R))
    return d[-1] > PIVOT_TOL * max(1.0, d[0])


def _phase_one(p: QpProblem):
    """Maximize the smallest constraint slack (capped at 1) with an LP."""
    n, k = p.n, p.k
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-p.G, np.ones((k, 1))])
    bounds = [(None, None)] * n + [(None, 1.0)]
    res = optimize.linprog(c, A_ub=A_ub, b_ub=-p.g, bounds=bounds, method="highs")
    if res.status != 0:
        raise QpDegeneracyError(f"phase-1 LP failed: {res.message}")
    return res.x[:n], float(res.x[-1])


def solve_least_distance(p: QpProblem, tol: float = 1e-10, *, x0=None,
                         max_iter: int | None = None) -> QpSolution:
    """Solve ``min ||mu - u_d||^2 s.t. G mu >= g`` exactly.

    ``x0`` is an optional feasible starting point; when it is missing or not
    feasible, a phase-1 LP supplies one (and decides infeasibility).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n, k = p.n, p.k
    G, g, u_d = p.G, p.g, p.u_d
    scale = 1.0 + float(np.max(np.abs(g), initial=0.0)) + float(np.max(np.abs(u_d)))
    feas_tol = tol * scale

    if k == 0 or np.all(G @ u_d >= g - feas_tol):
        sol = QpSolution(u_d.copy(), np.zeros(k), (), 0.0, QpStatus.OPTIMAL)
        return _finish(p, sol, feas_tol)

    x = None
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if np.all(G @ x0 >= g - feas_tol):
            x = x0.copy()
    if x is None:
        x, t = _phase_one(p)
        if t < -feas_tol:
            return QpSolution(x, np.zeros(k), (), float("inf"), QpStatus.INFEASIBLE)

    cap = 10 * (k + n) if max_iter is None else max_iter
    W: list[int] = []
    for it in range(1, cap + 1):
        Gw = G[W]
        x_star, nu = _project(u_d, Gw, g[W])
        step = x_star - x
        if np.max(np.abs(step)) <= tol * scale:
            x = x_star
            if nu.size == 0 or np.min(nu) >= -tol * scale:
                duals = np.zeros(k)
                duals[W] = np.maximum(nu, 0.0)
                sol = QpSolution(x, duals, (), 0.0, QpStatus.OPTIMAL, it)
                return _finish(p, sol, feas_tol)
            # most negative multiplier leaves; lowest index on ties
            worst = min(range(len(W)), key=lambda i: (nu[i], W[i]))
            W.pop(worst)
            continue

        alpha, blocking = 1.0, None
        Gs = G @ step
        slack = np.maximum(G @ x - g, 0.0)
        for j in range(k):
            if j in W or Gs[j] >= -PIVOT_TOL * np.linalg.norm(step):
                continue
            ratio = slack[j] / -Gs[j]
            if ratio < alpha:
                alpha, blocking = ratio, j
        if blocking is None:
            x = x_star
        else:
            x = x + alpha * step
            if _independent(Gw, G[blocking]):
                W.append(blocking)
                W.sort()
    raise QpDegeneracyError(f"active-set iteration cap {cap} exceeded (n={n}, k={k})")


def _finish(p: QpProblem, sol: QpSolution, feas_tol: float) -> QpSolution:
    res = kkt_residual(p, sol)
    tight = np.flatnonzero(np.abs(p.G @ sol.mu - p.g) <= feas_tol)
    return QpSolution(sol.mu, sol.duals, tuple(int(j) for j in tight), res, sol.status,
                      sol.iterations)
