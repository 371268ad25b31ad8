"""Closed-loop integration of q' = u(q) and vector-field grids."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import (ControllerConfig, DeadTangent, Equilibrium, classify_equilibrium,
                         control)
from .field import DistanceField, OffManifold
from .qp import QpDegeneracyError


class Status(enum.Enum):
    REACHED_GOAL = "reached_goal"
    STUCK = "stuck"
    TIMEOUT = "timeout"
    ERROR = "error"


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.01
    t_max: float = 60.0
    goal_tol: float = 1e-2
    stuck_speed: float = 1e-3
    stuck_window: float = 2.0
    integrator: str = "rk4"

    def __post_init__(self):
        if not self.dt > 0 or not self.t_max > self.dt:
            raise ValueError("need dt > 0 and t_max > dt")
        if min(self.goal_tol, self.stuck_speed, self.stuck_window) <= 0:
            raise ValueError("tolerances must be positive")
        if self.integrator not in ("euler", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class Trace:
    n: int
    t: list = field(default_factory=list)
    q: list = field(default_factory=list)
    u: list = field(default_factory=list)
    D: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    active: list = field(default_factory=list)
    fallback: list = field(default_factory=list)
    status: Status | None = None
    error: str | None = None
    error_q: np.ndarray | None = None
    error_t: float | None = None

    def append(self, t, q, out):
        self.t.append(t)
        self.q.append(np.array(q))
        self.u.append(np.array(out.u))
        self.D.append(out.d_value)
        self.beta.append(out.beta_value)
        self.active.append(out.active_flags)
        self.fallback.append(out.used_fallback)

    def __len__(self):
        return len(self.t)

    @property
    def min_D(self) -> float:
        return float(min(self.D)) if self.D else math.nan

    @property
    def final_q(self) -> np.ndarray:
        return self.q[-1]

    @property
    def fallback_count(self) -> int:
        return int(sum(self.fallback))

    def arrays(self):
        return (np.array(self.t), np.array(self.q).reshape(-1, self.n),
                np.array(self.u).reshape(-1, self.n), np.array(self.D), np.array(self.beta),
                np.array(self.fallback, dtype=bool))


def _velocity(cfg, field_, q):
    return control(cfg, field_, q).u


def run(cfg: ControllerConfig, field_: DistanceField, q0, p: SimParams) -> Trace:
    """Integrate from q0 until the goal is reached, motion stalls, or t_max."""
    q = np.array(q0, dtype=float)
    goal = cfg.goal
    trace = Trace(q.size)
    window = max(1, int(round(p.stuck_window / p.dt)))
    speeds = []
    k = 0
    while True:
        t = k * p.dt
        try:
            out = control(cfg, field_, q)
        except (OffManifold, DeadTangent, QpDegeneracyError) as exc:
            trace.status, trace.error = Status.ERROR, f"{type(exc).__name__}: {exc}"
            trace.error_q, trace.error_t = q.copy(), t
            return trace
        trace.append(t, q, out)
        speeds.append(float(np.linalg.norm(out.u)))
        if np.linalg.norm(q - goal) <= p.goal_tol:
            trace.status = Status.REACHED_GOAL
            return trace
        if len(speeds) > window and np.mean(speeds[-window:]) < p.stuck_speed:
            trace.status = Status.STUCK
            return trace
        if t + p.dt > p.t_max + 1e-12:
            trace.status = Status.TIMEOUT
            return trace
        try:
            q = _step(cfg, field_, q, out.u, p)
        except (OffManifold, DeadTangent, QpDegeneracyError) as exc:
            trace.status, trace.error = Status.ERROR, f"{type(exc).__name__}: {exc}"
            trace.error_q, trace.error_t = q.copy(), t
            return trace
        k += 1


def _step(cfg, field_, q, k1, p):
    dt = p.dt
    if p.integrator == "euler":
        return q + dt * k1
    k2 = _velocity(cfg, field_, q + 0.5 * dt * k1)
    k3 = _velocity(cfg, field_, q + 0.5 * dt * k2)
    k4 = _velocity(cfg, field_, q + dt * k3)
    return q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class EquilibriumPoint:
    q: np.ndarray
    u_norm: float
    attractive: bool
    eigenvalues: np.ndarray
    classification: Equilibrium | None = None


@dataclass
class FieldGrid:
    xs: np.ndarray
    ys: np.ndarray
    axes: tuple
    q: np.ndarray  # (ny, nx, n)
    u: np.ndarray  # (ny, nx, n)
    D: np.ndarray  # (ny, nx)
    valid: np.ndarray
    is_equilibrium: np.ndarray
    equilibria: list

    @property
    def shape(self):
        return self.valid.shape


def _safe_u(cfg, field_, q):
    try:
        if field_.in_obstacle(q):
            return None
        return control(cfg, field_, q).u
    except (OffManifold, DeadTangent):
        return None


def jacobian(cfg, field_, q, step=1e-6):
    q = np.asarray(q, float)
    J = np.empty((q.size, q.size))
    for i in range(q.size):
        e = np.zeros(q.size)
        e[i] = step
        J[:, i] = (control(cfg, field_, q + e).u - control(cfg, field_, q - e).u) / (2 * step)
    return J


def _newton_root(cfg, field_, q, lo, hi, tol=1e-12, max_iter=60):
    """Damped Newton for u(q) = 0 kept inside the box [lo, hi]."""
    q = np.asarray(q, float)
    u = _safe_u(cfg, field_, q)
    if u is None:
        return None
    for _ in range(max_iter):
        if np.linalg.norm(u) <= tol:
            return q
        try:
            J = jacobian(cfg, field_, q)
            dq = np.linalg.lstsq(J, -u, rcond=None)[0]
        except (OffManifold, DeadTangent, np.linalg.LinAlgError):
            return None
        step = 1.0
        while step > 1e-6:
            cand = np.clip(q + step * dq, lo, hi)
            uc = _safe_u(cfg, field_, cand)
            if uc is not None and np.linalg.norm(uc) < np.linalg.norm(u):
                q, u = cand, uc
                break
            step *= 0.5
        else:
            break
    return q if np.linalg.norm(u) <= 1e-9 else None


def field_grid(cfg: ControllerConfig, field_: DistanceField, box, resolution,
               eps: float = 1e-6, axes=(0, 1), base=None, locate: bool | None = None) -> FieldGrid:
    """Evaluate the controller on a grid over two coordinate axes.

    ``box`` is (xmin, xmax, ymin, ymax); other coordinates are taken from
    ``base`` (default: the goal). Nodes inside the obstacle or off the
    manifold are invalid. Equilibria are nodes with |u| <= eps plus zeros
    located by Newton refinement in cells where both velocity components
    change sign (planar problems only). An equilibrium is flagged on the
    grid, at its nearest node, only when it is attractive (all Jacobian
    eigenvalues in the open left half plane).
    """
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    n = cfg.n
    ax, ay = axes
    if not (0 <= ax < n and 0 <= ay < n) or ax == ay:
        raise ValueError(f"axes {axes} invalid for dimension {n}")
    base = cfg.goal.copy() if base is None else np.asarray(base, float)
    xs = np.linspace(box[0], box[1], nx) if nx > 0 else np.zeros(0)
    ys = np.linspace(box[2], box[3], ny) if ny > 0 else np.zeros(0)
    Q = np.tile(base, (ny, nx, 1))
    if nx and ny:
        Q[:, :, ax] = xs[None, :]
        Q[:, :, ay] = ys[:, None]
    U = np.full((ny, nx, n), np.nan)
    Dg = np.full((ny, nx), np.nan)
    valid = np.zeros((ny, nx), dtype=bool)
    for iy in range(ny):
        for ix in range(nx):
            q = Q[iy, ix]
            try:
                Dg[iy, ix] = field_.value(q)
                if field_.in_obstacle(q):
                    continue
                U[iy, ix] = control(cfg, field_, q).u
                valid[iy, ix] = True
            except (OffManifold, DeadTangent):
                continue

    candidates = []
    for iy in range(ny):
        for ix in range(nx):
            if valid[iy, ix] and np.linalg.norm(U[iy, ix]) <= eps:
                candidates.append(Q[iy, ix].copy())
    if locate is None:
        locate = n == 2
    if locate and nx > 1 and ny > 1:
        for iy in range(ny - 1):
            for ix in range(nx - 1):
                block = valid[iy:iy + 2, ix:ix + 2]
                if not block.all():
                    continue
                uc = U[iy:iy + 2, ix:ix + 2][..., [ax, ay]].reshape(4, 2)
                if np.all(uc.min(axis=0) <= 0) and np.all(uc.max(axis=0) >= 0):
                    lo, hi = Q[iy, ix].copy(), Q[iy + 1, ix + 1].copy()
                    root = _newton_root(cfg, field_, 0.5 * (lo + hi), lo, hi)
                    if root is not None:
                        candidates.append(root)

    equilibria = []
    for q in candidates:
        if any(np.linalg.norm(q - e.q) < 1e-7 for e in equilibria):
            continue
        out = control(cfg, field_, q)
        eig = np.linalg.eigvals(jacobian(cfg, field_, q))
        try:
            cls = classify_equilibrium(cfg, field_, q)
        except (OffManifold, DeadTangent):
            cls = None
        equilibria.append(EquilibriumPoint(q, float(np.linalg.norm(out.u)),
                                           bool(np.all(eig.real < 0)), eig, cls))

    flags = np.zeros((ny, nx), dtype=bool)
    for e in equilibria:
        if e.attractive:
            # flag the grid node closest to the equilibrium
            jx = int(np.argmin(np.abs(xs - e.q[ax])))
            jy = int(np.argmin(np.abs(ys - e.q[ay])))
            flags[jy, jx] = valid[jy, jx]
    return FieldGrid(xs, ys, tuple(axes), Q, U, Dg, valid, flags, equilibria)


def with_dt(p: SimParams, dt: float) -> SimParams:
    return replace(p, dt=dt)
