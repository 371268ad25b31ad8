"""CBF-QP and circulation-augmented CBF-QP safety filters for q' = u."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .circulation import CirculationSpec
from .field import DistanceField, normal_from_gradient
from .qp import QpProblem, QpSolution, solve_least_distance

DEAD_TANGENT_TOL = 1e-9


class Mode(enum.Enum):
    CBF_ONLY = "cbf"
    CCBF = "ccbf"


class Equilibrium(enum.Enum):
    GOAL = "goal"
    CIRCULATION_SADDLE = "circulation_saddle"
    NOT_EQUILIBRIUM = "not_equilibrium"


class ConfigError(ValueError):
    """Controller configuration violates a named assumption."""

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("failed checks: " + ", ".join(self.failed))


class DeadTangent(RuntimeError):
    """The circulation constraint is active but T = Omega N vanishes."""

    def __init__(self, q, beta, t_norm):
        self.q = np.array(q, dtype=float)
        self.beta = float(beta)
        self.t_norm = float(t_norm)
        super().__init__(f"|T| = {t_norm:.3e} with beta = {beta:.4f} at q = {self.q.tolist()}")


@dataclass(frozen=True)
class Schedule:
    """alpha(D) = -alpha_gain D and beta(D) = beta_intercept - beta_slope D."""

    alpha_gain: float
    beta_intercept: float
    beta_slope: float

    def alpha(self, D: float) -> float:
        return -self.alpha_gain * D

    def beta(self, D: float) -> float:
        return self.beta_intercept - self.beta_slope * D


@dataclass(frozen=True)
class QuadraticPotential:
    """V = weight/2 |q - goal|^2."""

    goal: tuple
    weight: float = 1.0
    kind = "quadratic"

    def value(self, q) -> float:
        e = np.asarray(q, float) - np.asarray(self.goal, float)
        return 0.5 * self.weight * float(e @ e)

    def gradient(self, q) -> np.ndarray:
        return self.weight * (np.asarray(q, float) - np.asarray(self.goal, float))

    def to_dict(self):
        return {"kind": self.kind, "goal": list(self.goal), "weight": self.weight}


@dataclass(frozen=True)
class PowerPotential:
    """V = sum_i coeff |q_i - goal_i|^power."""

    goal: tuple
    coeff: float = 0.4
    power: float = 1.5
    kind = "power"

    def value(self, q) -> float:
        e = np.asarray(q, float) - np.asarray(self.goal, float)
        return float(self.coeff * np.sum(np.abs(e) ** self.power))

    def gradient(self, q) -> np.ndarray:
        e = np.asarray(q, float) - np.asarray(self.goal, float)
        return self.coeff * self.power * np.abs(e) ** (self.power - 1.0) * np.sign(e)

    def to_dict(self):
        return {"kind": self.kind, "goal": list(self.goal), "coeff": self.coeff,
                "power": self.power}


def potential_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    d["goal"] = tuple(d["goal"])
    return {"quadratic": QuadraticPotential, "power": PowerPotential}[kind](**d)


def box_polytope(n: int, limit: float):
    """|u_i| <= limit written as A u >= b."""
    A = np.vstack([np.eye(n), -np.eye(n)])
    return A, -limit * np.ones(2 * n)


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    schedule: Schedule
    circulation: CirculationSpec
    potential: object
    mode: Mode = Mode.CCBF
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    fallback_gain: float | None = None
    qp_tol: float = 1e-10
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if (self.A is None) != (self.b is None):
            raise ValueError("A and b must be given together")
        if self.A is not None:
            A = np.atleast_2d(np.asarray(self.A, float))
            b = np.atleast_1d(np.asarray(self.b, float))
            if A.shape != (b.size, self.n):
                raise ValueError(f"polytope shape {A.shape} does not match n={self.n}")
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "b", b)
        if self.fallback_gain is None:
            object.__setattr__(self, "fallback_gain", self.default_fallback_gain())
        if self.validate:
            failed = [name for name, ok in check_config(self).items() if not ok]
            if failed:
                raise ConfigError(failed)

    @property
    def n(self) -> int:
        return self.circulation.n

    @property
    def goal(self) -> np.ndarray:
        return np.asarray(self.potential.goal, float)

    @property
    def inner_radius(self) -> float:
        """Radius of the largest origin-centred ball inside {A u >= b}."""
        if self.A is None or self.A.shape[0] == 0:
            return math.inf
        norms = np.linalg.norm(self.A, axis=1)
        return float(np.min(-self.b / norms))

    def default_fallback_gain(self) -> float:
        """Midpoint of (beta(0), min(r, beta(0) + 1))."""
        a = self.schedule.beta_intercept
        return 0.5 * (a + min(self.inner_radius, a + 1.0))

    def with_mode(self, mode) -> "ControllerConfig":
        from dataclasses import replace
        return replace(self, mode=Mode(mode))

    def to_dict(self) -> dict:
        s = self.schedule
        return {
            "mode": self.mode.value,
            "schedule": {"alpha_gain": s.alpha_gain, "beta_intercept": s.beta_intercept,
                         "beta_slope": s.beta_slope},
            "circulation": self.circulation.to_dict(),
            "potential": self.potential.to_dict(),
            "polytope": None if self.A is None else {"A": self.A.tolist(), "b": self.b.tolist()},
            # a defaulted gain is left out so that it follows schedule edits
            "fallback_gain": (None if self.fallback_gain == self.default_fallback_gain()
                              else self.fallback_gain),
            "qp_tol": self.qp_tol,
        }

    @classmethod
    def from_dict(cls, d: dict, validate: bool = True) -> "ControllerConfig":
        poly = d.get("polytope")
        return cls(
            schedule=Schedule(**d["schedule"]),
            circulation=CirculationSpec.from_dict(d["circulation"]),
            potential=potential_from_dict(d["potential"]),
            mode=Mode(d.get("mode", "ccbf")),
            A=None if poly is None else np.asarray(poly["A"], float),
            b=None if poly is None else np.asarray(poly["b"], float),
            fallback_gain=d.get("fallback_gain"),
            qp_tol=d.get("qp_tol", 1e-10),
            validate=validate,
        )


def check_config(cfg: ControllerConfig) -> dict:
    """Named assumption checks that need no distance field."""
    s = cfg.schedule
    r = cfg.inner_radius
    K = cfg.fallback_gain
    checks = {
        "alpha_negative": s.alpha_gain > 0,
        "beta0_positive": s.beta_intercept > 0,
        "beta_decreasing": s.beta_slope > 0,
        "beta0_lt_r": s.beta_intercept < r,
        "polytope_contains_ball": cfg.A is None or bool(np.all(cfg.b < 0)),
        "fallback_gain_interval": s.beta_intercept < K < r,
        "omega_valid": not cfg.circulation.violations(),
        "goal_dimension": cfg.goal.shape == (cfg.n,),
    }
    return checks


def check_scenario(cfg: ControllerConfig, field_: DistanceField) -> dict:
    """Config checks plus the ones involving D: goal placement and the margin rule."""
    checks = check_config(cfg)
    try:
        D_goal, grad = field_.evaluate(cfg.goal)
        normal_from_gradient(grad, cfg.goal)
        checks["beta_goal_negative"] = cfg.schedule.beta(D_goal) < 0
        checks["goal_on_manifold"] = True
    except Exception:
        checks["beta_goal_negative"] = False
        checks["goal_on_manifold"] = False
    checks["margin_rule"] = field_.margin_ok()
    return checks


@dataclass(frozen=True, eq=False)
class ControlOutput:
    u: np.ndarray
    solution: QpSolution | None
    used_fallback: bool
    d_value: float
    beta_value: float
    alpha_value: float
    n_vec: np.ndarray
    t_vec: np.ndarray
    u_d: np.ndarray

    @property
    def active_flags(self) -> tuple:
        k = 0 if self.solution is None else self.solution.duals.size
        act = set() if self.solution is None else set(self.solution.active_set)
        return tuple(j in act for j in range(k))


def _geometry(cfg, field_, q):
    q = np.asarray(q, dtype=float)
    D, grad = field_.evaluate(q)
    N = normal_from_gradient(grad, q)
    T = cfg.circulation.tangent(N)
    return q, D, N, T


def _interior_point(cfg, T):
    """Strictly feasible interior point K T / |T|^2 (equal to K T when |T| = 1)."""
    t2 = float(T @ T)
    return cfg.fallback_gain * T / t2


def control(cfg: ControllerConfig, field_: DistanceField, q) -> ControlOutput:
    q, D, N, T = _geometry(cfg, field_, q)
    u_d = -cfg.potential.gradient(q)
    alpha = cfg.schedule.alpha(D)
    beta = cfg.schedule.beta(D)
    t_norm = float(np.linalg.norm(T))

    rows, rhs = [N], [alpha]
    if cfg.mode is Mode.CCBF:
        if beta > 0 and t_norm < DEAD_TANGENT_TOL:
            raise DeadTangent(q, beta, t_norm)
        rows.append(T)
        rhs.append(beta)
    G = np.vstack(rows)
    g = np.array(rhs)
    if cfg.A is not None:
        G = np.vstack([G, cfg.A])
        g = np.concatenate([g, cfg.b])

    hint = _interior_point(cfg, T) if t_norm >= DEAD_TANGENT_TOL else np.zeros(q.size)
    sol = solve_least_distance(QpProblem(u_d, G, g), cfg.qp_tol, x0=hint)
    if sol.optimal:
        u, used = sol.mu, False
    else:
        u, used = fallback_control(cfg, field_, q), True
    return ControlOutput(u, sol, used, D, beta, alpha, N, T, u_d)


def fallback_control(cfg: ControllerConfig, field_: DistanceField, q) -> np.ndarray:
    q, D, N, T = _geometry(cfg, field_, q)
    t_norm = float(np.linalg.norm(T))
    if t_norm < DEAD_TANGENT_TOL:
        raise DeadTangent(q, cfg.schedule.beta(D), t_norm)
    return _interior_point(cfg, T)


def classify_equilibrium(cfg: ControllerConfig, field_: DistanceField, q,
                         eps: float = 1e-4) -> Equilibrium:
    q, D, N, T = _geometry(cfg, field_, q)
    if np.linalg.norm(q - cfg.goal) <= eps:
        return Equilibrium.GOAL
    u_d = -cfg.potential.gradient(q)
    t2 = float(T @ T)
    if abs(cfg.schedule.beta(D)) <= eps and t2 > 0:
        lam_t = -float(u_d @ T) / t2
        if lam_t > eps and np.linalg.norm(u_d + lam_t * T) <= eps:
            return Equilibrium.CIRCULATION_SADDLE
    return Equilibrium.NOT_EQUILIBRIUM


def continuity_probe(cfg: ControllerConfig, field_: DistanceField, q, radius: float,
                     samples: int = 64, seed=0) -> float:
    """Largest difference quotient |u(a) - u(b)| / |a - b| over random pairs in a ball."""
    rng = np.random.default_rng(seed)
    q = np.asarray(q, dtype=float)
    dirs = rng.normal(size=(samples, q.size))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.random(samples) ** (1.0 / q.size)
    pts = q + dirs * radii[:, None]
    us = np.array([control(cfg, field_, p).u for p in pts])
    best = 0.0
    for i in range(samples):
        dq = np.linalg.norm(pts[i + 1:] - pts[i], axis=1)
        du = np.linalg.norm(us[i + 1:] - us[i], axis=1)
        ok = dq > 0
        if np.any(ok):
            best = max(best, float(np.max(du[ok] / dq[ok])))
    return best
