"""Ready-to-run experiments: a planar demo, a 4-DoF arm and five flying robots.

Obstacle layouts, start and goal values and integration settings chosen
here are listed in each scenario's ``notes``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .circulation import MANIPULATOR_OMEGA, CirculationSpec, Parity, default_pairing, omega_from_pairing
from .controller import (ConfigError, ControllerConfig, Mode, PowerPotential, QuadraticPotential,
                         Schedule, box_polytope, check_scenario)
from .field import (BoxClearance, CylinderClearance, DistanceField, LinearBound, LinkDiskClearance,
                    SphereClearance)
from .sim import SimParams

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    field: DistanceField
    controller: ControllerConfig
    initial_states: tuple
    sim: SimParams
    plot_region: tuple | None = None
    notes: tuple = field(default_factory=tuple)
    sample_box: tuple | None = None  # per-coordinate (lo, hi) for audits

    @property
    def n(self) -> int:
        return self.controller.n

    def with_mode(self, mode) -> "Scenario":
        return replace(self, controller=self.controller.with_mode(mode))

    def checks(self) -> dict:
        return check_scenario(self.controller, self.field)

    def validate(self) -> "Scenario":
        failed = [k for k, ok in self.checks().items() if not ok]
        if failed:
            raise ConfigError(failed)
        return self

    def to_config(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "field": self.field.to_dict(),
            "controller": self.controller.to_dict(),
            "sim": self.sim.to_dict(),
            "initial_states": [list(map(float, s)) for s in self.initial_states],
            "plot_region": None if self.plot_region is None else list(self.plot_region),
            "notes": list(self.notes),
            "sample_box": None if self.sample_box is None else [list(b) for b in self.sample_box],
        }

    @classmethod
    def from_config(cls, cfg: dict, validate: bool = True) -> "Scenario":
        if cfg.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"schema: expected {SCHEMA_VERSION}, got {cfg.get('schema')!r}")
        for key in ("field", "controller", "sim", "initial_states"):
            if key not in cfg:
                raise ValueError(f"{key}: missing section")
        sc = cls(
            name=cfg.get("name", "custom"),
            field=DistanceField.from_dict(cfg["field"]),
            controller=ControllerConfig.from_dict(cfg["controller"], validate=validate),
            initial_states=tuple(tuple(float(v) for v in s) for s in cfg["initial_states"]),
            sim=SimParams.from_dict(cfg["sim"]),
            plot_region=None if cfg.get("plot_region") is None else tuple(cfg["plot_region"]),
            notes=tuple(cfg.get("notes", ())),
            sample_box=None if cfg.get("sample_box") is None
            else tuple(tuple(float(v) for v in b) for b in cfg["sample_box"]),
        )
        for i, s in enumerate(sc.initial_states):
            if len(s) != sc.n:
                raise ValueError(f"initial_states.{i}: expected {sc.n} entries, got {len(s)}")
        if sc.sample_box is not None and len(sc.sample_box) != sc.n:
            raise ValueError(f"sample_box: expected {sc.n} ranges, got {len(sc.sample_box)}")
        return sc.validate() if validate else sc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_config(), indent=2))

    @classmethod
    def load(cls, path, validate: bool = True) -> "Scenario":
        return cls.from_config(json.loads(Path(path).read_text()), validate)


OMEGA_1 = np.array([[0.0, -1.0], [1.0, 0.0]])

# Shared schedule for the planar demo and the arm.
ARM_SCHEDULE = Schedule(alpha_gain=0.5, beta_intercept=0.6, beta_slope=2.25)


def planar_demo(mode=Mode.CCBF) -> Scenario:
    """Point robot in the plane, rounded rectangle obstacle, goal (1, 0)."""
    obstacle = BoxClearance(center=(0.0, 0.0), half_extents=(0.25, 0.6), indices=(0, 1),
                            rounding=0.1)
    field_ = DistanceField((obstacle,), h=0.04, delta=0.05)
    ctrl = ControllerConfig(
        schedule=ARM_SCHEDULE,
        circulation=CirculationSpec(OMEGA_1, Parity.EVEN_FULL).check(),
        potential=QuadraticPotential(goal=(1.0, 0.0)),
        mode=mode,
    )
    return Scenario(
        name="planar",
        field=field_,
        controller=ctrl,
        initial_states=((-1.5, 0.2),),
        sim=SimParams(dt=0.01, t_max=60.0, goal_tol=1e-2),
        plot_region=(-2.0, 2.0, -1.5, 1.5),
        notes=(
            "obstacle: rounded rectangle centred at the origin, half extents 0.25 x 0.6 m, "
            "corner radius 0.1 m (reconstruction)",
            "schedule reused from the manipulator study; V = |q - q_g|^2 / 2 (reconstruction)",
        ),
    ).validate()


ARM_DISK = ((1.5, 1.3), 0.5)
JOINT_LIMITS_DEG = (360.0, 120.0, 120.0, 120.0)


def manipulator_4dof(mode=Mode.CCBF) -> Scenario:
    """Planar 4R arm (0.70 m x 0.15 m links) avoiding a disk of radius 0.5 m at (1.5, 1.3)."""
    prims = [LinkDiskClearance(k, ARM_DISK[0], ARM_DISK[1]) for k in range(1, 5)]
    for i, lim in enumerate(JOINT_LIMITS_DEG):
        lim = math.radians(lim)
        prims.append(LinearBound(i, -lim, upper=False, scale=0.02, degrees=True))
        prims.append(LinearBound(i, lim, upper=True, scale=0.02, degrees=True))
    field_ = DistanceField(tuple(prims), h=0.04, delta=0.15)
    A, b = box_polytope(4, 1.0)
    goal = (math.pi / 2, 0.0, 0.0, 0.0)
    ctrl = ControllerConfig(
        schedule=ARM_SCHEDULE,
        circulation=CirculationSpec(MANIPULATOR_OMEGA, Parity.EVEN_FULL).check(),
        potential=PowerPotential(goal=goal, coeff=0.4, power=1.5),
        mode=mode,
        A=A,
        b=b,
    )
    return Scenario(
        name="manipulator4",
        field=field_,
        controller=ctrl,
        initial_states=((0.0, 0.0, 0.0, 0.0),),
        sim=SimParams(dt=0.01, t_max=120.0, goal_tol=1e-2),
        plot_region=None,
        notes=(
            "start: all joints 0 (horizontal); goal: (90 deg, 0, 0, 0) (reconstruction)",
        ),
        sample_box=tuple((-math.radians(v), math.radians(v)) for v in JOINT_LIMITS_DEG),
    ).validate()


ROBOT_RADIUS = 0.25
WORKSPACE = ((-3.0, 3.0), (-3.0, 3.0), (0.0, 3.0))

# Physical sizes of the ten obstacle primitives: three trees (trunk cylinder
# plus crown sphere) and a straight wall made of four boxes along x = 0.
# multirobot_prims inflates every primitive by the robot radius.
TREES = ((-1.5, -2.0), (1.5, 2.0), (-1.2, 1.6))
OBSTACLES = tuple(
    item for x, y in TREES for item in (
        ("cylinder", {"center": (x, y), "radius": 0.15}),
        ("sphere", {"center": (x, y, 2.0), "radius": 0.5}),
    )
) + tuple(("box", {"center": (0.0, y, 1.3), "half_extents": (0.1, 0.4, 1.3)})
          for y in (-1.2, -0.4, 0.4, 1.2))

# Robots 1 and 3 cross the wall head-on from opposite sides, 2 and 4 change
# altitude in two corners, 5 threads between two trees.
ROBOT_STARTS = (
    (-2.2, 0.5, 1.0),
    (-2.4, 2.4, 0.6),
    (2.2, -0.5, 1.5),
    (2.5, -2.5, 2.4),
    (0.9, 2.6, 1.0),
)
ROBOT_GOALS = (
    (2.2, 0.5, 1.0),
    (-2.4, 2.4, 2.4),
    (-2.2, -0.5, 1.5),
    (2.5, -2.5, 0.6),
    (-0.9, 2.6, 1.0),
)


def _robot(i):
    return (3 * i, 3 * i + 1, 3 * i + 2)


def multirobot_prims(n_robots=5, obstacles=OBSTACLES, workspace=WORKSPACE,
                     robot_radius=ROBOT_RADIUS, pair_radius=2 * ROBOT_RADIUS):
    prims = []
    for r in range(n_robots):
        idx = _robot(r)
        for kind, par in obstacles:
            if kind == "sphere":
                prims.append(SphereClearance(par["center"], par["radius"] + robot_radius, idx))
            elif kind == "cylinder":
                prims.append(CylinderClearance(par["radius"] + robot_radius, idx[:2],
                                               center=par["center"]))
            elif kind == "box":
                half = tuple(h + robot_radius for h in par["half_extents"])
                prims.append(BoxClearance(par["center"], half, idx))
            else:
                raise ValueError(kind)
    for a in range(n_robots):
        for b in range(a + 1, n_robots):
            prims.append(CylinderClearance(pair_radius, _robot(a)[:2], partner=_robot(b)[:2]))
    for r in range(n_robots):
        for axis, (lo, hi) in enumerate(workspace):
            k = _robot(r)[axis]
            prims.append(LinearBound(k, lo, upper=False))
            prims.append(LinearBound(k, hi, upper=True))
    return tuple(prims)


def multirobot_15(mode=Mode.CCBF) -> Scenario:
    """Five robots in a 6 m x 6 m x 3 m box, 90 clearance functions, n = 15."""
    field_ = DistanceField(multirobot_prims(), h=0.01, delta=0.13)
    goal = tuple(v for g in ROBOT_GOALS for v in g)
    ctrl = ControllerConfig(
        schedule=Schedule(alpha_gain=0.5, beta_intercept=0.9, beta_slope=6.0),
        circulation=omega_from_pairing(15, default_pairing(15)),
        potential=QuadraticPotential(goal=goal),
        mode=mode,
    )
    start = tuple(v for s in ROBOT_STARTS for v in s)
    return Scenario(
        name="multirobot15",
        field=field_,
        controller=ctrl,
        initial_states=(start,),
        sim=SimParams(dt=0.01, t_max=80.0, goal_tol=0.05),
        plot_region=None,
        notes=(
            "obstacle layout, robot starts and setpoints are a reconstruction",
            "obstacles are inflated by the 0.25 m robot radius",
            "inter-robot clearance: planar centre distance minus 0.5 m",
            "workspace limits: unit-scale linear bounds in metres",
        ),
        sample_box=tuple(WORKSPACE) * 5,
    ).validate()


BUILTIN = {
    "planar": planar_demo,
    "manipulator4": manipulator_4dof,
    "multirobot15": multirobot_15,
}


def builtin(name: str, mode=Mode.CCBF) -> Scenario:
    try:
        return BUILTIN[name](mode)
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(BUILTIN)}") from None
