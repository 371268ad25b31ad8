"""Closeness function D(q) = softmin_h F_i(q) - delta and its gradient.

Each constraint primitive returns its clearance F_i (positive in free space)
and the analytic gradient with respect to the full configuration vector.
Primitives read a subset of coordinates through ``indices`` (0-based).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import ClassVar

import numpy as np

EPS_MANIFOLD = 1e-9


class OffManifold(ValueError):
    """Raised when the normal N = grad D / |grad D| is undefined."""

    def __init__(self, q, grad_norm):
        self.q = np.array(q, dtype=float)
        self.grad_norm = float(grad_norm)
        super().__init__(f"|grad D| = {grad_norm:.3e} at q = {self.q.tolist()}")


def softmin(values, h: float) -> float:
    """-h ln(mean(exp(-g/h))), evaluated after shifting by min(g)."""
    g = np.asarray(values, dtype=float).ravel()
    if g.size == 0:
        raise ValueError("softmin of an empty sequence")
    if h <= 0:
        raise ValueError("h must be positive")
    g_min = g.min()
    return float(g_min - h * np.log(np.mean(np.exp(-(g - g_min) / h))))


def softmin_weights(values, h: float) -> np.ndarray:
    g = np.asarray(values, dtype=float).ravel()
    if g.size == 0:
        raise ValueError("softmin of an empty sequence")
    if h <= 0:
        raise ValueError("h must be positive")
    e = np.exp(-(g - g.min()) / h)
    return e / e.sum()


def _idx(indices):
    return np.asarray(indices, dtype=int)


@dataclass(frozen=True)
class SphereClearance:
    """|p - c| - radius, p = q[indices]."""

    center: tuple
    radius: float
    indices: tuple
    kind: ClassVar[str] = "sphere"

    def value_grad(self, q):
        i = _idx(self.indices)
        d = q[i] - np.asarray(self.center, float)
        r = math.sqrt(float(d @ d))
        grad = np.zeros(len(q))
        if r > 0:
            grad[i] = d / r
        return r - self.radius, grad

    @staticmethod
    def batch(prims, q):
        idx = np.array([p.indices for p in prims])
        c = np.array([p.center for p in prims], float)
        d = q[idx] - c
        r = np.linalg.norm(d, axis=1)
        grads = np.zeros((len(prims), len(q)))
        safe = np.where(r > 0, r, 1.0)[:, None]
        np.put_along_axis(grads, idx, np.where(r[:, None] > 0, d / safe, 0.0), axis=1)
        return r - np.array([p.radius for p in prims]), grads


@dataclass(frozen=True)
class BoxClearance:
    """Axis-aligned box, optionally with rounded edges of radius ``rounding``.

    Outside: Euclidean distance to the (rounded) box; inside: minus the
    depth to the nearest face.
    """

    center: tuple
    half_extents: tuple
    indices: tuple
    rounding: float = 0.0
    kind: ClassVar[str] = "box"

    def value_grad(self, q):
        i = _idx(self.indices)
        d = q[i] - np.asarray(self.center, float)
        core = np.asarray(self.half_extents, float) - self.rounding
        excess = np.abs(d) - core
        outside = np.maximum(excess, 0.0)
        grad = np.zeros(len(q))
        dist = math.sqrt(float(outside @ outside))
        if dist > 0:
            grad[i] = np.sign(d) * outside / dist
            return dist - self.rounding, grad
        k = int(np.argmax(excess))
        grad[i[k]] = 1.0 if d[k] >= 0 else -1.0
        return float(excess[k]) - self.rounding, grad

    @staticmethod
    def batch(prims, q):
        idx = np.array([p.indices for p in prims])
        rounding = np.array([p.rounding for p in prims], float)
        d = q[idx] - np.array([p.center for p in prims], float)
        excess = np.abs(d) - (np.array([p.half_extents for p in prims], float) - rounding[:, None])
        outside = np.maximum(excess, 0.0)
        dist = np.linalg.norm(outside, axis=1)
        out = dist > 0
        rows = np.arange(len(prims))
        k = np.argmax(excess, axis=1)
        inner = np.zeros_like(d)
        inner[rows, k] = np.where(d[rows, k] >= 0, 1.0, -1.0)
        local = np.where(out[:, None], np.sign(d) * outside / np.where(out, dist, 1.0)[:, None], inner)
        grads = np.zeros((len(prims), len(q)))
        np.put_along_axis(grads, idx, local, axis=1)
        vals = np.where(out, dist, excess[rows, k]) - rounding
        return vals, grads


@dataclass(frozen=True)
class CylinderClearance:
    """Vertical cylinder of infinite height: planar distance minus radius.

    ``indices`` selects the (x, y) coordinates of the robot. With ``partner``
    set, the axis follows another robot's (x, y) instead of ``center``.
    """

    radius: float
    indices: tuple
    center: tuple = (0.0, 0.0)
    partner: tuple | None = None
    kind: ClassVar[str] = "cylinder"

    def value_grad(self, q):
        i = _idx(self.indices)
        c = q[_idx(self.partner)] if self.partner is not None else np.asarray(self.center, float)
        d = q[i] - c
        r = math.sqrt(float(d @ d))
        grad = np.zeros(len(q))
        if r > 0:
            grad[i] += d / r
            if self.partner is not None:
                grad[_idx(self.partner)] -= d / r
        return r - self.radius, grad

    @staticmethod
    def batch(prims, q):
        idx = np.array([p.indices for p in prims])
        paired = np.array([p.partner is not None for p in prims])
        pidx = np.array([p.partner if p.partner is not None else p.indices for p in prims])
        c = np.where(paired[:, None], q[pidx], np.array([p.center for p in prims], float))
        d = q[idx] - c
        r = np.linalg.norm(d, axis=1)
        e = np.where(r[:, None] > 0, d / np.where(r > 0, r, 1.0)[:, None], 0.0)
        grads = np.zeros((len(prims), len(q)))
        rows = np.arange(len(prims))[:, None]
        grads[rows, idx] += e
        np.subtract.at(grads, (rows, pidx), np.where(paired[:, None], e, 0.0))
        return r - np.array([p.radius for p in prims]), grads


@dataclass(frozen=True)
class LinearBound:
    """scale * (q_i - bound) for a lower bound, scale * (bound - q_i) for an upper one.

    With ``degrees`` the difference is converted from radians first.
    """

    index: int
    bound: float
    upper: bool
    scale: float = 1.0
    degrees: bool = False
    kind: ClassVar[str] = "linear"

    def value_grad(self, q):
        s = self.scale * (180.0 / math.pi if self.degrees else 1.0)
        sign = -1.0 if self.upper else 1.0
        grad = np.zeros(len(q))
        grad[self.index] = sign * s
        return sign * s * (q[self.index] - self.bound), grad

    @staticmethod
    def batch(prims, q):
        idx = np.array([p.index for p in prims])
        s = np.array([p.scale * (180.0 / math.pi if p.degrees else 1.0) for p in prims])
        s = np.where([p.upper for p in prims], -s, s)
        grads = np.zeros((len(prims), len(q)))
        grads[np.arange(len(prims)), idx] = s
        return s * (q[idx] - np.array([p.bound for p in prims], float)), grads


def planar_chain(joints, link_length: float):
    """Joint origins (k+1 points) and absolute link headings of a planar chain at the origin."""
    theta = np.cumsum(np.asarray(joints, float))
    steps = link_length * np.column_stack([np.cos(theta), np.sin(theta)])
    origins = np.vstack([np.zeros(2), np.cumsum(steps, axis=0)])
    return origins, theta


def _perp(v):
    return np.array([-v[1], v[0]])


@dataclass(frozen=True)
class LinkDiskClearance:
    """Squared clearance max(0, dist(rect_k, disk center) - radius)^2 in m^2.

    Link ``link_index`` (1-based) of a planar revolute chain rooted at the
    origin is a ``link_length`` x ``link_width`` rectangle centred on its
    axis; joints live in q[joint_indices].
    """

    link_index: int
    disk_center: tuple
    disk_radius: float
    link_length: float = 0.70
    link_width: float = 0.15
    joint_indices: tuple = (0, 1, 2, 3)
    kind: ClassVar[str] = "link_disk"

    def value_grad(self, q):
        k = self.link_index
        if not 1 <= k <= len(self.joint_indices):
            raise ValueError(f"link_index {k} outside 1..{len(self.joint_indices)}")
        jidx = _idx(self.joint_indices)
        origins, theta = planar_chain(q[jidx[:k]], self.link_length)
        base, heading = origins[k - 1], theta[k - 1]
        c, s = math.cos(heading), math.sin(heading)
        R = np.array([[c, -s], [s, c]])
        center = np.asarray(self.disk_center, float)
        local = R.T @ (center - base)
        half_w = 0.5 * self.link_width
        closest_local = np.array([min(max(local[0], 0.0), self.link_length),
                                  min(max(local[1], -half_w), half_w)])
        closest = base + R @ closest_local
        e = center - closest
        dist = math.sqrt(float(e @ e))
        gap = dist - self.disk_radius
        grad = np.zeros(len(q))
        if gap <= 0.0 or dist == 0.0:
            return 0.0, grad
        # d dist / d q_j = -(e/dist) . (z x (closest - joint_j)) for joints up to k
        for j in range(k):
            grad[jidx[j]] = -2.0 * gap * float(e @ _perp(closest - origins[j])) / dist
        return gap * gap, grad


PRIMITIVE_KINDS = {cls.kind: cls for cls in
                   (SphereClearance, BoxClearance, CylinderClearance, LinearBound, LinkDiskClearance)}


def primitive_to_dict(p) -> dict:
    d = {"kind": p.kind}
    for key, value in asdict(p).items():
        d[key] = list(value) if isinstance(value, tuple) else value
    return d


def primitive_from_dict(d: dict):
    d = dict(d)
    cls = PRIMITIVE_KINDS[d.pop("kind")]
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    return cls(**kwargs)


@dataclass(frozen=True)
class DistanceField:
    primitives: tuple
    h: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if not self.primitives:
            raise ValueError("a distance field needs at least one primitive")
        if self.h <= 0 or self.delta <= 0:
            raise ValueError("h and delta must be positive")
        # vectorized evaluation: primitives grouped by type (and arity)
        groups = {}
        for k, p in enumerate(self.primitives):
            key = (type(p), len(getattr(p, "indices", ())))
            groups.setdefault(key, []).append(k)
        object.__setattr__(self, "_groups", [
            (np.array(ks), [self.primitives[k] for k in ks]) for ks in groups.values()])

    @property
    def m(self) -> int:
        return len(self.primitives)

    def margin_ok(self) -> bool:
        """delta >= h ln m, which makes D > 0 certify every F_i > 0."""
        return self.delta >= self.h * math.log(self.m)

    def clearances(self, q):
        q = np.asarray(q, dtype=float)
        vals = np.empty(self.m)
        grads = np.empty((self.m, q.size))
        for rows, prims in self._groups:
            batch = getattr(prims[0], "batch", None)
            if batch is not None:
                vals[rows], grads[rows] = batch(prims, q)
            else:
                for k, p in zip(rows, prims):
                    vals[k], grads[k] = p.value_grad(q)
        return vals, grads

    def evaluate(self, q):
        """Return (D, grad D) at q."""
        q = np.asarray(q, dtype=float)
        if not np.all(np.isfinite(q)):
            raise ValueError(f"non-finite configuration {q.tolist()}")
        vals, grads = self.clearances(q)
        w = softmin_weights(vals, self.h)
        return softmin(vals, self.h) - self.delta, w @ grads

    def value(self, q) -> float:
        return self.evaluate(q)[0]

    def normal(self, q, eps: float = EPS_MANIFOLD) -> np.ndarray:
        return normal_from_gradient(self.evaluate(q)[1], q, eps)

    def in_obstacle(self, q) -> bool:
        """True when some clearance is nonpositive (q lies in the forbidden set)."""
        return bool(np.min(self.clearances(q)[0]) <= 0.0)

    def to_dict(self) -> dict:
        return {"h": self.h, "delta": self.delta,
                "primitives": [primitive_to_dict(p) for p in self.primitives]}

    @classmethod
    def from_dict(cls, d: dict) -> "DistanceField":
        return cls(tuple(primitive_from_dict(p) for p in d["primitives"]),
                   float(d["h"]), float(d["delta"]))


def normal_from_gradient(grad, q=None, eps: float = EPS_MANIFOLD) -> np.ndarray:
    grad = np.asarray(grad, dtype=float)
    norm = float(np.linalg.norm(grad))
    if not norm > eps:
        raise OffManifold(grad if q is None else q, norm)
    return grad / norm


def link_disk_clearance(joints, link_index, link_dims=(0.70, 0.15), disk=((1.5, 1.3), 0.5)):
    """Functional form of :class:`LinkDiskClearance` for a 4-joint arm."""
    joints = np.asarray(joints, dtype=float)
    prim = LinkDiskClearance(link_index, tuple(disk[0]), float(disk[1]),
                             link_dims[0], link_dims[1], tuple(range(joints.size)))
    return prim.value_grad(joints)
