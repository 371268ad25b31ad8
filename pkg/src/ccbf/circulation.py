"""Skew-symmetric circulation matrices and the tangent map T = Omega N."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

INVARIANT_TOL = 1e-12


class Parity(enum.Enum):
    EVEN_FULL = "even_full"
    ODD_REDUCED = "odd_reduced"


class CirculationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CirculationSpec:
    omega: np.ndarray
    parity: Parity
    dead_index: int | None = None  # 0-based

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float)
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "parity", Parity(self.parity))

    @property
    def n(self) -> int:
        return self.omega.shape[0]

    def violations(self, tol: float = INVARIANT_TOL) -> list[str]:
        """Names of the invariants this matrix breaks (empty when valid)."""
        W = self.omega
        n = W.shape[0]
        out = []
        if W.shape != (n, n) or not np.all(np.isfinite(W)):
            return ["shape"]
        if np.max(np.abs(W + W.T)) > tol:
            out.append("skew_symmetry")
        target = np.eye(n)
        if self.parity is Parity.EVEN_FULL:
            if n % 2:
                out.append("even_dimension")
            if self.dead_index is not None:
                out.append("dead_index")
        else:
            if n % 2 == 0:
                out.append("odd_dimension")
            d = self.dead_index
            if d is None or not 0 <= d < n:
                out.append("dead_index")
                return out
            if np.max(np.abs(W[d])) > tol or np.max(np.abs(W[:, d])) > tol:
                out.append("dead_row_column")
            target[d, d] = 0.0
        if np.max(np.abs(W.T @ W - target)) > tol:
            out.append("orthonormality")
        return out

    def check(self, tol: float = INVARIANT_TOL) -> "CirculationSpec":
        bad = self.violations(tol)
        if bad:
            raise CirculationError(f"invalid circulation matrix: {', '.join(bad)}")
        return self

    def tangent(self, N) -> np.ndarray:
        return tangent(self, N)

    def to_dict(self) -> dict:
        return {
            "omega": self.omega.tolist(),
            "parity": self.parity.value,
            "dead_index": self.dead_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CirculationSpec":
        return cls(np.asarray(d["omega"], float), Parity(d["parity"]), d.get("dead_index")).check()


def omega_from_pairing(n: int, pairs, dead_index: int | None = None) -> CirculationSpec:
    """Build Omega from index pairs (1-based, as in ``(1, 3), (2, 4)``).

    For each pair (i, j) the identity's row i is negated and then swapped
    with row j, so (Omega N)_i = N_j and (Omega N)_j = -N_i. With odd n the
    unpaired index (1-based ``dead_index``, default: the last one) keeps a
    zero row.
    """
    pairs = [tuple(int(v) for v in p) for p in pairs]
    used = [v for p in pairs for v in p]
    if any(len(p) != 2 for p in pairs):
        raise CirculationError("each pair must have exactly two indices")
    if any(not 1 <= v <= n for v in used):
        raise CirculationError(f"pair index out of range 1..{n}")
    if len(set(used)) != len(used):
        raise CirculationError("pairs overlap")
    if len(pairs) != n // 2:
        raise CirculationError(f"expected {n // 2} pairs for n={n}, got {len(pairs)}")
    I = np.eye(n)
    dead = None
    if n % 2:
        missing = sorted(set(range(1, n + 1)) - set(used))
        if dead_index is not None and missing != [dead_index]:
            raise CirculationError(f"unpaired index is {missing[0]}, not {dead_index}")
        dead = missing[0] - 1
        I[dead] = 0.0
    elif dead_index is not None:
        raise CirculationError("dead_index only applies to odd n")
    for i, j in pairs:
        i, j = i - 1, j - 1
        I[i] *= -1.0
        I[[i, j]] = I[[j, i]]
    parity = Parity.ODD_REDUCED if n % 2 else Parity.EVEN_FULL
    return CirculationSpec(I, parity, dead).check()


def default_pairing(n: int) -> list[tuple[int, int]]:
    """Consecutive pairs (1,2), (3,4), ...; the last index stays unpaired for odd n."""
    return [(i, i + 1) for i in range(1, n, 2)]


def all_pairings(n: int):
    """Every ordered pairing of 1..n (n even); there are n!/(n/2)! of them."""
    if n % 2:
        raise CirculationError("pairings cover all indices only for even n")

    def matchings(idx):
        if not idx:
            yield []
            return
        first, rest = idx[0], idx[1:]
        for t in range(len(rest)):
            for m in matchings(rest[:t] + rest[t + 1:]):
                yield [(first, rest[t])] + m

    for m in matchings(list(range(1, n + 1))):
        for flips in itertools.product((False, True), repeat=len(m)):
            yield [(j, i) if f else (i, j) for (i, j), f in zip(m, flips)]


def cayley_orthonormal(B) -> np.ndarray:
    """Orthonormal Q = (I - A)^-1 (I + A) with the skew part A = B - B^T."""
    B = np.asarray(B, dtype=float)
    A = B - B.T
    I = np.eye(B.shape[0])
    return np.linalg.solve(I - A, I + A)


def random_orthonormal(n: int, seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return cayley_orthonormal(rng.normal(size=(n, n)))


def omega_conjugate(spec: CirculationSpec, Q, tol: float = 1e-10) -> CirculationSpec:
    Q = np.asarray(Q, dtype=float)
    if Q.shape != spec.omega.shape or np.max(np.abs(Q.T @ Q - np.eye(spec.n))) > tol:
        raise CirculationError("Q must be an n x n orthonormal matrix")
    W = Q @ spec.omega @ Q.T
    W = 0.5 * (W - W.T)
    if spec.parity is Parity.EVEN_FULL:
        return CirculationSpec(W, spec.parity)
    # The null direction rotates with Q; it stays a coordinate axis only for
    # signed permutations.
    null = Q[:, spec.dead_index]
    d = int(np.argmax(np.abs(null)))
    if abs(abs(null[d]) - 1.0) > tol:
        raise CirculationError("odd-dimension conjugation must keep the dead direction on an axis")
    W[d] = 0.0
    W[:, d] = 0.0
    return CirculationSpec(W, spec.parity, d)


def tangent(spec: CirculationSpec, N) -> np.ndarray:
    return spec.omega @ np.asarray(N, dtype=float)


def is_invertible_skew(omega, tol: float = 1e-12) -> bool:
    """False for any singular candidate; every odd-order skew matrix is singular."""
    omega = np.asarray(omega, dtype=float)
    return abs(np.linalg.det(omega)) > tol


MANIPULATOR_OMEGA = (np.sqrt(3.0) / 3.0) * np.array([
    [0.0, 1.0, -1.0, 1.0],
    [-1.0, 0.0, 1.0, 1.0],
    [1.0, -1.0, 0.0, 1.0],
    [-1.0, -1.0, -1.0, 0.0],
])
