"""Model spaces: flat torus T^d, round S^3 (unit quaternions), small unitary
groups with the bi-invariant metric. Distances, seeded sampling, epsilon-nets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import BudgetError, SpaceMismatchError, ValidationError

DEFAULT_POINT_BUDGET = 6000
NET_PROBE_COUNT = 10_000

# Farthest-point nets stop once the candidate pool is covered within
# epsilon - _FPS_MARGIN * rho, where rho estimates the pool's own covering
# radius; the pool is densified until rho <= epsilon * _POOL_RHO_FACTOR.
_FPS_MARGIN = 1.25
_POOL_RHO_FACTOR = 0.25


class Space(NamedTuple):
    kind: str  # "torus" | "sphere" | "unitary"
    dim: int   # torus: d; sphere: always 3 (S^3 in R^4); unitary: matrix size n


def torus(d: int) -> Space:
    return Space("torus", d)


SPHERE = Space("sphere", 3)


def unitary(n: int) -> Space:
    return Space("unitary", n)


# ---------------------------------------------------------------------------
# points


@dataclass(frozen=True, eq=False)
class TorusPoint:
    coords: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=float).reshape(-1) % 1.0
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def space(self) -> Space:
        return Space("torus", self.coords.shape[0])


@dataclass(frozen=True, eq=False)
class SpherePoint:
    coords: np.ndarray  # unit quaternion (w, x, y, z)

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=float).reshape(-1)
        if arr.shape != (4,):
            raise ValidationError("sphere points are unit quaternions in R^4",
                                  shape=list(arr.shape))
        n = float(np.linalg.norm(arr))
        if abs(n - 1.0) > 1e-9:
            raise ValidationError("sphere point is not a unit quaternion",
                                  norm=n)
        arr = arr / n  # absorb rounding drift below 1e-9
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def space(self) -> Space:
        return SPHERE


@dataclass(frozen=True, eq=False)
class UnitaryPoint:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("unitary points are square matrices",
                                  shape=list(m.shape))
        err = float(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))))
        if err > 1e-9:
            raise ValidationError("matrix is not unitary", defect=err)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def coords(self) -> np.ndarray:
        return self.matrix

    @property
    def space(self) -> Space:
        return Space("unitary", self.matrix.shape[0])


Point = Union[TorusPoint, SpherePoint, UnitaryPoint]


def make_point(space: Space, coords) -> Point:
    if space.kind == "torus":
        p = TorusPoint(coords)
        if p.space != space:
            raise SpaceMismatchError("wrong torus dimension",
                                     expected=space.dim, got=p.space.dim)
        return p
    if space.kind == "sphere":
        return SpherePoint(coords)
    if space.kind == "unitary":
        return UnitaryPoint(coords)
    raise ValidationError(f"unknown space kind {space.kind!r}")


def _require_same_space(x: Point, y: Point) -> Space:
    if x.space != y.space:
        raise SpaceMismatchError(
            f"points live in different spaces: {x.space} vs {y.space}")
    return x.space


# ---------------------------------------------------------------------------
# quaternion algebra (vectorized over leading axes)


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def quat_conj(a: np.ndarray) -> np.ndarray:
    return a * np.array([1.0, -1.0, -1.0, -1.0])


# ---------------------------------------------------------------------------
# distances


def _torus_dist_arr(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d = np.abs(A - B)
    d = np.minimum(d, 1.0 - d)
    return np.sqrt(np.sum(d * d, axis=-1))


def _sphere_dist_arr(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    dot = np.clip(np.sum(A * B, axis=-1), -1.0, 1.0)
    return np.arccos(dot)


def _unitary_log_norm(w: np.ndarray) -> float:
    # Frobenius norm of the principal log; phases taken in (-pi, pi]. The
    # branch is discontinuous only at the cut locus, which sampled nets
    # avoid almost surely.
    phases = np.angle(np.linalg.eigvals(w))
    return float(np.sqrt(np.sum(phases * phases)))


def _unitary_dist_arr(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A2 = A.reshape((-1,) + A.shape[-2:])
    B2 = np.broadcast_to(B, A2.shape) if B.ndim == 2 else B.reshape(A2.shape)
    out = np.empty(A2.shape[0])
    for i in range(A2.shape[0]):
        out[i] = _unitary_log_norm(A2[i].conj().T @ B2[i])
    return out.reshape(A.shape[:-2]) if A.ndim > 2 else out[0]


def dist_arrays(space: Space, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if space.kind == "torus":
        return _torus_dist_arr(A, B)
    if space.kind == "sphere":
        return _sphere_dist_arr(A, B)
    if space.kind == "unitary":
        return np.asarray(_unitary_dist_arr(A, B))
    raise ValidationError(f"unknown space kind {space.kind!r}")


def distance(x: Point, y: Point) -> float:
    """Riemannian distance in the point's model space.

    Torus: l2 of per-coordinate circle distances. Sphere: geodesic angle.
    Unitary: Frobenius norm of the principal matrix log of U*V.
    """
    space = _require_same_space(x, y)
    return float(dist_arrays(space, x.coords, y.coords))


def diameter(space: Space) -> float:
    if space.kind == "torus":
        return 0.5 * math.sqrt(space.dim)
    if space.kind == "sphere":
        return math.pi
    # U(n): each of n phases at most pi
    return math.pi * math.sqrt(space.dim)


# ---------------------------------------------------------------------------
# sampling


def sample_points(space: Space, count: int, rng: np.random.Generator) -> np.ndarray:
    if space.kind == "torus":
        return rng.random((count, space.dim))
    if space.kind == "sphere":
        g = rng.normal(size=(count, 4))
        return g / np.linalg.norm(g, axis=1, keepdims=True)
    if space.kind == "unitary":
        n = space.dim
        out = np.empty((count, n, n), dtype=complex)
        for i in range(count):
            z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(2)
            q, r = np.linalg.qr(z)
            q = q * (np.diag(r) / np.abs(np.diag(r)))
            out[i] = q
        return out
    raise ValidationError(f"unknown space kind {space.kind!r}")


def probe_points(space: Space, count: int, seed: int) -> np.ndarray:
    """Deterministic probe coordinates, for isometry/displacement checks."""
    return sample_points(space, count, np.random.default_rng([seed, 0x9E3779B9]))


# ---------------------------------------------------------------------------
# nets


@dataclass(frozen=True, eq=False)
class Net:
    space: Space
    epsilon: float
    points: tuple[Point, ...]
    spatial_pairs: tuple[tuple[int, int], ...]
    covering_estimate: float = field(default=float("nan"), compare=False)

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def coords(self) -> np.ndarray:
        arr = np.stack([p.coords for p in self.points])
        arr.setflags(write=False)
        return arr


def _spatial_pairs(space: Space, coords: np.ndarray, epsilon: float) -> tuple:
    m = coords.shape[0]
    pairs = []
    cutoff = 2.0 * epsilon + 1e-12
    if space.kind == "unitary":
        for i in range(m):
            for j in range(i + 1, m):
                if _unitary_log_norm(coords[i].conj().T @ coords[j]) <= cutoff:
                    pairs.append((i, j))
        return tuple(pairs)
    for i in range(m - 1):
        d = dist_arrays(space, coords[i + 1:], coords[i])
        for j in np.nonzero(d <= cutoff)[0]:
            pairs.append((i, int(j) + i + 1))
    return tuple(pairs)


def _torus_grid(space: Space, epsilon: float, budget: int) -> np.ndarray:
    m = math.ceil(1.0 / epsilon - 1e-12)
    count = m ** space.dim
    if count > budget:
        raise BudgetError(
            f"torus grid with spacing <= {epsilon} needs {count} points, "
            f"over the budget of {budget}", count=count, budget=budget)
    axes = [np.arange(m) / m] * space.dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.reshape(-1) for a in mesh], axis=-1)


def _fps_net(space: Space, epsilon: float, seed: int, budget: int,
             probe_count: int) -> tuple[np.ndarray, float]:
    """Farthest-point sampling until the candidate pool is covered well
    inside epsilon. Deterministic per (space, epsilon, seed)."""
    probes = sample_points(space, probe_count, np.random.default_rng([seed, 1]))
    pool_size = 8192 if space.kind == "sphere" else 512
    pool_cap = 1_500_000 if space.kind == "sphere" else 4096
    attempt = 0
    while True:
        pool = sample_points(space, pool_size, np.random.default_rng([seed, 2, attempt]))
        rho = _covering_radius(space, probes, pool)
        if rho <= epsilon * _POOL_RHO_FACTOR:
            break
        if pool_size >= pool_cap:
            raise BudgetError(
                "candidate pool cannot be made dense enough at this epsilon",
                epsilon=epsilon, pool_size=pool_size, pool_covering=rho)
        pool_size = min(2 * pool_size, pool_cap)
        attempt += 1

    target = epsilon - _FPS_MARGIN * rho
    if space.kind == "sphere":
        centers = _fps_sphere(pool, target, budget)
    else:
        centers = _fps_generic(space, pool, target, budget)
    est = _covering_radius(space, probes, centers)
    return centers, est


def _fps_sphere(pool: np.ndarray, target: float, budget: int) -> np.ndarray:
    # work with dot products: larger dot = smaller angle
    stop_dot = math.cos(target)
    idx = [0]
    best_dot = pool @ pool[0]
    while True:
        worst = int(np.argmin(best_dot))
        if best_dot[worst] >= stop_dot:
            break
        if len(idx) >= budget:
            raise BudgetError(
                f"net would exceed the point budget of {budget}",
                budget=budget, epsilon_target=target)
        idx.append(worst)
        best_dot = np.maximum(best_dot, pool @ pool[worst])
    return pool[np.array(idx)]


def _fps_generic(space: Space, pool: np.ndarray, target: float, budget: int) -> np.ndarray:
    idx = [0]
    dmin = dist_arrays(space, pool, pool[0])
    while True:
        worst = int(np.argmax(dmin))
        if dmin[worst] <= target:
            break
        if len(idx) >= budget:
            raise BudgetError(
                f"net would exceed the point budget of {budget}",
                budget=budget, epsilon_target=target)
        idx.append(worst)
        dmin = np.minimum(dmin, dist_arrays(space, pool, pool[worst]))
    return pool[np.array(idx)]


def _covering_radius(space: Space, probes: np.ndarray, centers: np.ndarray) -> float:
    if space.kind == "sphere":
        # chunked max-min via dot products
        worst_dot = 1.0
        for lo in range(0, probes.shape[0], 2048):
            block = probes[lo:lo + 2048] @ centers.T
            worst_dot = min(worst_dot, float(np.min(np.max(block, axis=1))))
        return math.acos(max(-1.0, min(1.0, worst_dot)))
    worst = 0.0
    for lo in range(0, probes.shape[0], 2048):
        block = probes[lo:lo + 2048]
        dmin = np.full(block.shape[0], np.inf)
        for c in range(centers.shape[0]):
            dmin = np.minimum(dmin, dist_arrays(space, block, centers[c]))
        worst = max(worst, float(np.max(dmin)))
    return worst


def epsilon_net(space: Space, epsilon: float, seed: int = 0, *,
                point_budget: int = DEFAULT_POINT_BUDGET,
                probe_count: int = NET_PROBE_COUNT) -> Net:
    """Build an epsilon-net with its 2*epsilon spatial pairs.

    Torus: a uniform grid with spacing <= epsilon (seed ignored). Sphere and
    unitary: farthest-point sampling from a seeded uniform pool until the
    estimated covering radius is safely below epsilon. Identical inputs give
    bit-identical nets.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive", epsilon=epsilon)
    if space.kind == "torus":
        coords = _torus_grid(space, epsilon, point_budget)
        m = math.ceil(1.0 / epsilon - 1e-12)
        est = 0.5 * math.sqrt(space.dim) / m
    else:
        coords, est = _fps_net(space, epsilon, seed, point_budget, probe_count)
    points = tuple(make_point(space, c) for c in coords)
    pairs = _spatial_pairs(space, coords, epsilon)
    return Net(space, float(epsilon), points, pairs, covering_estimate=est)


def nearest(net: Net, x: Point) -> int:
    """Index of a nearest net point; ties break to the lowest index."""
    if len(net.points) == 0:
        raise ValidationError("net is empty")
    if x.space != net.space:
        raise SpaceMismatchError(
            f"point in {x.space} queried against net in {net.space}")
    d = dist_arrays(net.space, net.coords, x.coords)
    return int(np.argmin(d))
