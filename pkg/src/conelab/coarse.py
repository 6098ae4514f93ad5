"""Coarse paths at scale r on level t: orbital jumps, the jump-product map,
canonical forms, homotopy moves, generator loops, and torus winding vectors.

A step (p, q) with warped distance below r admits a group element g with
||g|| <= r and d_M(g p, q) < r/t; when t > 2r/delta(2r) that element is
unique (delta(R) = minimum displacement over nontrivial words of length
<= R). Jump products are additionally invariant under single-point homotopy
moves once t > 4r/delta(4r).

Jump search runs over the ball of radius r in the free group on the action's
labels; words acting identically (within 1e-9 on the probe set) are merged
before the uniqueness test, keeping the shortest representative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .actions import Action, iter_ball_elements
from .errors import (NotAnRPathError, ScaleConditionError, ValidationError)
from .spaces import Point, dist_arrays, make_point
from .warped import min_displacement, warped_distance_exact
from .words import IDENTITY, Word, format_word

_GUARD = 1e-12        # guard band for r/t comparisons
_SAME_ISOMETRY = 1e-9  # numeric dedup threshold for candidate isometries


@dataclass(frozen=True, eq=False)
class CoarsePath:
    """A verified r-path: consecutive warped distances below r, one jump
    per step."""

    action: Action
    t: float
    r: float
    points: tuple[Point, ...]
    jumps: tuple[Word, ...]

    def __post_init__(self):
        if len(self.points) == 0:
            raise ValidationError("a path needs at least one point")
        if len(self.jumps) != len(self.points) - 1:
            raise ValidationError("one jump per step expected",
                                  points=len(self.points), jumps=len(self.jumps))

    @property
    def steps(self) -> int:
        return len(self.points) - 1

    @property
    def base(self) -> Point:
        return self.points[0]

    @property
    def end(self) -> Point:
        return self.points[-1]

    @property
    def is_loop(self) -> bool:
        return bool(np.array_equal(self.points[0].coords, self.points[-1].coords))


class _JumpFinder:
    """Candidate search over the radius-r word ball, reused across steps."""

    def __init__(self, action: Action, t: float, r: float,
                 probes: Optional[np.ndarray] = None):
        self.action = action
        self.t = t
        self.r = r
        self.probes = action.probes(64) if probes is None else probes
        radius = int(math.floor(r + _GUARD))
        self.ball = [(w, elem, ops)
                     for w, elem, ops in iter_ball_elements(action, radius)]

    def find(self, p: Point, q: Point) -> Word:
        cutoff = self.r / self.t + _GUARD
        hits = []
        for w, elem, ops in self.ball:
            moved = ops.apply(elem, p.coords)
            if float(dist_arrays(self.action.space, moved, q.coords)) < cutoff:
                hits.append((w, elem, ops))
        classes: list[tuple[Word, object]] = []
        for w, elem, ops in hits:
            image = ops.apply(elem, self.probes)
            for _, seen_image in classes:
                if float(np.max(dist_arrays(self.action.space, image,
                                            seen_image))) < _SAME_ISOMETRY:
                    break
            else:
                classes.append((w, image))
        if len(classes) == 1:
            return classes[0][0]
        if not classes:
            raise ScaleConditionError(
                f"no group element of length <= {self.r} carries the point "
                f"within {self.r / self.t:.3g} of its successor",
                r=self.r, t=self.t)
        raise ScaleConditionError(
            "jump is not unique at this scale: "
            + ", ".join(format_word(w) for w, _ in classes[:4]),
            candidates=[format_word(w) for w, _ in classes])


def delta_threshold(action: Action, r: float, *,
                    probes: Optional[np.ndarray] = None,
                    multiple: float = 2.0) -> float:
    """multiple*r / delta(multiple*r), the level below which jumps may fail
    to be unique (or, at multiple=4, jump products may fail homotopy
    invariance). delta is measured on a probe set, so this is an empirical
    proxy. Infinite displacement (trivial group) gives threshold 0."""
    if probes is None:
        probes = action.probes(64)
    radius = int(math.floor(multiple * r + _GUARD))
    if action.n_generators == 0:
        return 0.0
    delta = min_displacement(action, radius, probes)
    if delta <= 0:
        return math.inf
    return multiple * r / delta


def validate_r_path(action: Action, t: float, r: float,
                    points: Sequence[Point], *,
                    probes: Optional[np.ndarray] = None) -> CoarsePath:
    """Verify the step bounds and compute the jump of every step."""
    if r <= 0 or t <= 0:
        raise ValidationError("t and r must be positive", t=t, r=r)
    pts = tuple(points)
    threshold = delta_threshold(action, r, probes=probes)
    if not t > threshold:
        raise ScaleConditionError(
            f"scale condition violated: t = {t} is not above 2r/delta(2r) "
            f"= {threshold:.6g}", t=t, threshold=threshold)
    for i in range(len(pts) - 1):
        d = warped_distance_exact(action, t, pts[i], pts[i + 1])
        if not d < r:
            raise NotAnRPathError(
                f"not an r-path: step {i} has warped distance {d:.6g} >= r = {r}",
                step=i, distance=d, r=r)
    finder = _JumpFinder(action, t, r, probes)
    jumps = tuple(finder.find(pts[i], pts[i + 1]) for i in range(len(pts) - 1))
    return CoarsePath(action, float(t), float(r), pts, jumps)


def q_map(path: CoarsePath) -> Word:
    """Reduced product of the jumps, last step first."""
    letters: list[int] = []
    for g in reversed(path.jumps):
        letters.extend(g.letters)
    return Word(tuple(letters))


def path_length(path: CoarsePath) -> float:
    """Sum of warped distances over consecutive pairs."""
    return sum(
        warped_distance_exact(path.action, path.t, path.points[i],
                              path.points[i + 1])
        for i in range(path.steps))


def _prefix_words(jumps: Sequence[Word]) -> list[Word]:
    out = [IDENTITY]
    for g in jumps:
        out.append(g * out[-1])
    return out


def canonical_form(path: CoarsePath) -> tuple[CoarsePath, CoarsePath]:
    """Rewrite the path as an orbital prefix followed by a spatial suffix.

    The orbital component moves the basepoint by the successive jump
    prefixes (identity jumps contribute no step); the spatial component is
    (Q p_0, g_last...g_1 p_1, ..., p_last). Both share endpoints with the
    original, the jump product is preserved exactly, and the total length
    agrees to rounding.
    """
    act, t, r = path.action, path.t, path.r
    prefixes = _prefix_words(path.jumps)
    orb_points: list[Point] = [path.base]
    orb_jumps: list[Word] = []
    for i, g in enumerate(path.jumps):
        if g:
            orb_points.append(act.apply(prefixes[i + 1], path.base))
            orb_jumps.append(g)
    orbital = CoarsePath(act, t, r, tuple(orb_points), tuple(orb_jumps))

    n = path.steps
    suffix = [IDENTITY] * (n + 1)
    for j in range(n - 1, -1, -1):
        suffix[j] = suffix[j + 1] * path.jumps[j]
    spa_points = [act.apply(suffix[j], path.points[j]) for j in range(n + 1)]
    spatial = CoarsePath(act, t, r, tuple(spa_points),
                         (IDENTITY,) * n if n else ())
    return orbital, spatial


def concatenate(a: CoarsePath, b: CoarsePath, *,
                probes: Optional[np.ndarray] = None) -> CoarsePath:
    """Join two paths, keeping both junction points; the connecting step gets
    its own jump, which is the identity when b starts where a ends."""
    if (a.action is not b.action and a.action != b.action) or a.t != b.t or a.r != b.r:
        raise ValidationError("paths must share action, t and r")
    d = warped_distance_exact(a.action, a.t, a.end, b.base)
    if not d < a.r:
        raise NotAnRPathError(
            f"junction step has warped distance {d:.6g} >= r = {a.r}",
            distance=d, r=a.r)
    conn = _JumpFinder(a.action, a.t, a.r, probes).find(a.end, b.base)
    return CoarsePath(a.action, a.t, a.r, a.points + b.points,
                      a.jumps + (conn,) + b.jumps)


def reverse(path: CoarsePath) -> CoarsePath:
    return CoarsePath(path.action, path.t, path.r, tuple(reversed(path.points)),
                      tuple(g.inverse() for g in reversed(path.jumps)))


def homotopy_move(path: CoarsePath, op: str, position: Optional[int] = None,
                  new_point: Optional[Point] = None, *,
                  probes: Optional[np.ndarray] = None) -> CoarsePath:
    """One elementary based-homotopy move: append/delete a repeated endpoint,
    or replace a single interior point within r of its old position."""
    act, t, r = path.action, path.t, path.r
    if op == "append":
        return CoarsePath(act, t, r, path.points + (path.end,),
                          path.jumps + (IDENTITY,))
    if op == "delete":
        if path.steps < 1 or not np.array_equal(path.points[-1].coords,
                                                path.points[-2].coords):
            raise ValidationError(
                "endpoint deletion needs a repeated final point")
        return CoarsePath(act, t, r, path.points[:-1], path.jumps[:-1])
    if op != "replace":
        raise ValidationError(f"unknown homotopy move {op!r}")
    if position is None or new_point is None:
        raise ValidationError("replace needs a position and a new point")
    if not 0 < position < path.steps:
        raise ValidationError(
            "endpoints are fixed under based homotopy moves; only interior "
            "positions can move", position=position)
    moved = warped_distance_exact(act, t, path.points[position], new_point)
    if not moved < r:
        raise NotAnRPathError(
            f"replacement moves the point by {moved:.6g} >= r = {r}",
            distance=moved, r=r)
    pts = list(path.points)
    pts[position] = new_point
    for i in (position - 1, position):
        d = warped_distance_exact(act, t, pts[i], pts[i + 1])
        if not d < r:
            raise NotAnRPathError(
                f"move breaks step {i}: warped distance {d:.6g} >= r = {r}",
                step=i, distance=d, r=r)
    finder = _JumpFinder(act, t, r, probes)
    jumps = list(path.jumps)
    jumps[position - 1] = finder.find(pts[position - 1], pts[position])
    jumps[position] = finder.find(pts[position], pts[position + 1])
    return CoarsePath(act, t, r, tuple(pts), tuple(jumps))


def _torus_return_points(end: np.ndarray, base: np.ndarray,
                         max_step: float) -> list[np.ndarray]:
    lift = ((base - end + 0.5) % 1.0) - 0.5  # nearest lift of the difference
    span = float(np.linalg.norm(lift))
    if span == 0.0:
        return [base]
    m = int(math.ceil(span / max_step)) + 1
    pts = [(end + (j / m) * lift) % 1.0 for j in range(1, m)]
    return pts + [base]


def _sphere_return_points(end: np.ndarray, base: np.ndarray,
                          max_step: float) -> list[np.ndarray]:
    dot = float(np.clip(end @ base, -1.0, 1.0))
    omega = math.acos(dot)
    if omega < 1e-12:
        return [base]
    m = int(math.ceil(omega / max_step)) + 1
    sin_o = math.sin(omega)
    pts = []
    for j in range(1, m):
        s = j / m
        p = (math.sin((1 - s) * omega) * end + math.sin(s * omega) * base) / sin_o
        pts.append(p / np.linalg.norm(p))
    return pts + [base]


def j_gamma(action: Action, t: float, r: float, w: Word, base: Point, *,
            probes: Optional[np.ndarray] = None) -> CoarsePath:
    """Loop at the basepoint spelling w letter by letter through the orbit,
    then returning along a geodesic discretized at scale r/t. The jump
    product of the result is w."""
    if not w:
        return CoarsePath(action, float(t), float(r), (base,), ())
    if not r > 1:
        raise ValidationError("r must exceed 1 so single letters are jumps",
                              r=r)
    threshold = delta_threshold(action, r, probes=probes)
    if not t > threshold:
        raise ScaleConditionError(
            f"scale condition violated: t = {t} is not above 2r/delta(2r) "
            f"= {threshold:.6g}", t=t, threshold=threshold)
    points = [base]
    jumps = []
    for letter in reversed(w.letters):
        nxt = make_point(action.space,
                         action.apply_letter(letter, points[-1].coords))
        points.append(nxt)
        jumps.append(Word((letter,)))
    end = points[-1].coords
    max_step = r / t
    if action.space.kind == "torus":
        ret = _torus_return_points(end, base.coords, max_step)
    elif action.space.kind == "sphere":
        ret = _sphere_return_points(end, base.coords, max_step)
    else:
        raise ValidationError(
            "return path cannot be discretized on this space",
            space=action.space.kind)
    for coords in ret:
        points.append(make_point(action.space, coords))
        jumps.append(IDENTITY)
    return CoarsePath(action, float(t), float(r), tuple(points), tuple(jumps))


@dataclass(frozen=True)
class WindingVector:
    vector: tuple[int, ...]
    residual: float


def winding_vector(loop: CoarsePath) -> WindingVector:
    """Degree of the spatial component of a torus loop with trivial jump
    product: sum of nearest-lift step differences, rounded to integers."""
    if loop.action.space.kind != "torus":
        raise ValidationError("winding vectors are defined on the torus",
                              space=loop.action.space.kind)
    if not loop.is_loop:
        raise ValidationError("winding vectors are defined for loops")
    if q_map(loop):
        raise ValidationError(
            "winding needs a trivial jump product",
            q=format_word(q_map(loop)))
    _, spatial = canonical_form(loop)
    total = np.zeros(loop.action.space.dim)
    for j in range(spatial.steps):
        diff = spatial.points[j + 1].coords - spatial.points[j].coords
        lift = ((diff + 0.5) % 1.0) - 0.5
        if float(np.linalg.norm(lift)) >= 0.5:
            raise ValidationError(
                "spatial steps must stay below 1/2 for lifts to be unambiguous",
                step=j)
        total = total + lift
    vec = np.rint(total)
    residual = float(np.max(np.abs(total - vec)))
    if residual > 0.1:
        raise ValidationError(
            "loop does not close at this resolution", residual=residual)
    return WindingVector(tuple(int(v) for v in vec), residual)
