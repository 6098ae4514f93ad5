"""Labeled isometry actions on the model spaces, plus empirical genericity
and freeness diagnostics.

An action is a symmetric labeled generating set: positive generators carry
lowercase labels a, b, c, ...; their inverses the matching uppercase labels.
Words from :mod:`conelab.words` act by composing the labeled maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import BudgetError, ValidationError
from .spaces import (SPHERE, Net, Point, Space, dist_arrays, make_point,
                     probe_points, quat_conj, quat_mul, torus)
from .words import Word, ball_size, format_word, _ALPHABET, _ordered_letters

PROBE_SEED = 1729
DEFAULT_WORD_BUDGET = 500_000


@dataclass(frozen=True)
class Generator:
    label: str
    inverse_label: str
    kind: str     # "translation" | "toral_matrix" | "quat_lr"
    datum: tuple  # translation: coords; toral_matrix: row tuples; quat_lr: (l, r)


def _quat_left_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([[w, -x, -y, -z],
                     [x, w, -z, y],
                     [y, z, w, -x],
                     [z, -y, x, w]])


def _quat_right_matrix(r) -> np.ndarray:
    w, x, y, z = r
    return np.array([[w, -x, -y, -z],
                     [x, w, z, -y],
                     [y, -z, w, x],
                     [z, y, -x, w]])


@dataclass(frozen=True)
class Action:
    space: Space
    gens: tuple[Generator, ...]  # positive generators; inverses derived
    isometric: bool
    free_claimed: bool = False

    @property
    def n_generators(self) -> int:
        return len(self.gens)

    @cached_property
    def _letter_matrices(self) -> dict[int, np.ndarray]:
        """For quaternion actions, x -> q x r as an orthogonal 4x4 matrix."""
        out = {}
        for i, g in enumerate(self.gens):
            if g.kind != "quat_lr":
                continue
            for letter in (i + 1, -(i + 1)):
                l, r = g.datum if letter > 0 else _invert_datum(g)
                out[letter] = _quat_right_matrix(r) @ _quat_left_matrix(l)
        return out

    def generator_list(self) -> list[tuple[str, tuple, str]]:
        """Symmetric generating set as (label, datum, inverse label) triples."""
        out = []
        for g in self.gens:
            out.append((g.label, g.datum, g.inverse_label))
            out.append((g.inverse_label, _invert_datum(g), g.label))
        return out

    def letters(self) -> list[int]:
        """Signed letters of the symmetric generating set, in word order."""
        return _ordered_letters(self.n_generators)

    # -- evaluation --------------------------------------------------------

    def apply_letter(self, letter: int, coords: np.ndarray) -> np.ndarray:
        """Apply one signed generator to an array of point coordinates."""
        g = self.gens[abs(letter) - 1]
        if g.kind == "quat_lr":
            return coords @ self._letter_matrices[letter].T
        datum = g.datum if letter > 0 else _invert_datum(g)
        return _apply_datum(g.kind, datum, coords)

    def apply_word(self, w: Word, coords: np.ndarray) -> np.ndarray:
        for letter in reversed(w.letters):
            coords = self.apply_letter(letter, coords)
        return coords

    def apply(self, w: Word, p: Point) -> Point:
        return make_point(self.space, self.apply_word(w, p.coords))

    def probes(self, count: int = 128, seed: int = PROBE_SEED) -> np.ndarray:
        return probe_points(self.space, count, seed)


def _invert_datum(g: Generator) -> tuple:
    if g.kind == "translation":
        return tuple(-v for v in g.datum)
    if g.kind == "toral_matrix":
        m = np.array(g.datum, dtype=np.int64)
        inv = np.round(np.linalg.inv(m)).astype(np.int64)
        return tuple(map(tuple, inv.tolist()))
    if g.kind == "quat_lr":
        l, r = g.datum
        return (tuple(quat_conj(np.array(l)).tolist()),
                tuple(quat_conj(np.array(r)).tolist()))
    raise ValidationError(f"unknown generator kind {g.kind!r}")


def _apply_datum(kind: str, datum: tuple, coords: np.ndarray) -> np.ndarray:
    if kind == "translation":
        return (coords + np.array(datum)) % 1.0
    if kind == "toral_matrix":
        m = np.array(datum, dtype=float)
        return (coords @ m.T) % 1.0
    if kind == "quat_lr":
        l, r = np.array(datum[0]), np.array(datum[1])
        return quat_mul(quat_mul(l, coords), r)
    raise ValidationError(f"unknown generator kind {kind!r}")


def _labels(i: int) -> tuple[str, str]:
    if i >= len(_ALPHABET):
        raise ValidationError("at most 26 generators supported", index=i)
    return _ALPHABET[i], _ALPHABET[i].upper()


def _as_unit_quat(q, what: str) -> tuple:
    arr = np.asarray(q, dtype=float).reshape(-1)
    if arr.shape != (4,):
        raise ValidationError(f"{what} must have 4 components", value=list(arr))
    n = float(np.linalg.norm(arr))
    if abs(n - 1.0) > 1e-9:
        raise ValidationError(f"{what} is not a unit quaternion", norm=n)
    return tuple((arr / n).tolist())


_IDENTITY_QUAT = (1.0, 0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# constructors


def rotation_action(vectors: Sequence, dim: Optional[int] = None) -> Action:
    """Torus rotations; each entry is a translation vector (a scalar for d=1)."""
    rows = []
    for v in vectors:
        arr = np.atleast_1d(np.asarray(v, dtype=float))
        rows.append(arr)
    if rows:
        d = rows[0].shape[0]
        if any(r.shape[0] != d for r in rows):
            raise ValidationError("rotation vectors have mixed dimensions")
    elif dim is None:
        raise ValidationError("dim is required for an empty generating set")
    else:
        d = dim
    gens = tuple(
        Generator(*_labels(i), "translation", tuple((r % 1.0).tolist()))
        for i, r in enumerate(rows))
    return Action(torus(d), gens, isometric=True)


def trivial_action(space: Space) -> Action:
    return Action(space, (), isometric=True)


def su2_left_action(quaternions: Sequence, free_claimed: bool = False) -> Action:
    """Left translations of S^3 by unit quaternions."""
    gens = tuple(
        Generator(*_labels(i), "quat_lr",
                  (_as_unit_quat(q, f"generator {i}"), _IDENTITY_QUAT))
        for i, q in enumerate(quaternions))
    return Action(SPHERE, gens, isometric=True, free_claimed=free_claimed)


def left_right_action(left_quaternions: Sequence,
                      right_quaternions: Sequence,
                      free_claimed: bool = False) -> Action:
    """Left factor acts by left multiplication, right factor by right
    multiplication, on the same copy of S^3; the two kinds commute."""
    gens = []
    i = 0
    for q in left_quaternions:
        gens.append(Generator(*_labels(i), "quat_lr",
                              (_as_unit_quat(q, f"left generator {i}"),
                               _IDENTITY_QUAT)))
        i += 1
    for q in right_quaternions:
        gens.append(Generator(*_labels(i), "quat_lr",
                              (_IDENTITY_QUAT,
                               _as_unit_quat(q, f"right generator {i}"))))
        i += 1
    return Action(SPHERE, tuple(gens), isometric=True, free_claimed=free_claimed)


def toral_automorphism_action(matrices: Sequence) -> Action:
    """Integer-matrix automorphisms of T^d (graph-construction inputs only;
    not isometric, so warped-metric operations reject them)."""
    mats = [np.asarray(m, dtype=np.int64) for m in matrices]
    if not mats:
        raise ValidationError("at least one matrix is required")
    d = mats[0].shape[0]
    for m in mats:
        if m.ndim != 2 or m.shape != (d, d):
            raise ValidationError("matrices must be square and same size",
                                  shape=list(m.shape))
        det = round(float(np.linalg.det(m)))
        if det not in (1, -1):
            raise ValidationError(
                "matrix is not invertible over the integers", det=det)
    gens = tuple(
        Generator(*_labels(i), "toral_matrix", tuple(map(tuple, m.tolist())))
        for i, m in enumerate(mats))
    return Action(torus(d), gens, isometric=False)


def random_generic_generators(k: int, seed: int) -> list[np.ndarray]:
    """k seeded uniform unit quaternions (normalized 4D Gaussians)."""
    if k < 1:
        raise ValidationError("k must be >= 1", k=k)
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(k, 4))
    return list(g / np.linalg.norm(g, axis=1, keepdims=True))


def make_action(spec: dict) -> Action:
    """Config-facing constructor; see the CLI docs for the spec keys."""
    kind = spec.get("kind")
    if kind == "rotation":
        return rotation_action(spec["vectors"], dim=spec.get("dim"))
    if kind == "su2_left":
        return su2_left_action(spec["quaternions"],
                               free_claimed=bool(spec.get("free_claimed", False)))
    if kind == "su2_generic":
        quats = random_generic_generators(int(spec["count"]), int(spec["seed"]))
        return su2_left_action(quats, free_claimed=True)
    if kind == "left_right":
        return left_right_action(spec["left"], spec["right"],
                                 free_claimed=bool(spec.get("free_claimed", False)))
    if kind == "toral_automorphism":
        return toral_automorphism_action(spec["matrices"])
    if kind == "trivial":
        return trivial_action(Space(spec.get("space", "torus"), int(spec.get("dim", 1))))
    raise ValidationError(f"unknown action kind {kind!r}", kind=kind)


# ---------------------------------------------------------------------------
# word-ball scans: group elements as composable data


class _ElementOps:
    """Per-kind element calculus used by ball scans: identity, extension by
    one letter, application to coordinate arrays, exact dedup keys."""

    def __init__(self, action: Action):
        self.action = action
        kinds = {g.kind for g in action.gens}
        if len(kinds) > 1:
            raise ValidationError("mixed generator kinds are not supported",
                                  kinds=sorted(kinds))
        self.kind = kinds.pop() if kinds else "translation"
        self._pos = []
        self._inv = []
        for g in action.gens:
            self._pos.append(g.datum)
            self._inv.append(_invert_datum(g))

    def identity(self):
        if self.kind == "translation":
            return np.zeros(len(self.action.gens), dtype=np.int64)
        if self.kind == "toral_matrix":
            return np.eye(self.action.space.dim, dtype=np.int64)
        return (np.array(_IDENTITY_QUAT), np.array(_IDENTITY_QUAT))

    def extend(self, elem, letter: int):
        """Element of elem * letter: the letter is appended to the word's
        end, so its map is applied first."""
        idx = abs(letter) - 1
        if self.kind == "translation":
            out = elem.copy()
            out[idx] += 1 if letter > 0 else -1
            return out
        datum = self._pos[idx] if letter > 0 else self._inv[idx]
        if self.kind == "toral_matrix":
            return elem @ np.array(datum, dtype=np.int64)
        l, r = np.array(datum[0]), np.array(datum[1])
        return (quat_mul(elem[0], l), quat_mul(r, elem[1]))

    def key(self, elem):
        """Exact dedup key, or None when elements should not be merged."""
        if self.kind == "translation":
            return elem.tobytes()
        if self.kind == "toral_matrix":
            return elem.tobytes()
        return None

    def apply(self, elem, coords: np.ndarray) -> np.ndarray:
        if self.kind == "translation":
            vecs = np.array(self._pos, dtype=float)
            shift = elem @ vecs if len(vecs) else np.zeros(self.action.space.dim)
            return (coords + shift) % 1.0
        if self.kind == "toral_matrix":
            return (coords @ elem.T.astype(float)) % 1.0
        return quat_mul(quat_mul(elem[0], coords), elem[1])

    def displacement(self, elem, coords: np.ndarray) -> np.ndarray:
        return dist_arrays(self.action.space, self.apply(elem, coords), coords)


def iter_ball_elements(action: Action, max_len: int, *,
                       budget: int = DEFAULT_WORD_BUDGET,
                       dedupe: bool = True) -> Iterator[tuple[Word, object, "_ElementOps"]]:
    """Yield (word, element, ops) over reduced words of length <= max_len in
    shortlex order. For translation and integer-matrix actions, words mapping
    to the same element are merged (first, hence shortest, representative
    kept)."""
    ops = _ElementOps(action)
    expected = ball_size(action.n_generators, max_len)
    if expected > budget and not (dedupe and ops.key(ops.identity()) is not None):
        raise BudgetError(
            f"word ball of size {expected} exceeds the budget of {budget}",
            expected=expected, budget=budget)
    letters = action.letters()
    seen = set()
    ident = ops.identity()
    if dedupe:
        k = ops.key(ident)
        if k is not None:
            seen.add(k)
    yield Word(), ident, ops
    level: list[tuple[tuple[int, ...], object]] = [((), ident)]
    count = 1
    for _ in range(max_len):
        nxt = []
        for wl, elem in level:
            for l in letters:
                if wl and wl[-1] == -l:
                    continue
                new = ops.extend(elem, l)
                if dedupe:
                    k = ops.key(new)
                    if k is not None:
                        if k in seen:
                            continue
                        seen.add(k)
                count += 1
                if count > budget:
                    raise BudgetError(
                        f"word ball exceeds the budget of {budget}",
                        budget=budget)
                ext = wl + (l,)
                nxt.append((ext, new))
                yield Word(ext), new, ops
        level = nxt


# ---------------------------------------------------------------------------
# diagnostics


def relation_check(action: Action, max_len: int, tol: float, *,
                   probes: Optional[np.ndarray] = None,
                   budget: int = DEFAULT_WORD_BUDGET) -> list[Word]:
    """Nontrivial reduced words (length <= max_len) whose induced map moves
    every probe point by less than tol, i.e. is numerically the identity.
    An empty list means no short relation was detected at this resolution."""
    if not action.isometric:
        raise ValidationError("relation_check requires an isometric action")
    if probes is None:
        probes = action.probes()
    offenders = []
    for w, elem, ops in iter_ball_elements(action, max_len, budget=budget):
        if not w:
            continue
        if float(np.max(ops.displacement(elem, probes))) < tol:
            offenders.append(w)
    return offenders


@dataclass(frozen=True)
class FreeActionReport:
    max_len: int
    tol: float
    minima: tuple[tuple[Word, float], ...] = field(repr=False)
    worst_word: Optional[Word] = None
    worst_displacement: float = float("inf")

    @property
    def passed(self) -> bool:
        return self.worst_displacement > self.tol

    def minimum_for(self, w: Word) -> float:
        for word, m in self.minima:
            if word == w:
                return m
        raise KeyError(format_word(w))


def free_action_check(action: Action, net, max_len: int, tol: float, *,
                      budget: int = DEFAULT_WORD_BUDGET) -> FreeActionReport:
    """Minimum displacement over net points for every nontrivial word of
    length <= max_len; the action passes iff all minima exceed tol. An
    empirical proxy for freeness, certified only up to (max_len, tol)."""
    if not action.isometric:
        raise ValidationError("free_action_check requires an isometric action")
    coords = net.coords if isinstance(net, Net) else np.asarray(net)
    minima = []
    worst_word, worst = None, float("inf")
    for w, elem, ops in iter_ball_elements(action, max_len, budget=budget):
        if not w:
            continue
        m = float(np.min(ops.displacement(elem, coords)))
        minima.append((w, m))
        if m < worst:
            worst_word, worst = w, m
    return FreeActionReport(max_len, tol, tuple(minima), worst_word, worst)
