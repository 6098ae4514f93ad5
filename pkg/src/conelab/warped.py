"""Warped metric on level sets: exact brute-force evaluation, a discrete
graph surrogate with shortest paths, and the displacement function of the
action.

The exact evaluation minimizes ||g|| + t * d_M(x, g y) over group elements.
The identity term caps the minimum at t * d_M(x, y), so the search over the
word ball is pruned by the best cost found so far and is exact, not
truncated.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .actions import Action, iter_ball_elements
from .errors import BudgetError, SpaceMismatchError, ValidationError
from .spaces import Net, Point, dist_arrays, distance, make_point, nearest

DEFAULT_NODE_BUDGET = 2_000_000


def _require_isometric(action: Action, op: str):
    if not action.isometric:
        raise ValidationError(
            f"{op} is defined for isometric actions only; this action is not")


def _require_point(action: Action, p: Point):
    if p.space != action.space:
        raise SpaceMismatchError(
            f"point in {p.space} used with an action on {action.space}")


class _Frontier:
    """Level frontier of orbit points g*y over reduced words, built by
    prepending letters; translation-type actions dedupe on exact integer
    coefficient vectors."""

    def __init__(self, action: Action, y_coords: np.ndarray):
        self.action = action
        self.coords = y_coords[None, ...]
        self.first_letter = np.zeros(1, dtype=np.int64)
        self.dedupe = bool(action.gens) and action.gens[0].kind == "translation"
        if self.dedupe:
            self.coeffs = np.zeros((1, action.n_generators), dtype=np.int64)
            self.seen = {self.coeffs[0].tobytes()}

    def expand(self) -> int:
        """Advance one level; returns the new frontier size."""
        blocks, firsts, coeff_blocks = [], [], []
        for l in self.action.letters():
            mask = self.first_letter != -l
            if not np.any(mask):
                continue
            pts = self.action.apply_letter(l, self.coords[mask])
            if self.dedupe:
                cf = self.coeffs[mask].copy()
                cf[:, abs(l) - 1] += 1 if l > 0 else -1
                keep = []
                for i in range(cf.shape[0]):
                    k = cf[i].tobytes()
                    if k not in self.seen:
                        self.seen.add(k)
                        keep.append(i)
                if not keep:
                    continue
                keep = np.array(keep)
                pts, cf = pts[keep], cf[keep]
                coeff_blocks.append(cf)
            blocks.append(pts)
            firsts.append(np.full(pts.shape[0], l, dtype=np.int64))
        if not blocks:
            self.coords = self.coords[:0]
            return 0
        self.coords = np.concatenate(blocks)
        self.first_letter = np.concatenate(firsts)
        if self.dedupe:
            self.coeffs = np.concatenate(coeff_blocks)
        return self.coords.shape[0]


def warped_distance_exact(action: Action, t: float, x: Point, y: Point, *,
                          word_bound: Optional[int] = None,
                          node_budget: int = DEFAULT_NODE_BUDGET) -> float:
    """min over group words g of ||g|| + t * d_M(x, g y).

    Exact: the search runs over the ball ||g|| < (best cost found so far),
    which the identity term initializes to t * d_M(x, y). If word_bound is
    given and smaller than that natural cap, the result is the documented
    truncation (an upper bound of the true value).
    """
    _require_isometric(action, "warped_distance_exact")
    _require_point(action, x)
    _require_point(action, y)
    if t <= 0:
        raise ValidationError("t must be positive", t=t)
    best = t * distance(x, y)
    if action.n_generators == 0:
        return best
    frontier = _Frontier(action, y.coords)
    visited = 1
    k = 0
    while True:
        k += 1
        if k >= best:
            break
        if word_bound is not None and k > word_bound:
            break
        size = frontier.expand()
        if size == 0:
            break
        visited += size
        if visited > node_budget:
            raise BudgetError(
                f"warped-distance search visited over {node_budget} words; "
                "pass a word_bound to accept truncation",
                node_budget=node_budget, level=k)
        if action.space.kind == "sphere":
            # distance is monotone in the dot product: one arccos per level
            top = float(np.max(frontier.coords @ x.coords))
            dmin = math.acos(max(-1.0, min(1.0, top)))
        else:
            dmin = float(np.min(dist_arrays(action.space, frontier.coords,
                                            x.coords)))
        cost = k + t * dmin
        if cost < best:
            best = cost
    return best


# ---------------------------------------------------------------------------
# discrete surrogate


@dataclass(frozen=True)
class WarpedEdge:
    u: int
    v: int
    weight: float
    kind: str   # "spatial" | "orbital"
    label: str  # generator label for orbital edges, "" for spatial


@dataclass(frozen=True, eq=False)
class WarpedGraph:
    action: Action
    t: float
    net: Net
    edges: tuple[WarpedEdge, ...] = field(repr=False)
    raw_edge_count: int = 0

    @property
    def n(self) -> int:
        return len(self.net.points)

    @cached_property
    def adjacency(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for e in self.edges:
            if e.u == e.v:
                continue
            adj[e.u].append((e.v, e.weight))
            adj[e.v].append((e.u, e.weight))
        return adj


def build_warped_graph(action: Action, t: float, net: Net) -> WarpedGraph:
    """Spatial edges t*d(p_i, p_j) over the net's 2-epsilon pairs; orbital
    edges i -> nearest(net, s p_i) of weight 1 + t*d(s p_i, p_j), symmetrized
    and deduplicated (duplicates keep the smallest weight)."""
    _require_isometric(action, "build_warped_graph")
    if net.space != action.space:
        raise SpaceMismatchError(
            f"net in {net.space} used with an action on {action.space}")
    coords = net.coords
    raw = 0
    chosen: dict[tuple[int, int, str, str], float] = {}
    for (i, j) in net.spatial_pairs:
        w = t * float(dist_arrays(net.space, coords[i], coords[j]))
        key = (min(i, j), max(i, j), "spatial", "")
        raw += 1
        if key not in chosen or w < chosen[key]:
            chosen[key] = w
    for g_idx, gen in enumerate(action.gens):
        for letter, label in ((g_idx + 1, gen.label), (-(g_idx + 1), gen.inverse_label)):
            moved = action.apply_letter(letter, coords)
            for i in range(coords.shape[0]):
                p = make_point(net.space, moved[i])
                j = nearest(net, p)
                w = 1.0 + t * float(dist_arrays(net.space, moved[i], coords[j]))
                key = (min(i, j), max(i, j), "orbital", gen.label)
                raw += 1
                if key not in chosen or w < chosen[key]:
                    chosen[key] = w
    edges = tuple(WarpedEdge(u, v, w, kind, label)
                  for (u, v, kind, label), w in chosen.items())
    graph = WarpedGraph(action, float(t), net, edges, raw_edge_count=raw)
    if not _is_connected(graph):
        warnings.warn("warped graph is disconnected at this net/scale",
                      stacklevel=2)
    return graph


def _is_connected(graph: WarpedGraph) -> bool:
    n = graph.n
    if n == 0:
        return True
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v, _ in graph.adjacency[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == n


def shortest_paths_from(graph: WarpedGraph, source: int) -> list[float]:
    """Dijkstra with a binary heap keyed by (distance, vertex index), so
    outputs are deterministic."""
    n = graph.n
    dist = [math.inf] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = [False] * n
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in graph.adjacency[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def warped_distance_apx(graph: WarpedGraph, i: int, j: int) -> float:
    """Shortest-path distance in the discrete surrogate; returns inf with a
    diagnostic warning when j is unreachable from i."""
    if not (0 <= i < graph.n and 0 <= j < graph.n):
        raise ValidationError("vertex index out of range", i=i, j=j, n=graph.n)
    d = shortest_paths_from(graph, i)[j]
    if math.isinf(d):
        warnings.warn(f"vertex {j} unreachable from {i}", stacklevel=2)
    return d


# ---------------------------------------------------------------------------
# displacement and level comparison


def min_displacement(action: Action, R: int, net, *,
                     budget: int = 500_000) -> float:
    """min over nontrivial reduced words ||g|| <= R and net points x of
    d(x, g x). The identity word is excluded (it would make the minimum 0
    identically); words that merely act as the identity are kept, so the
    value vanishes exactly when a short relation exists.

    Computed on the net, a stand-in for the minimum over the space; the
    displacement function is 2-Lipschitz, so the error is at most twice the
    net's covering radius. Returns inf for the trivial group.
    """
    _require_isometric(action, "min_displacement")
    coords = net.coords if isinstance(net, Net) else np.asarray(net)
    best = math.inf
    for w, elem, ops in iter_ball_elements(action, R, budget=budget):
        if not w:
            continue
        m = float(np.min(ops.displacement(elem, coords)))
        if m < best:
            best = m
    return best


@dataclass(frozen=True)
class LevelCompareRecord:
    x: Point
    y: Point
    d_s: float
    d_t: float

    @property
    def monotone(self) -> bool:
        return self.d_s <= self.d_t + 1e-12


@dataclass(frozen=True)
class LevelCompareReport:
    s: float
    t: float
    records: tuple[LevelCompareRecord, ...]

    @property
    def all_monotone(self) -> bool:
        return all(r.monotone for r in self.records)


def level_compare(action: Action, net: Net, s: float, t: float,
                  pairs, *, seed: int = 0,
                  word_bound: Optional[int] = None) -> LevelCompareReport:
    """Exact warped distances of sampled pairs at levels s <= t; the metric
    is termwise monotone in the level, so d_s <= d_t for every pair."""
    if not (0 < s <= t):
        raise ValidationError("levels must satisfy 0 < s <= t", s=s, t=t)
    if isinstance(pairs, int):
        rng = np.random.default_rng([seed, 7])
        pts = net.points
        idx = rng.integers(0, len(pts), size=(pairs, 2))
        sampled = [(pts[a], pts[b]) for a, b in idx]
    else:
        sampled = list(pairs)
    records = []
    for x, y in sampled:
        d_s = warped_distance_exact(action, s, x, y, word_bound=word_bound)
        d_t = warped_distance_exact(action, t, x, y, word_bound=word_bound)
        records.append(LevelCompareRecord(x, y, d_s, d_t))
    return LevelCompareReport(float(s), float(t), tuple(records))
