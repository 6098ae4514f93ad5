"""Bounded-degree approximating graphs for level sets, spectral gaps of the
normalized Laplacian, Cheeger bounds, and expansion profiles across levels.

The dense symmetric eigensolver is the oracle of record; the iterative path
is an independently written deflated Lanczos with full reorthogonalization,
cross-checked against the dense route at small sizes.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .actions import Action
from .errors import (BudgetError, ConelabError, EigensolverError,
                     ValidationError)
from .spaces import Net, dist_arrays, epsilon_net, make_point
from .warped import DEFAULT_NODE_BUDGET

DENSE_SIZE_LIMIT = 3000
CHEEGER_SIZE_LIMIT = 20


@dataclass(frozen=True, eq=False)
class LevelGraph:
    """Simple undirected graph: sorted edge list, no loops or multi-edges."""

    n: int
    edges: tuple[tuple[int, int], ...]
    provenance: Optional[dict] = None

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        d.setflags(write=False)
        return d

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n else 0

    @cached_property
    def adjacency_lists(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = np.zeros(self.n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in self.adjacency_lists[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return bool(seen.all())


def make_graph(n: int, edges, provenance: Optional[dict] = None) -> LevelGraph:
    """Normalize an edge collection: orient u < v, drop loops, deduplicate."""
    cleaned = sorted({(min(u, v), max(u, v)) for u, v in edges if u != v})
    for u, v in cleaned:
        if not (0 <= u < n and 0 <= v < n):
            raise ValidationError("edge endpoint out of range", edge=(u, v), n=n)
    return LevelGraph(n, tuple(cleaned), provenance)


def _nearest_indices(net: Net, coords: np.ndarray) -> np.ndarray:
    if net.space.kind == "sphere":
        return np.argmax(coords @ net.coords.T, axis=1)
    if net.space.kind == "torus":
        out = np.empty(coords.shape[0], dtype=np.int64)
        for lo in range(0, coords.shape[0], 1024):
            blk = coords[lo:lo + 1024]
            d = np.abs(blk[:, None, :] - net.coords[None, :, :])
            d = np.minimum(d, 1.0 - d)
            out[lo:lo + 1024] = np.argmin(np.sum(d * d, axis=2), axis=1)
        return out
    return np.array([np.argmin(dist_arrays(net.space, net.coords, c))
                     for c in coords], dtype=np.int64)


def approximating_graph(action: Action, net: Net, t: float) -> LevelGraph:
    """Vertices are net points (Voronoi cell representatives): spatial edges
    join pairs within 2*epsilon, orbital edges join i to the nearest net
    point of each generator translate of p_i."""
    if net.space != action.space:
        raise ValidationError("net and action live on different spaces",
                              net=str(net.space), action=str(action.space))
    recommended = 1.0 / t
    if not 0.4 <= net.epsilon / recommended <= 2.5:
        warnings.warn(
            f"net epsilon {net.epsilon:.4g} is far from the recommended "
            f"1/t = {recommended:.4g}", stacklevel=2)
    edges = set(net.spatial_pairs)
    coords = net.coords
    for i in range(action.n_generators):
        for letter in (i + 1, -(i + 1)):
            targets = _nearest_indices(net, action.apply_letter(letter, coords))
            for u, v in enumerate(targets):
                if u != int(v):
                    edges.add((min(u, int(v)), max(u, int(v))))
    return make_graph(len(net.points), edges,
                      provenance={"t": t, "epsilon": net.epsilon,
                                  "space": net.space.kind,
                                  "generators": action.n_generators})


# ---------------------------------------------------------------------------
# spectra


def normalized_laplacian(g: LevelGraph) -> np.ndarray:
    """I - D^{-1/2} A D^{-1/2} as a dense symmetric matrix."""
    if g.n == 0:
        raise ValidationError("empty graph")
    deg = g.degrees
    if np.any(deg == 0):
        raise ValidationError("graph has an isolated vertex",
                              vertex=int(np.argmin(deg)))
    a = np.zeros((g.n, g.n))
    for u, v in g.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    s = 1.0 / np.sqrt(deg)
    lap = np.eye(g.n) - (a * s[None, :]) * s[:, None]
    return lap


def laplacian_spectrum(g: LevelGraph) -> np.ndarray:
    """All eigenvalues of the normalized Laplacian, ascending (dense mode)."""
    if g.n > DENSE_SIZE_LIMIT:
        raise BudgetError(
            f"dense mode supports up to {DENSE_SIZE_LIMIT} vertices; "
            "use iterative mode", n=g.n)
    return np.linalg.eigvalsh(normalized_laplacian(g))


class _NormalizedAdjacency:
    """Matrix-free D^{-1/2} A D^{-1/2} with fixed-order accumulation."""

    def __init__(self, g: LevelGraph):
        deg = g.degrees
        if np.any(deg == 0):
            raise ValidationError("graph has an isolated vertex",
                                  vertex=int(np.argmin(deg)))
        e = np.array(g.edges, dtype=np.int64).reshape(-1, 2)
        self.u = e[:, 0]
        self.v = e[:, 1]
        s = 1.0 / np.sqrt(deg)
        self.c = s[self.u] * s[self.v]
        self.n = g.n

    def __call__(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros_like(x)
        np.add.at(y, self.u, self.c * x[self.v])
        np.add.at(y, self.v, self.c * x[self.u])
        return y


def _lanczos_second_eigenvalue(g: LevelGraph, tol: float,
                               max_iter: Optional[int] = None) -> tuple[float, dict]:
    """lambda_2 via Lanczos on the normalized adjacency with the known top
    eigenvector D^{1/2} 1 deflated and full reorthogonalization."""
    op = _NormalizedAdjacency(g)
    n = g.n
    phi0 = np.sqrt(g.degrees.astype(float))
    phi0 /= np.linalg.norm(phi0)
    rng = np.random.default_rng(0x5EED)
    q = rng.standard_normal(n)
    q -= phi0 * (phi0 @ q)
    q /= np.linalg.norm(q)
    kmax = max_iter if max_iter is not None else min(n - 1, 600)
    basis = np.zeros((kmax, n))
    alphas: list[float] = []
    betas: list[float] = []
    theta = None
    for k in range(kmax):
        basis[k] = q
        w = op(q)
        alpha = float(q @ w)
        alphas.append(alpha)
        w -= alpha * q
        if k > 0:
            w -= betas[-1] * basis[k - 1]
        # full reorthogonalization, including against the deflated vector
        w -= phi0 * (phi0 @ w)
        w -= basis[:k + 1].T @ (basis[:k + 1] @ w)
        beta = float(np.linalg.norm(w))
        tri = np.diag(alphas)
        if len(betas):
            off = np.array(betas)
            tri += np.diag(off, 1) + np.diag(off, -1)
        evals, evecs = np.linalg.eigh(tri)
        theta = float(evals[-1])
        residual = abs(beta * evecs[-1, -1])
        if residual <= tol * 0.25 or beta < 1e-14:
            return 1.0 - theta, {"iterations": k + 1, "residual": residual}
        betas.append(beta)
        q = w / beta
    raise EigensolverError(
        f"Lanczos did not reach tolerance {tol} in {kmax} iterations",
        best_estimate=1.0 - (theta if theta is not None else 0.0),
        residual=float(betas[-1]) if betas else float("nan"))


def spectral_gap(g: LevelGraph, mode: str = "dense", tol: float = 1e-8) -> float:
    """lambda_2 of the normalized Laplacian. A disconnected graph returns 0
    with a diagnostic warning (lambda_2 = 0 iff disconnected)."""
    gap, _ = spectral_gap_report(g, mode, tol)
    return gap


def spectral_gap_report(g: LevelGraph, mode: str = "dense",
                        tol: float = 1e-8) -> tuple[float, dict]:
    if g.n < 2:
        raise ValidationError("need at least two vertices", n=g.n)
    if not g.is_connected():
        warnings.warn("graph is disconnected; spectral gap is 0", stacklevel=2)
        return 0.0, {"disconnected": True}
    if mode == "dense":
        spectrum = laplacian_spectrum(g)
        return float(spectrum[1]), {"mode": "dense", "n": g.n}
    if mode == "iterative":
        gap, info = _lanczos_second_eigenvalue(g, tol)
        info["mode"] = "iterative"
        return gap, info
    raise ValidationError(f"unknown mode {mode!r}")


def cheeger_bounds(gap: float) -> tuple[float, float]:
    """(gap/2, sqrt(2 gap)): the standard sandwich for the Cheeger constant."""
    if not -1e-9 <= gap <= 2 + 1e-9:
        raise ValidationError("gap must lie in [0, 2]", gap=gap)
    gap = min(max(gap, 0.0), 2.0)
    return gap / 2.0, math.sqrt(2.0 * gap)


def brute_force_cheeger(g: LevelGraph) -> float:
    """Exact Cheeger constant by enumeration of all vertex subsets with at
    most half the volume. Guarded to 20 vertices."""
    if g.n > CHEEGER_SIZE_LIMIT:
        raise BudgetError(
            f"exact Cheeger is limited to {CHEEGER_SIZE_LIMIT} vertices", n=g.n)
    if g.n < 2 or not g.edges:
        raise ValidationError("need at least one edge", n=g.n)
    masks = np.arange(1, 2 ** g.n - 1, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(g.n)) & 1
    vol = bits @ g.degrees
    total = int(g.degrees.sum())
    boundary = np.zeros(masks.shape[0], dtype=np.int64)
    for u, v in g.edges:
        boundary += bits[:, u] ^ bits[:, v]
    ok = (vol > 0) & (2 * vol <= total)
    return float(np.min(boundary[ok] / vol[ok]))


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class ProfileRecord:
    t: float
    epsilon: float
    n_vertices: int
    max_degree: int
    lambda2: float
    runtime_s: float
    error: Optional[str] = None


def expansion_profile(action: Action, levels: Sequence[float],
                      epsilon_rule: Optional[Callable[[float], float]] = None,
                      mode: str = "dense", *, net_seed: int = 0,
                      tol: float = 1e-8, point_budget: int = 6000,
                      threads: int = 1) -> tuple[ProfileRecord, ...]:
    """One record (t, epsilon, |V|, max degree, lambda_2) per level; errors
    are attached to their record and the profile continues. Results are
    ordered by level regardless of thread count."""
    levels = [float(t) for t in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValidationError("levels must be strictly ascending", levels=levels)
    rule = epsilon_rule if epsilon_rule is not None else (lambda t: 1.0 / t)

    def run(t: float) -> ProfileRecord:
        start = time.perf_counter()
        eps = float(rule(t))
        try:
            net = epsilon_net(action.space, eps, seed=net_seed,
                              point_budget=point_budget)
            graph = approximating_graph(action, net, t)
            gap = spectral_gap(graph, mode=mode, tol=tol)
            return ProfileRecord(t, eps, len(net.points), graph.max_degree,
                                 gap, time.perf_counter() - start)
        except ConelabError as exc:
            return ProfileRecord(t, eps, 0, 0, float("nan"),
                                 time.perf_counter() - start, error=str(exc))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return tuple(pool.map(run, levels))
    return tuple(run(t) for t in levels)
