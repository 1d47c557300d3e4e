"""Finite lattices, the lattice Laplacian and its heat kernel.

Sites are labelled ``0 .. n_sites - 1`` (row-major for grids).  Edges are
stored as ``(i, j)`` with ``i < j``; this lexicographic orientation is the
one used by the kick operators, which distinguish the two endpoints.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse.csgraph import shortest_path

__all__ = [
    "Lattice",
    "HeatKernel",
    "build_lattice",
    "parse_lattice",
    "graph_distance",
    "floored_distance",
    "laplacian_apply",
    "heat_kernel",
    "evolve_heat",
    "propagate_heat",
]


@dataclass(frozen=True)
class Lattice:
    kind: str
    shape: tuple[int, ...]
    boundary: str
    edges: tuple[tuple[int, int], ...]
    n_sites: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_sites", math.prod(self.shape))
        for i, j in self.edges:
            if not (0 <= i < j < self.n_sites):
                raise ValueError(f"edge {(i, j)} is not canonical or out of range")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edge")
        if not np.isfinite(self.distances).all():
            raise ValueError("lattice is not connected")

    @property
    def sites(self) -> range:
        return range(self.n_sites)

    @property
    def descriptor(self) -> str:
        parts = [self.kind, *map(str, self.shape)]
        if self.boundary == "periodic":
            parts.append("periodic")
        return ":".join(parts)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: k for k, e in enumerate(self.edges)}

    @cached_property
    def adjacency(self) -> dict[int, tuple[int, ...]]:
        nbrs: dict[int, list[int]] = {i: [] for i in self.sites}
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return {i: tuple(sorted(v)) for i, v in nbrs.items()}

    @cached_property
    def degree(self) -> np.ndarray:
        return np.array([len(self.adjacency[i]) for i in self.sites])

    @cached_property
    def laplacian(self) -> np.ndarray:
        """Dense matrix of ``(Δf)(i) = Σ_{j~i} (f(j) - f(i))``."""
        lap = np.zeros((self.n_sites, self.n_sites))
        for i, j in self.edges:
            lap[i, j] += 1.0
            lap[j, i] += 1.0
        lap[np.diag_indices(self.n_sites)] = -self.degree
        lap.setflags(write=False)
        return lap

    @cached_property
    def distances(self) -> np.ndarray:
        adj = np.abs(self.laplacian_pattern())
        d = shortest_path(adj, unweighted=True, directed=False)
        d.setflags(write=False)
        return d

    def laplacian_pattern(self) -> np.ndarray:
        adj = np.zeros((self.n_sites, self.n_sites))
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1.0
        return adj

    def canonical_edge(self, edge) -> tuple[int, int]:
        i, j = (int(v) for v in edge)
        e = (min(i, j), max(i, j))
        if e not in self.edge_index:
            raise KeyError(f"unknown edge {tuple(edge)}")
        return e


def _check_site(lat: Lattice, i) -> int:
    if isinstance(i, (bool, np.bool_)) or not isinstance(i, (int, np.integer)):
        raise TypeError(f"site must be an integer, got {i!r}")
    if not 0 <= i < lat.n_sites:
        raise KeyError(f"unknown site {i}")
    return int(i)


def build_lattice(kind: str, *shape: int, boundary: str = "open") -> Lattice:
    """Build ``chain(n)`` or ``grid(nx, ny)`` with open or periodic boundary."""
    if boundary not in ("open", "periodic"):
        raise ValueError(f"boundary must be 'open' or 'periodic', got {boundary!r}")
    periodic = boundary == "periodic"
    if kind == "chain":
        if len(shape) != 1:
            raise ValueError("chain takes one size")
        (n,) = shape
        if n < 2:
            raise ValueError("chain needs at least 2 sites")
        if periodic and n == 2:
            raise ValueError("periodic chain of 2 sites would double the edge")
        edges = {(i, i + 1) for i in range(n - 1)}
        if periodic:
            edges.add((0, n - 1))
    elif kind == "grid":
        if len(shape) != 2:
            raise ValueError("grid takes two sizes")
        nx, ny = shape
        if nx < 2 or ny < 2:
            raise ValueError("grid needs at least 2 sites per direction")
        if periodic and (nx == 2 or ny == 2):
            raise ValueError("periodic grid of width 2 would double edges")
        edges = set()
        for r in range(ny):
            for c in range(nx):
                i = r * nx + c
                if c + 1 < nx:
                    edges.add((i, i + 1))
                elif periodic:
                    edges.add((r * nx, i))
                if r + 1 < ny:
                    edges.add((i, i + nx))
                elif periodic:
                    edges.add((c, i))
    else:
        raise ValueError(f"unknown lattice kind {kind!r}")
    return Lattice(kind, tuple(int(s) for s in shape), boundary, tuple(sorted(edges)))


_DESCRIPTOR = re.compile(r"^(chain):(\d+)(?::(open|periodic))?$|^(grid):(\d+):(\d+)(?::(open|periodic))?$")


def parse_lattice(text: str) -> Lattice:
    """Parse ``chain:N[:periodic]`` or ``grid:NX:NY[:periodic]``."""
    m = _DESCRIPTOR.match(text.strip())
    if m is None:
        raise ValueError(f"bad lattice descriptor {text!r}")
    if m.group(1):
        return build_lattice("chain", int(m.group(2)), boundary=m.group(3) or "open")
    return build_lattice("grid", int(m.group(5)), int(m.group(6)), boundary=m.group(7) or "open")


def _endpoints(lat: Lattice, x) -> tuple[int, ...]:
    if isinstance(x, tuple):
        return lat.canonical_edge(x)
    return (_check_site(lat, x),)


def graph_distance(lat: Lattice, a, b) -> int:
    """Shortest-path distance between sites or edges (tuples).

    An edge is as close as the nearer of its endpoints.
    """
    pa, pb = _endpoints(lat, a), _endpoints(lat, b)
    return int(min(lat.distances[i, j] for i in pa for j in pb))


def floored_distance(lat: Lattice, a, b) -> int:
    """``max(1, d(a, b))``."""
    return max(1, graph_distance(lat, a, b))


def laplacian_apply(lat: Lattice, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != lat.n_sites:
        raise ValueError("field length does not match lattice")
    return f @ lat.laplacian.T


@dataclass(frozen=True)
class HeatKernel:
    mu: float
    matrix: np.ndarray

    def __matmul__(self, f):
        return self.matrix @ f


def _check_mu(mu) -> float:
    mu = float(mu)
    if not mu >= 0.0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    return mu


def heat_kernel(lat: Lattice, mu: float) -> HeatKernel:
    """Green's function ``exp(mu Δ)`` as a dense matrix.

    The Laplacian is shifted by the maximal degree so the Taylor series has
    only nonnegative terms; every entry, including the ones of order
    ``mu**d(i, j)``, then comes out with full relative precision.
    """
    mu = _check_mu(mu)
    n = lat.n_sites
    if mu == 0.0:
        return HeatKernel(0.0, np.eye(n))
    dmax = float(lat.degree.max())
    shifted = lat.laplacian + dmax * np.eye(n)
    squarings = max(0, math.ceil(math.log2(mu * 2 * dmax / 0.5))) if mu * 2 * dmax > 0.5 else 0
    step = mu / 2**squarings
    b = step * shifted
    term = np.eye(n)
    total = np.eye(n)
    k = 0
    while True:
        k += 1
        term = term @ b / k
        total += term
        if k >= n and np.all(term <= 1e-17 * total):
            break
    g = math.exp(-step * dmax) * total
    for _ in range(squarings):
        g = g @ g
    g = 0.5 * (g + g.T)
    return HeatKernel(mu, g)


def evolve_heat(lat: Lattice, f0, mu: float) -> np.ndarray:
    """Solve ``∂φ/∂μ = Δφ`` from ``f0`` up to ``mu``."""
    f0 = np.asarray(f0, dtype=float)
    if f0.shape != (lat.n_sites,):
        raise ValueError("field length does not match lattice")
    return heat_kernel(lat, mu).matrix @ f0


def propagate_heat(lat: Lattice, f, t) -> np.ndarray:
    """Batched heat flow: row ``r`` of ``f`` is evolved for time ``t[r]``.

    Uniformized Taylor series; positivity of nonnegative rows is exact.
    """
    f = np.asarray(f, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), f.shape[:-1])
    if np.any(t < 0):
        raise ValueError("negative propagation time")
    dmax = float(lat.degree.max())
    shifted_t = (lat.laplacian + dmax * np.eye(lat.n_sites)).T
    x_max = float(t.max(initial=0.0)) * dmax
    if x_max == 0.0:
        return f.copy()
    substeps = max(1, math.ceil(x_max / 20.0))
    h = t / substeps
    n_terms = max(lat.n_sites + 1, math.ceil(x_max / substeps + 8 * math.sqrt(x_max / substeps) + 30))
    decay = np.exp(-h * dmax)[..., None]
    out = f
    for _ in range(substeps):
        term = out
        acc = out.copy()
        for k in range(1, n_terms + 1):
            term = (term @ shifted_t) * (h / k)[..., None]
            acc += term
        out = acc * decay
    return out
