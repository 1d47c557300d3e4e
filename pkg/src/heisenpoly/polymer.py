"""Polymer and superpolymer expansion of the ratios

    ⟨Ψ_μ, Ψ_μ⟩ / ⟨Ψ^AP, Ψ^AP⟩      and      ⟨Ψ_μ, AΨ_μ⟩ / ⟨Ψ^AP, AΨ^AP⟩.

Both sides of the inner product are expanded with the splitting series.  A
kick ("vertex") on the bra side is a *left* vertex, on the ket side a
*right* vertex.  Dividing by the product-state norm, site ``i`` contributes
``1 + X_i`` with

    X_i = [c1 (δL + δR) + c2 δL δR] / N_i,

where ``δL``/``δR`` are the deviations of the kicked fields from the plain
heat field at ``i`` (each a sum over the i-lines through the vertices) and
``c1``, ``c2``, ``N_i`` come from the local up/down weights.

A superpolymer is fixed by its left edges and their vertex counts, its
right edges and counts, and its sites.  Its activity sums every connected
line structure on those particles.  It is computed from the *support
weight* (all line structures, connected or not; each ``δ`` obtained from
one kicked evolution) by removing the products of activities of every
splitting of the particles into smaller superpolymers.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Lattice, _check_mu, evolve_heat, propagate_heat
from .quantum import ObservableA
from .splitting import KINDS, BudgetExceeded, kicked_delta, op_apply, ordered_simplex_rule, reduce_kinds

__all__ = [
    "Particle",
    "ILine",
    "Superpolymer",
    "Activity",
    "ActivityEngine",
    "m_function",
    "r_line_value",
    "line_sum",
    "superpolymer_line_sum",
    "activity",
    "enumerate_line_sum",
    "compatible",
    "enumerate_superpolymers",
    "set_partitions",
    "ursell_coefficient",
    "partition_sum",
    "log_partition_sum",
    "cluster_ratio",
    "cluster_log_ratio",
    "bound_probe",
]

Edge = tuple[int, int]


@dataclass(frozen=True, order=True)
class Particle:
    """A left vertex, right vertex or site."""

    kind: str
    edge: Edge | None = None
    ordinal: int | None = None
    site: int | None = None

    def __post_init__(self):
        if self.kind == "site":
            if self.site is None or self.edge is not None:
                raise ValueError("a site particle carries only a site")
        elif self.kind in ("left", "right"):
            if self.edge is None or self.ordinal is None or self.ordinal < 1:
                raise ValueError("a vertex particle needs an edge and an ordinal >= 1")
        else:
            raise ValueError(f"unknown particle kind {self.kind!r}")

    @classmethod
    def at_site(cls, i: int) -> "Particle":
        return cls("site", site=int(i))

    @classmethod
    def vertex(cls, side: str, edge: Edge, ordinal: int = 1) -> "Particle":
        return cls(side, edge=(min(edge), max(edge)), ordinal=ordinal)


@dataclass(frozen=True)
class ILine:
    """The vertex edges an i-line passes through.

    Right lines are listed latest vertex first, left lines earliest first.
    """

    site: int
    side: str
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")


def _freeze_counts(counts) -> tuple[tuple[Edge, int], ...]:
    if counts is None:
        return ()
    items = counts.items() if isinstance(counts, dict) else counts
    out = {}
    for e, n in items:
        e = (min(e), max(e))
        if int(n) < 1:
            raise ValueError("vertex counts must be >= 1")
        out[e] = out.get(e, 0) + int(n)
    return tuple(sorted(out.items()))


@dataclass(frozen=True, order=True)
class Superpolymer:
    """Edge multiplicities on each side plus a site set.

    ``left`` and ``right`` map edges to vertex counts; ``sites`` is the set
    of sites whose local inner products the lines feed.
    """

    size: int = field(init=False, compare=True)
    left: tuple[tuple[Edge, int], ...] = ()
    right: tuple[tuple[Edge, int], ...] = ()
    sites: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "left", _freeze_counts(self.left))
        object.__setattr__(self, "right", _freeze_counts(self.right))
        object.__setattr__(self, "sites", tuple(sorted({int(i) for i in self.sites})))
        if not self.sites:
            raise ValueError("a superpolymer needs at least one site")
        if not (self.left or self.right):
            raise ValueError("no site can carry a line without vertices")
        n_vertices = sum(n for _, n in self.left) + sum(n for _, n in self.right)
        object.__setattr__(self, "size", n_vertices + len(self.sites))

    @classmethod
    def make(cls, left=None, right=None, sites=()) -> "Superpolymer":
        return cls(left=left or (), right=right or (), sites=tuple(sites))

    @property
    def n_vertices(self) -> int:
        return self.size - len(self.sites)

    @property
    def units(self) -> tuple:
        """Edge-sides and sites; every particle belongs to exactly one."""
        return tuple(("left", e, n) for e, n in self.left) + tuple(("right", e, n) for e, n in self.right) + tuple(
            ("site", i) for i in self.sites
        )

    @classmethod
    def from_units(cls, units) -> "Superpolymer":
        left = [(u[1], u[2]) for u in units if u[0] == "left"]
        right = [(u[1], u[2]) for u in units if u[0] == "right"]
        sites = [u[1] for u in units if u[0] == "site"]
        return cls(left=tuple(left), right=tuple(right), sites=tuple(sites))

    def vertex_edges(self, side: str) -> tuple[Edge, ...]:
        """Edge of every vertex on ``side``, repeated by multiplicity."""
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        counts = self.left if side == "left" else self.right
        return tuple(e for e, n in counts for _ in range(n))

    def particles(self) -> frozenset[Particle]:
        out = {Particle.at_site(i) for i in self.sites}
        for side, counts in (("left", self.left), ("right", self.right)):
            for e, n in counts:
                out.update(Particle.vertex(side, e, k) for k in range(1, n + 1))
        return frozenset(out)

    def contains(self, p: Particle) -> bool:
        if p.kind == "site":
            return p.site in self.sites
        counts = dict(self.left if p.kind == "left" else self.right)
        return counts.get(p.edge, 0) >= p.ordinal

    def check_lattice(self, lat: Lattice) -> None:
        for i in self.sites:
            if not 0 <= i < lat.n_sites:
                raise KeyError(f"site {i} not in lattice")
        for e, _ in self.left + self.right:
            lat.canonical_edge(e)


@dataclass(frozen=True)
class Activity:
    value: float
    for_observable: bool

    def __float__(self):
        return self.value


def compatible(sp1: Superpolymer, sp2: Superpolymer) -> bool:
    """Hard core: compatible iff the particle sets are disjoint."""
    if set(sp1.sites) & set(sp2.sites):
        return False
    if {e for e, _ in sp1.left} & {e for e, _ in sp2.left}:
        return False
    return not ({e for e, _ in sp1.right} & {e for e, _ in sp2.right})


# local weights ---------------------------------------------------------------


def _local_coefficients(phi: np.ndarray, w_up: np.ndarray, w_down: np.ndarray):
    c1 = w_up * phi - w_down * (1.0 - phi)
    c2 = w_up + w_down
    norm = w_up * phi**2 + w_down * (1.0 - phi) ** 2
    return c1, c2, norm


def m_function(case: str, in_k: bool, phi_i: float, x: float, y: float, alpha: float | None = None) -> float:
    """Local inner-product weight at a site fed by a left value ``x`` and/or right value ``y``.

    ``case`` is ``"interior"`` (both sides), ``"right-only"`` or ``"left-only"``.
    Sites in ``K`` weight the up component by ``1 + alpha`` and the down
    component by ``alpha``.
    """
    if in_k:
        if alpha is None or not alpha > 0:
            raise ValueError("alpha must be > 0 for sites in K")
        w_up, w_down = 1.0 + alpha, alpha
    else:
        w_up = w_down = 1.0
    c1, c2, norm = _local_coefficients(np.float64(phi_i), w_up, w_down)
    assert norm > 0, "local norm vanished"
    if case == "interior":
        return float(c2 * x * y / norm)
    if case == "right-only":
        return float(c1 * y / norm)
    if case == "left-only":
        return float(c1 * x / norm)
    raise ValueError(f"unknown case {case!r}")


# lines -----------------------------------------------------------------------


def r_line_value(lat: Lattice, line: ILine, times, kinds, phi0, mu: float) -> float:
    """Iterated convolution ``(g Op g Op ... g Op φ)`` of one i-line at its site.

    ``times`` and ``kinds`` follow ``line.edges``.  An empty line is 1.
    """
    mu = _check_mu(mu)
    if not line.edges:
        return 1.0
    times = [float(t) for t in times]
    kinds = list(kinds)
    if len(times) != len(line.edges) or len(kinds) != len(line.edges):
        raise ValueError("one time and one kind per vertex of the line")
    edges = list(line.edges)
    if line.side == "left":
        edges, times, kinds = edges[::-1], times[::-1], kinds[::-1]
    if any(t2 >= t1 for t1, t2 in zip(times, times[1:])):
        raise ValueError("vertex times must be monotone along the line")
    if times[0] >= mu or times[-1] <= 0:
        raise ValueError("vertex times must lie in (0, mu)")
    f = evolve_heat(lat, phi0, times[-1])
    for k in range(len(edges) - 1, -1, -1):
        f = op_apply(edges[k], kinds[k], f, lat)
        later = times[k - 1] if k > 0 else mu
        f = propagate_heat(lat, f, later - times[k])
    return float(f[line.site])


def line_sum(lat: Lattice, site: int, edges, kinds, times, phi0, mu: float) -> float:
    """Sum of all i-lines through a vertex set, at ``site``.

    Equal to the kicked field minus the plain heat field there, so it is
    obtained from a single kicked evolution instead of enumerating lines.
    """
    mu = _check_mu(mu)
    if len(edges) == 0:
        raise ValueError("vertex set must be nonempty")
    codes = [[KINDS.index(k) if isinstance(k, str) else int(k) for k in kinds]]
    _, delta = kicked_delta(lat, phi0, edges, np.array(codes), np.array([times], dtype=float), mu)
    return float(delta[0, site])


def superpolymer_line_sum(lat: Lattice, sp: "Superpolymer", site: int, side: str, times, kinds, phi0, mu: float) -> float:
    """:func:`line_sum` over the vertices of one side of ``sp``.

    ``times`` and ``kinds`` follow :meth:`Superpolymer.vertex_edges`.
    """
    edges = sp.vertex_edges(side)
    if not edges:
        raise ValueError(f"superpolymer has no {side} vertices")
    return line_sum(lat, site, edges, kinds, times, phi0, mu)


def enumerate_line_sum(lat: Lattice, site: int, edges, kinds, times, phi0, mu: float) -> float:
    """Brute-force counterpart of :func:`superpolymer_line_sum`."""
    order = sorted(range(len(edges)), key=lambda v: -float(times[v]))
    total = 0.0
    for r in range(1, len(order) + 1):
        for subset in itertools.combinations(order, r):
            line = ILine(site, "right", tuple(edges[v] for v in subset))
            total += r_line_value(lat, line, [times[v] for v in subset], [kinds[v] for v in subset], phi0, mu)
    return total


# activities --------------------------------------------------------------------


def _interleavings(counts: tuple[tuple[Edge, int], ...]) -> list[tuple[Edge, ...]]:
    """Distinct time orderings of a multiset of edges."""
    pool = [e for e, n in counts for _ in range(n)]
    return sorted(set(itertools.permutations(pool)))


def set_partitions(items):
    """All set partitions of a list, blocks in first-appearance order."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1 :]


@dataclass
class _SideSamples:
    sequences: list[tuple[Edge, ...]]
    delta: np.ndarray  # (nodes, 4**n, sites)
    weights: np.ndarray  # (nodes,)
    n: int


class ActivityEngine:
    """Activities of superpolymers for one initial state, ``mu`` and observable.

    Norm activities ``z`` and observable activities ``z^A`` are produced
    together; both use the same kicked evolutions.  Results are cached per
    superpolymer.
    """

    def __init__(self, lat: Lattice, phi0, mu: float, obs: ObservableA | None = None, nodes: int = 8, max_vertices: int = 3):
        self.lattice = lat
        self.mu = _check_mu(mu)
        self.phi0 = np.array(phi0, dtype=float)
        if self.phi0.shape != (lat.n_sites,) or np.any(self.phi0 < 0) or np.any(self.phi0 > 1):
            raise ValueError("phi0 must be a field on the lattice with values in [0, 1]")
        self.obs = obs
        self.nodes = nodes
        self.max_vertices = max_vertices
        self.phi_mu = evolve_heat(lat, self.phi0, self.mu)
        ones = np.ones(lat.n_sites)
        self._coef = {False: _local_coefficients(self.phi_mu, ones, ones)}
        if obs is not None:
            w_up, w_down = ones.copy(), ones.copy()
            k = sorted(obs.k_set)
            w_up[k] = 1.0 + obs.alpha
            w_down[k] = obs.alpha
            self._coef[True] = _local_coefficients(self.phi_mu, w_up, w_down)
        self._sides: dict = {}
        self._support: dict = {}
        self._activity: dict = {}

    # sampling
    def _side(self, counts) -> _SideSamples:
        if counts in self._sides:
            return self._sides[counts]
        n = sum(c for _, c in counts)
        sites = self.lattice.n_sites
        if n == 0:
            out = _SideSamples([()], np.zeros((1, 1, sites)), np.ones(1), 0)
        elif self.mu == 0.0:
            out = _SideSamples([], np.zeros((0, 4**n, sites)), np.zeros(0), n)
        else:
            times, weights = ordered_simplex_rule(n, self.mu, self.nodes)
            kt = np.array(list(itertools.product(range(4), repeat=n)))
            rows_t = np.repeat(times, len(kt), axis=0)
            rows_k = np.tile(kt, (len(times), 1))
            seqs = _interleavings(counts)
            deltas = []
            for seq in seqs:
                _, d = kicked_delta(self.lattice, self.phi0, seq, rows_k, rows_t, self.mu)
                deltas.append(d.reshape(len(times), len(kt), sites))
            out = _SideSamples(seqs, np.concatenate(deltas), np.tile(weights, len(seqs)), n)
        self._sides[counts] = out
        return out

    def _check_budget(self, sp: Superpolymer):
        if sp.n_vertices > self.max_vertices:
            raise BudgetExceeded(f"{sp.n_vertices} vertices exceeds the budget of {self.max_vertices}")

    def _integrate(self, left: _SideSamples, right: _SideSamples, site_factors) -> float:
        # site_factors: (site, array of shape (qL, kL, qR, kR)) pairs
        prod = None
        for i, fac in site_factors:
            prod = fac if prod is None else prod * fac
        ql, kl, qr, kr = prod.shape
        vals = prod.reshape((ql,) + (4,) * left.n + (qr,) + (4,) * right.n)
        vals = reduce_kinds(vals, right.n, axis=left.n + 2)
        vals = reduce_kinds(vals, left.n, axis=1)
        return float(left.weights @ vals @ right.weights)

    def support_weight(self, sp: Superpolymer) -> tuple[float, float]:
        """Signed, integrated ``Π_{i∈sites} X_i`` over all line structures: ``(norm, observable)``."""
        if sp in self._support:
            return self._support[sp]
        self._check_budget(sp)
        sp.check_lattice(self.lattice)
        left, right = self._side(sp.left), self._side(sp.right)
        if len(left.weights) == 0 or len(right.weights) == 0:
            res = (0.0, 0.0)
        else:
            dl = left.delta[:, :, None, None, :]
            dr = right.delta[None, None, :, :, :]
            res = []
            for observable in (False, True):
                if observable and self.obs is None:
                    res.append(res[0])
                    continue
                c1, c2, norm = self._coef[observable]
                factors = [
                    (i, (c1[i] * (dl[..., i] + dr[..., i]) + c2[i] * dl[..., i] * dr[..., i]) / norm[i])
                    for i in sp.sites
                ]
                res.append(self._integrate(left, right, factors))
            res = tuple(res)
        self._support[sp] = res
        return res

    def activities(self, sp: Superpolymer) -> tuple[float, float]:
        """Connected activities ``(z, z^A)``."""
        if sp in self._activity:
            return self._activity[sp]
        z = list(self.support_weight(sp))
        for part in set_partitions(sp.units):
            if len(part) < 2:
                continue
            if not all(any(u[0] == "site" for u in b) and any(u[0] != "site" for u in b) for b in part):
                continue
            prods = [1.0, 1.0]
            for block in part:
                za = self.activities(Superpolymer.from_units(block))
                prods[0] *= za[0]
                prods[1] *= za[1]
            z[0] -= prods[0]
            z[1] -= prods[1]
        self._activity[sp] = tuple(z)
        return self._activity[sp]

    def activity(self, sp: Superpolymer, for_observable: bool = False) -> Activity:
        if for_observable and self.obs is None:
            raise ValueError("engine has no observable")
        return Activity(self.activities(sp)[int(for_observable)], for_observable)

    # brute-force oracle
    def _line_values(self, seq: tuple[Edge, ...], subset: tuple[int, ...]) -> np.ndarray:
        """Line value at every site for the vertices ``subset`` of ``seq``; shape (nodes, 4**n, sites)."""
        n = len(seq)
        times, _ = ordered_simplex_rule(n, self.mu, self.nodes)
        kt = np.array(list(itertools.product(range(4), repeat=n)))
        q, k = len(times), len(kt)
        t = np.repeat(times, k, axis=0)
        kinds = np.tile(kt, (q, 1))
        # subset in increasing time; apply Op at each, heat flow in between
        first = subset[0]
        f = propagate_heat(self.lattice, np.broadcast_to(self.phi0, (q * k, self.lattice.n_sites)), t[:, first])
        for pos, v in enumerate(subset):
            inc = np.zeros_like(f)
            for code, kind in enumerate(KINDS):
                rows = kinds[:, v] == code
                inc[rows] = op_apply(seq[v], kind, f[rows])
            nxt = t[:, subset[pos + 1]] if pos + 1 < len(subset) else np.full(q * k, self.mu)
            f = propagate_heat(self.lattice, inc, nxt - t[:, v])
        return f.reshape(q, k, self.lattice.n_sites)

    def enumerated_activities(self, sp: Superpolymer) -> tuple[float, float]:
        """``(z, z^A)`` by explicit enumeration of connected polymer line structures.

        Exponential in the number of vertices and sites; meant as an oracle
        for small superpolymers.
        """
        self._check_budget(sp)
        sp.check_lattice(self.lattice)
        if self.mu == 0.0:
            return (0.0, 0.0)
        nl = sum(n for _, n in sp.left)
        nr = sum(n for _, n in sp.right)
        left_seqs = _interleavings(sp.left) if nl else [()]
        right_seqs = _interleavings(sp.right) if nr else [()]
        sides = []
        for n in (nl, nr):
            w = ordered_simplex_rule(n, self.mu, self.nodes)[1] if n else np.ones(1)
            sides.append(_SideSamples([], np.empty(0), w, n))
        full = (len(sides[0].weights), 4**nl, len(sides[1].weights), 4**nr)
        total = [0.0, 0.0]
        for lseq in left_seqs:
            lvals = _subset_values(self, lseq)
            for rseq in right_seqs:
                rvals = _subset_values(self, rseq)
                choices = [(a, b) for a in [()] + list(lvals) for b in [()] + list(rvals) if a or b]
                for struct in itertools.product(choices, repeat=len(sp.sites)):
                    if not _connected(sp.sites, lseq, rseq, struct):
                        continue
                    for observable in (False, True) if self.obs is not None else (False,):
                        c1, c2, norm = self._coef[observable]
                        factors = []
                        for i, (a, b) in zip(sp.sites, struct):
                            x = lvals[a][:, :, None, None, i] if a else None
                            y = rvals[b][None, None, :, :, i] if b else None
                            if a and b:
                                fac = c2[i] * x * y
                            else:
                                fac = c1[i] * (x if a else y)
                            factors.append((i, np.broadcast_to(fac / norm[i], full)))
                        total[int(observable)] += self._integrate(sides[0], sides[1], factors)
        if self.obs is None:
            total[1] = total[0]
        return float(total[0]), float(total[1])


def _subset_values(engine: ActivityEngine, seq) -> dict:
    n = len(seq)
    return {s: engine._line_values(seq, s) for r in range(1, n + 1) for s in itertools.combinations(range(n), r)}


def _connected(sites, lseq, rseq, struct) -> bool:
    """Whether sites and vertices form one component under lines and same-edge links."""
    nodes = [("s", i) for i in sites] + [("l", v) for v in range(len(lseq))] + [("r", v) for v in range(len(rseq))]
    parent = {x: x for x in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        parent[find(a)] = find(b)

    for side, seq in (("l", lseq), ("r", rseq)):
        for a, b in itertools.combinations(range(len(seq)), 2):
            if seq[a] == seq[b]:
                union((side, a), (side, b))
    for i, (a, b) in zip(sites, struct):
        for v in a:
            union(("s", i), ("l", v))
        for v in b:
            union(("s", i), ("r", v))
    return len({find(x) for x in nodes}) == 1


# enumeration and cluster sums ---------------------------------------------------------


def enumerate_superpolymers(lat: Lattice, max_particles: int, anchor: Particle | None = None, max_vertices: int = 3) -> list[Superpolymer]:
    """Every superpolymer with at most ``max_particles`` particles.

    Any nonempty site set combined with any nonempty assignment of vertex
    counts admits a connected line structure (one site can run its lines
    through every vertex), so all such skeletons are returned.
    """
    if max_particles - 1 > max_vertices:
        raise BudgetExceeded(f"{max_particles} particles may need more than {max_vertices} vertices")
    if anchor is not None:
        if anchor.kind == "site":
            if not 0 <= anchor.site < lat.n_sites:
                raise KeyError(f"anchor site {anchor.site} not in lattice")
        else:
            lat.canonical_edge(anchor.edge)
    edge_sides = [(side, e) for side in ("left", "right") for e in lat.edges]
    out = []
    for n_sites in range(1, max_particles):
        for sites in itertools.combinations(lat.sites, n_sites):
            for counts in _count_assignments(len(edge_sides), max_particles - n_sites):
                left = [(e, c) for (side, e), c in zip(edge_sides, counts) if c and side == "left"]
                right = [(e, c) for (side, e), c in zip(edge_sides, counts) if c and side == "right"]
                sp = Superpolymer(left=tuple(left), right=tuple(right), sites=sites)
                if anchor is None or sp.contains(anchor):
                    out.append(sp)
    return sorted(out)


def _count_assignments(n_slots: int, max_total: int):
    """Nonnegative count vectors with 1 <= sum <= max_total."""

    def rec(k, left):
        if k == n_slots:
            yield ()
            return
        for c in range(left + 1):
            for rest in rec(k + 1, left - c):
                yield (c,) + rest

    for counts in rec(0, max_total):
        if sum(counts) >= 1:
            yield counts


def partition_sum(polymers, z, max_particles: int) -> float:
    """``Σ`` over sets of pairwise compatible polymers with total size ``<= max_particles`` of ``Π z``."""
    polymers = list(polymers)
    z = list(z)

    def rec(start, budget, chosen):
        total = 0.0
        for k in range(start, len(polymers)):
            p = polymers[k]
            if p.size > budget or not all(compatible(p, c) for c in chosen):
                continue
            total += z[k] * (1.0 + rec(k + 1, budget - p.size, chosen + [p]))
        return total

    return 1.0 + rec(0, max_particles, [])


def ursell_coefficient(polymers) -> int:
    """Truncated (Ursell) coefficient of a cluster under the hard-core interaction.

    Sum over connected spanning subgraphs of the incompatibility graph of
    ``(-1)**(number of links)``.
    """
    k = len(polymers)
    if k == 1:
        return 1
    links = [(a, b) for a, b in itertools.combinations(range(k), 2) if not compatible(polymers[a], polymers[b])]
    total = 0
    for r in range(k - 1, len(links) + 1):
        for chosen in itertools.combinations(links, r):
            parent = list(range(k))

            def find(x):
                while parent[x] != x:
                    x = parent[x]
                return x

            for a, b in chosen:
                parent[find(a)] = find(b)
            if len({find(x) for x in range(k)}) == 1:
                total += (-1) ** r
    return total


def log_partition_sum(polymers, z, max_particles: int) -> float:
    """Cluster expansion of ``log`` of the partition sum, truncated by total size.

    ``Σ_k (1/k!) Σ_{(γ1..γk)} φ^T(γ1..γk) Π z(γ_j)`` over ordered tuples.
    """
    polymers = list(polymers)
    z = list(z)
    total = 0.0

    def rec(tup, budget):
        nonlocal total
        if tup:
            phi_t = ursell_coefficient([polymers[k] for k in tup])
            if phi_t:
                total += phi_t * math.prod(z[k] for k in tup) / math.factorial(len(tup))
        for k, p in enumerate(polymers):
            if p.size <= budget:
                rec(tup + (k,), budget - p.size)

    rec((), max_particles)
    return total


def activity(lat: Lattice, sp: Superpolymer, phi0, mu: float, alpha: float, k_set, for_observable: bool, nodes: int = 8, max_vertices: int = 3) -> Activity:
    """Activity of one superpolymer; see :class:`ActivityEngine` for repeated use."""
    engine = ActivityEngine(lat, phi0, mu, ObservableA(frozenset(k_set), alpha), nodes=nodes, max_vertices=max_vertices)
    return engine.activity(sp, for_observable)


def _sharp(lat: Lattice, s0) -> np.ndarray:
    phi0 = np.zeros(lat.n_sites)
    phi0[sorted({int(i) for i in s0})] = 1.0
    return phi0


def _engine_activities(lat, s0, k_set, alpha, mu, max_particles, nodes, max_vertices):
    obs = ObservableA(frozenset(k_set), alpha)
    engine = ActivityEngine(lat, _sharp(lat, s0), mu, obs, nodes=nodes, max_vertices=max_vertices)
    polymers = enumerate_superpolymers(lat, max_particles, max_vertices=max_vertices) if max_particles >= 2 else []
    acts = [engine.activities(p) for p in polymers]
    return polymers, [a[0] for a in acts], [a[1] for a in acts]


def cluster_ratio(lat: Lattice, s0, k_set, alpha: float, mu: float, max_particles: int, nodes: int = 8, max_vertices: int = 3) -> tuple[float, float]:
    """Truncated polymer sums for the norm ratio and the ``A``-weighted ratio."""
    polymers, z, za = _engine_activities(lat, s0, k_set, alpha, mu, max_particles, nodes, max_vertices)
    return partition_sum(polymers, z, max_particles), partition_sum(polymers, za, max_particles)


def cluster_log_ratio(lat: Lattice, s0, k_set, alpha: float, mu: float, max_particles: int, nodes: int = 8, max_vertices: int = 3) -> float:
    """Connected-cluster estimate of ``log(⟨A⟩_μ / Π_{i∈K} ρ_μ(i))``."""
    polymers, z, za = _engine_activities(lat, s0, k_set, alpha, mu, max_particles, nodes, max_vertices)
    return log_partition_sum(polymers, za, max_particles) - log_partition_sum(polymers, z, max_particles)


def bound_probe(
    lat: Lattice,
    s0,
    anchor: Particle,
    a: float,
    mu_grid,
    max_particles: int,
    nodes: int = 8,
    obs: ObservableA | None = None,
    max_vertices: int = 3,
) -> list[tuple[float, float]]:
    """Truncated ``Σ_{γ∋p} |z(γ)| e^{a|γ|}`` at each ``mu`` of the grid.

    With ``obs`` the observable activities ``z^A`` are summed instead.
    """
    polymers = enumerate_superpolymers(lat, max_particles, anchor=anchor, max_vertices=max_vertices)
    rows = []
    for mu in mu_grid:
        engine = ActivityEngine(lat, _sharp(lat, s0), mu, obs, nodes=nodes, max_vertices=max_vertices)
        idx = 1 if obs is not None else 0
        total = sum(abs(engine.activities(p)[idx]) * math.exp(a * p.size) for p in polymers)
        rows.append((float(mu), float(total)))
    return rows
