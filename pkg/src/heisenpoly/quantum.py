"""Exact spin-1/2 Heisenberg ferromagnet on a small lattice.

Basis states are bitmasks with bit ``k`` set when site ``k`` is up.  The
Hamiltonian ``H = Σ_{i~j} (1 - I_ij)`` conserves the number of up spins,
so everything runs inside one magnetization sector.  ``SectorBasis`` with
``n_up=None`` is the full ``2**n`` space, needed when comparing against
product states which are not confined to a sector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .lattice import Lattice, _check_mu

__all__ = [
    "SectorBasis",
    "WaveVector",
    "ObservableA",
    "full_space",
    "sharp_state",
    "apply_h",
    "hamiltonian_matrix",
    "propagate",
    "expectation_a",
    "weighted_norm",
    "norm_squared",
]


@dataclass(frozen=True, eq=False)
class SectorBasis:
    lattice: Lattice
    n_up: int | None
    configs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.lattice.n_sites
        if self.n_up is None:
            configs = np.arange(2**n, dtype=np.int64)
        else:
            if not 0 <= self.n_up <= n:
                raise ValueError(f"n_up={self.n_up} outside [0, {n}]")
            configs = np.array(
                sorted(sum(1 << k for k in c) for c in combinations(range(n), self.n_up)),
                dtype=np.int64,
            )
        configs.setflags(write=False)
        object.__setattr__(self, "configs", configs)

    def __len__(self):
        return len(self.configs)

    @property
    def is_full(self) -> bool:
        return self.n_up is None

    def index(self, config: int) -> int:
        k = int(np.searchsorted(self.configs, config))
        if k == len(self.configs) or self.configs[k] != config:
            raise KeyError(f"configuration {config:b} not in basis")
        return k

    @cached_property
    def bits(self) -> np.ndarray:
        """``bits[c, k]`` is 1 when site ``k`` is up in configuration ``c``."""
        n = self.lattice.n_sites
        return ((self.configs[:, None] >> np.arange(n)) & 1).astype(np.int8)

    @cached_property
    def _exchange(self) -> list[tuple[np.ndarray, np.ndarray]]:
        # per edge: configurations where the two spins differ, and their swapped partners
        out = []
        for i, j in self.lattice.edges:
            differ = ((self.configs >> i) ^ (self.configs >> j)) & 1
            src = np.flatnonzero(differ)
            swapped = self.configs[src] ^ ((1 << i) | (1 << j))
            out.append((src, np.searchsorted(self.configs, swapped)))
        return out

    @cached_property
    def diagonal(self) -> np.ndarray:
        d = np.zeros(len(self))
        for src, _ in self._exchange:
            d[src] += 1.0
        return d


def full_space(lat: Lattice) -> SectorBasis:
    return SectorBasis(lat, None)


@dataclass(frozen=True, eq=False)
class WaveVector:
    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=float)
        if amp.shape != (len(self.basis),):
            raise ValueError("amplitude count does not match basis size")
        object.__setattr__(self, "amplitudes", amp)

    def to_full(self) -> "WaveVector":
        """Zero-pad into the full space."""
        if self.basis.is_full:
            return self
        full = full_space(self.basis.lattice)
        amp = np.zeros(len(full))
        amp[self.basis.configs] = self.amplitudes
        return WaveVector(full, amp)


@dataclass(frozen=True)
class ObservableA:
    """``A = Π_{i∈K} (p_i + alpha)`` with ``p_i`` the spin-up projector."""

    k_set: frozenset
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "k_set", frozenset(int(i) for i in self.k_set))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")

    def weights(self, basis: SectorBasis) -> np.ndarray:
        """Diagonal of ``A`` in ``basis``."""
        for i in self.k_set:
            if not 0 <= i < basis.lattice.n_sites:
                raise KeyError(f"site {i} of K not in lattice")
        w = np.ones(len(basis))
        for i in sorted(self.k_set):
            w *= basis.bits[:, i] + self.alpha
        return w


def sharp_state(basis: SectorBasis, s0) -> WaveVector:
    s0 = {int(i) for i in s0}
    n = basis.lattice.n_sites
    if any(not 0 <= i < n for i in s0):
        raise KeyError("site of s0 not in lattice")
    if basis.n_up is not None and len(s0) != basis.n_up:
        raise ValueError(f"|s0| = {len(s0)} but sector has {basis.n_up} up spins")
    amp = np.zeros(len(basis))
    amp[basis.index(sum(1 << i for i in s0))] = 1.0
    return WaveVector(basis, amp)


def _apply_h_array(basis: SectorBasis, amp: np.ndarray) -> np.ndarray:
    out = np.zeros_like(amp)
    for src, dst in basis._exchange:
        out[src] += amp[src] - amp[dst]
    return out


def apply_h(basis: SectorBasis, psi: WaveVector) -> WaveVector:
    """``HΨ`` with ``H = -Σ_{i~j} (I_ij - 1)``, matrix-free."""
    if psi.basis is not basis:
        raise ValueError("wave vector lives on a different basis")
    return WaveVector(basis, _apply_h_array(basis, psi.amplitudes))


def hamiltonian_matrix(basis: SectorBasis) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for src, dst in basis._exchange:
        rows += [src, src]
        cols += [src, dst]
        vals += [np.ones(len(src)), -np.ones(len(src))]
    m = len(basis)
    if not rows:
        return sp.csr_matrix((m, m))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)
    )


def propagate(basis: SectorBasis, psi0: WaveVector, mu: float, tol: float = 1e-16) -> WaveVector:
    """``exp(-mu H) Ψ0`` by uniformized Taylor steps.

    ``H = c - B`` with ``B`` entrywise nonnegative, so each Taylor term of
    ``exp(h B)`` is nonnegative on nonnegative input and nothing cancels.
    """
    mu = _check_mu(mu)
    if psi0.basis is not basis:
        raise ValueError("wave vector lives on a different basis")
    amp = psi0.amplitudes.copy()
    c = float(basis.diagonal.max(initial=0.0))
    if mu == 0.0 or c == 0.0:
        return WaveVector(basis, amp)
    n_steps = max(1, math.ceil(mu * c))
    h = mu / n_steps
    for _ in range(n_steps):
        term = amp
        acc = amp.copy()
        k = 0
        while True:
            k += 1
            term = (c * term - _apply_h_array(basis, term)) * (h / k)
            acc += term
            if np.abs(term).max() <= tol * np.abs(acc).max():
                break
        amp = acc * math.exp(-h * c)
    return WaveVector(basis, amp)


def norm_squared(psi: WaveVector) -> float:
    return float(psi.amplitudes @ psi.amplitudes)


def weighted_norm(psi: WaveVector, obs: ObservableA) -> float:
    """``⟨Ψ, AΨ⟩``."""
    return float((obs.weights(psi.basis) * psi.amplitudes) @ psi.amplitudes)


def expectation_a(psi: WaveVector, obs: ObservableA) -> float:
    """``⟨Ψ, AΨ⟩ / ⟨Ψ, Ψ⟩``."""
    nrm = norm_squared(psi)
    if nrm == 0.0:
        raise ValueError("expectation of the zero vector")
    return weighted_norm(psi, obs) / nrm
