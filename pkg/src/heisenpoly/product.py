"""Product (average-field) states ``⊗_i (φ(i), 1 - φ(i))``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Lattice
from .quantum import ObservableA, SectorBasis, WaveVector, full_space

__all__ = [
    "ProductState",
    "product_embed",
    "embed_amplitudes",
    "rho",
    "ap_expectation",
    "ap_inner",
    "site_weights",
]


@dataclass(frozen=True, eq=False)
class ProductState:
    lattice: Lattice
    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.shape != (self.lattice.n_sites,):
            raise ValueError("phi length does not match lattice")
        if np.any(phi < 0) or np.any(phi > 1):
            raise ValueError("phi must lie in [0, 1]")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def sharp(cls, lat: Lattice, s0) -> "ProductState":
        phi = np.zeros(lat.n_sites)
        phi[list(s0)] = 1.0
        return cls(lat, phi)


def embed_amplitudes(basis: SectorBasis, phi) -> np.ndarray:
    """Amplitudes ``Π_{up} φ · Π_{down} (1 - φ)`` for a batch of fields.

    ``phi`` has shape ``(..., n_sites)``; the result ``(..., len(basis))``.
    """
    phi = np.asarray(phi, dtype=float)
    up = phi[..., None, :]
    bits = basis.bits.astype(bool)
    factors = np.where(bits, up, 1.0 - up)
    return np.prod(factors, axis=-1)


def product_embed(ps: ProductState, basis: SectorBasis | None = None) -> WaveVector:
    """The tensor-product vector; in a sector basis, its (unnormalized) projection."""
    if basis is None:
        basis = full_space(ps.lattice)
    if basis.lattice != ps.lattice:
        raise ValueError("product state and basis live on different lattices")
    return WaveVector(basis, embed_amplitudes(basis, ps.phi))


def rho(phi_i, alpha: float):
    """``((1+α)φ² + α(1-φ)²) / (φ² + (1-φ)²)``, evaluated as ``α + φ²/(φ² + (1-φ)²)``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    phi_i = np.asarray(phi_i, dtype=float)
    up = phi_i * phi_i
    down = (1.0 - phi_i) ** 2
    out = alpha + up / (up + down)
    return float(out) if out.ndim == 0 else out


def ap_expectation(ps: ProductState, obs: ObservableA) -> float:
    """``Π_{i∈K} ρ(φ(i))``."""
    out = 1.0
    for i in sorted(obs.k_set):
        out *= rho(ps.phi[i], obs.alpha)
    return out


def site_weights(n_sites: int, obs: ObservableA | None) -> tuple[np.ndarray, np.ndarray]:
    """Per-site weights of the up and down components under ``A``."""
    w_up = np.ones(n_sites)
    w_down = np.ones(n_sites)
    if obs is not None:
        k = sorted(obs.k_set)
        w_up[k] = 1.0 + obs.alpha
        w_down[k] = obs.alpha
    return w_up, w_down


def ap_inner(ps1: ProductState, ps2: ProductState, obs: ObservableA | None = None) -> float:
    """``⟨P(φ1), A P(φ2)⟩`` as a product of local two-component inner products."""
    if ps1.lattice != ps2.lattice:
        raise ValueError("product states live on different lattices")
    w_up, w_down = site_weights(ps1.lattice.n_sites, obs)
    local = w_up * ps1.phi * ps2.phi + w_down * (1.0 - ps1.phi) * (1.0 - ps2.phi)
    return float(np.prod(local))
