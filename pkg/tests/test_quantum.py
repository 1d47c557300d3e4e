import math

import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given, settings
from hypothesis import strategies as st

from heisenpoly.lattice import build_lattice
from heisenpoly.quantum import (
    ObservableA,
    SectorBasis,
    WaveVector,
    apply_h,
    expectation_a,
    full_space,
    hamiltonian_matrix,
    norm_squared,
    propagate,
    sharp_state,
)

LATTICES = [build_lattice("chain", 4), build_lattice("chain", 5, boundary="periodic"), build_lattice("grid", 3, 3)]


def dense_taylor(h: np.ndarray, mu: float) -> np.ndarray:
    """Naive Taylor sum of exp(-mu H) after scaling by 2**s, then squaring."""
    s = max(0, math.ceil(math.log2(max(mu * np.abs(h).sum(axis=1).max(), 1e-300))) + 1)
    a = -mu / 2**s * h
    term = np.eye(len(h))
    total = term.copy()
    for k in range(1, 40):
        term = term @ a / k
        total = total + term
    for _ in range(s):
        total = total @ total
    return total


def test_sector_sizes_and_order():
    lat = build_lattice("chain", 6)
    for n_up in range(7):
        basis = SectorBasis(lat, n_up)
        assert len(basis) == math.comb(6, n_up)
        assert list(basis.configs) == sorted(basis.configs)
        assert all(bin(c).count("1") == n_up for c in basis.configs)
    with pytest.raises(ValueError):
        SectorBasis(lat, 7)


def test_sharp_state_examples():
    b2 = SectorBasis(build_lattice("chain", 2), 1)
    assert list(b2.configs) == [0b01, 0b10]
    assert np.array_equal(sharp_state(b2, {0}).amplitudes, [1.0, 0.0])
    b3 = SectorBasis(build_lattice("chain", 3), 2)
    psi = sharp_state(b3, {0, 1})
    assert psi.amplitudes[b3.index(0b011)] == 1.0 and psi.amplitudes.sum() == 1.0
    with pytest.raises(ValueError):
        sharp_state(b3, {0})
    with pytest.raises(KeyError):
        sharp_state(b3, {0, 5})


def test_apply_h_examples():
    lat = build_lattice("chain", 2)
    b = SectorBasis(lat, 1)
    assert np.array_equal(apply_h(b, WaveVector(b, [1.0, 0.0])).amplitudes, [1.0, -1.0])
    up = SectorBasis(build_lattice("grid", 3, 3), 9)
    assert np.array_equal(apply_h(up, WaveVector(up, [1.0])).amplitudes, [0.0])


@pytest.mark.parametrize("lat", LATTICES, ids=lambda l: l.descriptor)
def test_hamiltonian_is_symmetric_psd(lat):
    rng = np.random.default_rng(0)
    b = SectorBasis(lat, lat.n_sites // 2)
    h = hamiltonian_matrix(b).toarray()
    assert np.array_equal(h, h.T)
    assert np.linalg.eigvalsh(h).min() >= -1e-12
    phi, psi = rng.normal(size=(2, len(b)))
    lhs = phi @ apply_h(b, WaveVector(b, psi)).amplitudes
    rhs = apply_h(b, WaveVector(b, phi)).amplitudes @ psi
    assert abs(lhs - rhs) <= 1e-12


def test_full_space_hamiltonian_conserves_magnetization():
    lat = build_lattice("chain", 4)
    b = full_space(lat)
    h = hamiltonian_matrix(b).tocoo()
    for r, c in zip(h.row, h.col):
        assert bin(b.configs[r]).count("1") == bin(b.configs[c]).count("1")


def test_propagate_two_sites():
    b = SectorBasis(build_lattice("chain", 2), 1)
    psi0 = sharp_state(b, {0})
    assert np.array_equal(propagate(b, psi0, 0.0).amplitudes, psi0.amplitudes)
    for mu in (0.01, 0.5, 2.0):
        a = (1 + math.exp(-2 * mu)) / 2
        assert np.allclose(propagate(b, psi0, mu).amplitudes, [a, 1 - a], rtol=1e-13, atol=0)


def test_propagate_ground_state_fixed():
    b = SectorBasis(build_lattice("chain", 5), 5)
    psi = WaveVector(b, [1.0])
    assert np.array_equal(propagate(b, psi, 3.0).amplitudes, [1.0])


def test_propagate_rejects_negative_mu():
    b = SectorBasis(build_lattice("chain", 3), 1)
    with pytest.raises(ValueError):
        propagate(b, sharp_state(b, {0}), -1.0)


@pytest.mark.parametrize("lat", LATTICES, ids=lambda l: l.descriptor)
@pytest.mark.parametrize("mu", [1e-3, 0.2, 1.5])
def test_propagate_matches_dense_oracles(lat, mu):
    b = SectorBasis(lat, 2)
    rng = np.random.default_rng(3)
    psi0 = WaveVector(b, rng.random(len(b)))
    out = propagate(b, psi0, mu).amplitudes
    h = hamiltonian_matrix(b).toarray()
    assert np.abs(out - dense_taylor(h, mu) @ psi0.amplitudes).max() <= 1e-10
    ref = sl.expm(-mu * h) @ psi0.amplitudes
    assert np.abs(out - ref).max() <= 1e-12 * np.abs(ref).max()


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(LATTICES), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_semigroup_positivity_and_norm(lat, m1, m2, seed):
    b = SectorBasis(lat, 2)
    psi = WaveVector(b, np.random.default_rng(seed).random(len(b)))
    one = propagate(b, psi, m1)
    two = propagate(b, one, m2)
    assert np.abs(two.amplitudes - propagate(b, psi, m1 + m2).amplitudes).max() <= 1e-10
    assert two.amplitudes.min() >= -1e-12
    assert norm_squared(two) <= norm_squared(one) * (1 + 1e-12)
    assert norm_squared(one) <= norm_squared(psi) * (1 + 1e-12)


def test_expectation_examples():
    lat = build_lattice("chain", 4)
    b = SectorBasis(lat, 2)
    obs = ObservableA({0, 2}, 0.5)
    psi0 = sharp_state(b, {0, 1})
    assert expectation_a(psi0, obs) == pytest.approx(1.5 * 0.5)
    assert norm_squared(psi0) == 1.0
    psi = propagate(b, psi0, 0.3)
    scaled = WaveVector(b, -2.5 * psi.amplitudes)
    assert expectation_a(scaled, obs) == pytest.approx(expectation_a(psi, obs), rel=1e-14)
    assert norm_squared(WaveVector(b, np.zeros(len(b)))) == 0.0
    with pytest.raises(ValueError):
        expectation_a(WaveVector(b, np.zeros(len(b))), obs)


def test_two_site_expectation_closed_form():
    b = SectorBasis(build_lattice("chain", 2), 1)
    for alpha in (0.25, 1.0, 4.0):
        for mu in (0.1, 1.0):
            a = (1 + math.exp(-2 * mu)) / 2
            psi = propagate(b, sharp_state(b, {0}), mu)
            assert norm_squared(psi) == pytest.approx(a**2 + (1 - a) ** 2, rel=1e-14)
            want = alpha + a**2 / (a**2 + (1 - a) ** 2)
            assert expectation_a(psi, ObservableA({0}, alpha)) == pytest.approx(want, rel=1e-13)


def test_observable_rejects_nonpositive_alpha():
    for alpha in (0.0, -1.0):
        with pytest.raises(ValueError):
            ObservableA({0}, alpha)
