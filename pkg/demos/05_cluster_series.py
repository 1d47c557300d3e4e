"""The truncated polymer sum versus the exact ratio of norms.

With at most three particles the surviving superpolymers have one vertex
and two sites; their activities are first order in mu and the residual
against exact propagation is second order.
"""
import numpy as np

from heisenpoly.harness import fit_loglog_slope
from heisenpoly.lattice import build_lattice, evolve_heat
from heisenpoly.polymer import Particle, bound_probe, cluster_ratio
from heisenpoly.product import ProductState, ap_inner
from heisenpoly.quantum import ObservableA, full_space, propagate, sharp_state, weighted_norm

lat = build_lattice("chain", 3)
s0, k_set = {0}, {1}
obs = ObservableA(k_set, 1.0)
rows = []
for mu in np.geomspace(0.005, 0.05, 6):
    basis = full_space(lat)
    psi = propagate(basis, sharp_state(basis, s0), mu)
    ps = ProductState(lat, evolve_heat(lat, ProductState.sharp(lat, s0).phi, mu))
    exact = weighted_norm(psi, obs) / ap_inner(ps, ps, obs)
    _, approx = cluster_ratio(lat, s0, k_set, 1.0, mu, 3)
    rows.append((mu, abs(exact - approx)))
    print(f"mu={mu:.4f}: exact {exact:.10f}  cluster {approx:.10f}")
print(f"residual slope {fit_loglog_slope(rows).slope:.3f}")

chain6 = build_lattice("chain", 6)
probe = bound_probe(chain6, {0, 1, 2}, Particle.at_site(2), 0.1, np.geomspace(1e-3, 1e-1, 8), 3)
print(f"\nanchored activity sum on chain(6): slope {fit_loglog_slope(probe).slope:.3f}")
