"""The splitting series rebuilds exp(-mu H) from kicked heat flows.

Each extra order of kicks gains one power of mu in the error against the
exact propagator.
"""
import numpy as np

from heisenpoly.harness import fit_loglog_slope
from heisenpoly.lattice import build_lattice
from heisenpoly.quantum import full_space, propagate, sharp_state
from heisenpoly.splitting import truncated_r

lat = build_lattice("chain", 3)
basis = full_space(lat)
mus = np.geomspace(0.01, 0.1, 6)
exact = {mu: propagate(basis, sharp_state(basis, {0}), mu).amplitudes for mu in mus}

for order in range(3):
    errs = [(mu, np.linalg.norm(truncated_r(lat, {0}, mu, order).amplitudes - exact[mu])) for mu in mus]
    fit = fit_loglog_slope(errs)
    print(f"order {order}: error at mu=0.1 is {errs[-1][1]:.2e}, fitted slope {fit.slope:.3f}")
