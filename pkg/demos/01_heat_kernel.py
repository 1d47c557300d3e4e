"""The lattice heat kernel spreads mass one edge per power of mu.

For small mu the kernel entry between two sites behaves like
mu**d / d! times the number of shortest paths, where d is the graph
distance.  This script prints the fitted exponents on a 3x3 grid.
"""
import numpy as np

from heisenpoly.lattice import build_lattice, heat_kernel

lat = build_lattice("grid", 3, 3)
mus = np.geomspace(1e-4, 1e-2, 5)
kernels = np.array([heat_kernel(lat, mu).matrix for mu in mus])

print("site 0 to every other site on grid(3, 3)")
print(f"{'site':>4} {'distance':>8} {'fitted power':>12}")
for j in lat.sites:
    slope = np.polyfit(np.log(mus), np.log(kernels[:, 0, j]), 1)[0]
    print(f"{j:>4} {int(lat.distances[0, j]):>8} {slope:>12.4f}")

g = heat_kernel(lat, 0.7).matrix
print(f"\nrow sums deviate from 1 by at most {np.abs(g.sum(axis=1) - 1).max():.1e}")
print(f"smallest entry at mu = 0.7: {g.min():.3e}")
