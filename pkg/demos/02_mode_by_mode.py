"""
One Fourier mode at a time
==========================

Linearized about equilibrium, every wavenumber k evolves independently under
a 170 x 170 generator A(k) (165 Hermite modes plus rho, u and theta).  The
spectrum shows the two regimes: near k = 0 the slowest eigenvalue scales like
|k|^2, for large |k| it saturates.
"""

import numpy as np

from nsvfp.hermite import default_basis
from nsvfp.linear_mode import LyapunovWeights, assemble_generator, fit_mode_decay

basis = default_basis(8)
direction = np.array([1.0, 2.0, 2.0]) / 3.0

print(" |k|     abscissa    abscissa*(1+k^2)/k^2")
for kabs in (0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0):
    gen = assemble_generator(kabs * direction, basis=basis)
    lead = np.linalg.eigvals(gen.matrix).real.max()
    print(f"{kabs:5.2f}  {lead:12.5f}  {lead * (1 + kabs ** 2) / kabs ** 2:12.5f}")

# The per-mode Lyapunov functional decays like exp(-c s) with s = |k|^2 t / (1 + |k|^2);
# c should be roughly independent of k.
rng = np.random.default_rng(0)
print("\n |k|    fitted c")
for kabs in (0.1, 1.0, 10.0):
    gen = assemble_generator(kabs * direction, basis=basis)
    U0 = np.zeros(gen.dim, complex)
    U0[:basis.size] = rng.standard_normal(basis.size) * 0.5 ** basis.degree
    U0[basis.size:] = rng.standard_normal(5)
    t = (1 + kabs ** 2) / kabs ** 2 * np.linspace(0.5, 10, 16)
    fit = fit_mode_decay(gen, U0, t, LyapunovWeights())
    print(f"{kabs:5.2f}  {fit.c:8.4f}")
