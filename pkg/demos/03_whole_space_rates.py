"""
Algebraic decay in the whole space
==================================

Superposing the per-mode evolutions over a spherical quadrature in k gives the
L^2 norms of the linear solution and its derivatives for Gaussian data.  The
low frequencies dominate at late times and produce power laws whose exponent
drops by one half per derivative.

A coarser quadrature than the default keeps this demo quick; the harness
(linear-decay) uses 64 radial nodes.
"""

import numpy as np

from nsvfp.hermite import default_basis
from nsvfp.semigroup import InitialProfile, KQuadrature, fit_power_law, synthesize_norm_table

basis = default_basis(8)
quad = KQuadrature(n_radial=32)
times = np.logspace(1, 3, 12)
table = synthesize_norm_table(InitialProfile(sigma=1.0), times, (0, 1, 2), quad, basis=basis)

print("     t      ||U||     ||grad U||   ||grad^2 U||")
for t, row in zip(times, table):
    print(f"{t:8.1f}  " + "  ".join(f"{x:.4e}" for x in row))

exps = [fit_power_law(times, table[:, m]).exponent for m in range(3)]
for m, e in enumerate(exps):
    print(f"order {m}: exponent {e:+.3f}   (heat-kernel value {-0.75 - 0.5 * m:+.2f})")
print("increments:", np.round(np.diff(exps), 3))
