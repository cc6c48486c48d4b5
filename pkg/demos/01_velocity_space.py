"""
The Hermite side of the model
=============================

The particle perturbation f(v) is stored as coefficients in the weighted
Hermite basis.  Here we look at what the basis does to the Fokker-Planck
operator and to the ladder operators, then measure how coercive the
collision operator is away from its null space.
"""

import numpy as np

from nsvfp.hermite import (
    apply_ladder,
    collision_quadratic_form,
    decompose_macro_micro,
    default_basis,
    macro_moments,
    micro_coercivity_constant,
    nu_norm,
)

basis = default_basis(8)
print(f"N = {basis.N}: {basis.size} Hermite modes, {basis.Q}^3 quadrature nodes")

# The collision operator is diagonal, with eigenvalue -|alpha| on each mode.
spectrum = np.unique(basis.collision_diag)
print("distinct collision eigenvalues:", spectrum)

# Multiplication by v_1 couples neighbouring degrees (a tridiagonal ladder).
e1 = basis.unit((1, 0, 0))
v1_e1 = apply_ladder("MULT_V", 0, e1, basis)
for i in np.flatnonzero(v1_e1):
    print(f"  v1 * psi_(1,0,0) has {v1_e1[i]:+.4f} on psi_{tuple(int(a) for a in basis.indices[i])}")

# Macro moments of a random perturbation and its micro part.
rng = np.random.default_rng(1)
c = rng.standard_normal(basis.size) * 0.8 ** basis.degree
m = macro_moments(c, basis)
macro, micro = decompose_macro_micro(c, basis)
print(f"a = {m.a:.4f}, b = {np.round(m.b, 4)}, omega = {m.omega:.4f}")
print("micro part has vanishing moments:", np.allclose(macro_moments(micro, basis, upsilon=False).b, 0))

# Dissipation splits as |b|^2 + 2|omega|^2 plus the dissipation of the micro part.
total = collision_quadratic_form(c, basis)
print(f"-<f, Lf> = {total:.4f} = {np.sum(m.b ** 2) + 2 * m.omega ** 2:.4f} "
      f"+ {collision_quadratic_form(micro, basis):.4f}")

# On micro functions the dissipation controls the nu-norm (gradient plus velocity weight).
lam0 = micro_coercivity_constant(basis)
ratio = collision_quadratic_form(micro, basis) / nu_norm(micro, basis)
print(f"coercivity constant {lam0:.4f}; this sample sits at {ratio:.4f}")
