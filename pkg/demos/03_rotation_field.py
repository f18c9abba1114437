"""
The pathwise rotation field and its load correction
===================================================

Evolves the pointwise rotation process Z (and its spatial gradient) on
one Brownian path and watches the two facts the scheme depends on: Z
stays orthogonal to machine precision for any step count, and the
stiffness correction F computed from (Z, xi) agrees with an independent
stochastic-integral evaluation of the same quantity, up to the strong
error of the latter's left-endpoint sum.
"""

import numpy as np

from sllgfem import (P1Space, build_structured_mesh, make_noise,
                     sample_path)
from sllgfem.fem import interpolate_nodal
from sllgfem.rotation import (compute_F_direct, compute_F_identity,
                              evolve_step, init_rotation_field)

space = P1Space(build_structured_mesh(2, 4))
coeffs = make_noise("linear-gradient", amplitude=1.0)
path = sample_path(seed=5, q=coeffs.q, J=200, T=1.0)

u = interpolate_nodal(
    lambda x: np.stack([np.sin(2 * np.pi * x[:, 0]),
                        np.cos(2 * np.pi * x[:, 1]),
                        0.3 + 0 * x[:, 0]], axis=1), space)
v = interpolate_nodal(
    lambda x: np.stack([x[:, 0] * x[:, 1],
                        np.cos(np.pi * x[:, 0]),
                        np.sin(np.pi * x[:, 1])], axis=1), space)

print(" step   ||Z^T Z - I||_F   F (from Z, xi)   F (Ito sum)")
field = init_rotation_field(space, coeffs)
for j in range(path.J):
    field = evolve_step(field, path.increments[j], path.k)
    if (j + 1) % 50 == 0:
        f_id = compute_F_identity(field, u, v)
        f_dir = compute_F_direct(path, coeffs, u, v, j + 1, space)
        print(f" {j + 1:4d}   {field.orthogonality_defect():12.2e}   "
              f"{f_id:+14.6f} {f_dir:+14.6f}")

print()
print("the two columns converge to each other as k -> 0; with constant")
print("coefficient vectors both are zero because Z is spatially uniform:")
const = make_noise("constant-z")
cpath = sample_path(seed=5, q=1, J=50, T=1.0)
cfield = init_rotation_field(space, const)
for j in range(cpath.J):
    cfield = evolve_step(cfield, cpath.increments[j], cpath.k)
print(f"  |F| identity = {abs(compute_F_identity(cfield, u, v)):.2e}, "
      f"|F| Ito sum = "
      f"{abs(compute_F_direct(cpath, const, u, v, 50, space)):.2e}")
