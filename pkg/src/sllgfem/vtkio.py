"""Legacy ASCII VTK output for simulation snapshots.

One file per snapshot time holding the mesh and two point vector fields:
the transformed field m and the reconstructed physical field M. 2D meshes
are written with a zero third coordinate so standard viewers accept them.
"""

from __future__ import annotations

import numpy as np

_CELL_TYPE = {2: 5, 3: 10}  # VTK_TRIANGLE, VTK_TETRA


def write_vtk(filename, mesh, m, M, comment="sllgfem snapshot"):
    """Write one snapshot. m and M are (N, 3) nodal vector fields."""
    m = np.asarray(m, dtype=float)
    M = np.asarray(M, dtype=float)
    n = mesh.n_vertices
    if m.shape != (n, 3) or M.shape != (n, 3):
        raise ValueError(f"fields must have shape ({n}, 3); got "
                         f"{m.shape} and {M.shape}")
    pts = np.zeros((n, 3))
    pts[:, :mesh.dim] = mesh.vertices
    nv = mesh.dim + 1
    with open(filename, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(comment.splitlines()[0][:255] + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        for p in pts:
            fh.write("%.17g %.17g %.17g\n" % tuple(p))
        fh.write(f"CELLS {mesh.n_cells} {mesh.n_cells * (nv + 1)}\n")
        for cell in mesh.cells:
            fh.write(" ".join([str(nv)] + [str(int(v)) for v in cell]) + "\n")
        fh.write(f"CELL_TYPES {mesh.n_cells}\n")
        ct = _CELL_TYPE[mesh.dim]
        for _ in range(mesh.n_cells):
            fh.write(f"{ct}\n")
        fh.write(f"POINT_DATA {n}\n")
        for name, field in (("m", m), ("M", M)):
            fh.write(f"VECTORS {name} double\n")
            for row in field:
                fh.write("%.17g %.17g %.17g\n" % tuple(row))
