"""Pathwise rotation field Z_t(x), its gradient xi_t(x), and the F functional.

The magnetization transform m = Z^T M hinges on the matrix process
dZ = sum_i G_i Z o dW_i with skew generators G_i u = u x g_i(x). One time
step multiplies Z on the left by the exponential of the accumulated skew
increment (a closed-form Rodrigues rotation), which keeps Z exactly
orthogonal for any step size and discretizes the Stratonovich equation with
strong order at least 1/2.

The gradient field xi = grad Z is direction-indexed (one 3x3 matrix per
spatial direction) and follows the linear Ito equation
dxi = 1/2 sum_i (G_i^2 xi + H_i Z) dt + sum_i (G_i xi + I_i Z) dW_i,
advanced by Euler-Maruyama with Z frozen at the left endpoint. Here
I_i u = u x dg_i/dx_d per direction d, and H_i combines I_i with G_i.

F(t, u, v) = <grad(Z u), grad(Z v)> - <grad u, grad v> is the stochastic
correction that appears as an extra load in the scheme. Two routes compute
it: the identity form (from the current Z, xi only) and an Ito-sum
accumulation of the increment densities F_1i, F_2i along the whole path.
The accumulation uses the gradient-pairing form of the densities
(F_1i = <B_i Zu, grad Zv> + <grad Zu, B_i Zv> + <I_i Zu, I_i Zv> with
B_i = 1/2 H_i - G_i I_i, and F_2i = <I_i Zu, grad Zv> + <grad Zu, I_i Zv>),
which is the exact pathwise differential of <grad Zu, grad Zv> for any
coefficients, needs only first derivatives of g_i, and is manifestly
symmetric in (u, v).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def cross_matrix(a):
    """Matrix C(a) with C(a) u = a x u, for a of shape (..., 3)."""
    a = np.asarray(a, dtype=float)
    C = np.zeros(a.shape[:-1] + (3, 3))
    C[..., 0, 1] = -a[..., 2]
    C[..., 0, 2] = a[..., 1]
    C[..., 1, 0] = a[..., 2]
    C[..., 1, 2] = -a[..., 0]
    C[..., 2, 0] = -a[..., 1]
    C[..., 2, 1] = a[..., 0]
    return C


def rodrigues_exp(w):
    """Closed-form exp(C(w)) for w of shape (..., 3).

    Rotation about w/|w| by the angle |w|; series expansion of the two
    scalar coefficients keeps the small-angle branch accurate to machine
    precision, and w = 0 returns the identity exactly.
    """
    w = np.asarray(w, dtype=float)
    theta2 = np.sum(w * w, axis=-1)
    theta = np.sqrt(theta2)
    small = theta < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(small,
                     1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
                     np.sin(theta) / np.where(small, 1.0, theta))
        c = np.where(small,
                     0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
                     (1.0 - np.cos(theta)) / np.where(small, 1.0, theta2))
    C = cross_matrix(w)
    eye = np.broadcast_to(np.eye(3), C.shape)
    return eye + s[..., None, None] * C + c[..., None, None] * (C @ C)


def evolve_point_rotation(gvals, increments, Z0=None):
    """Run the exponential integrator at fixed points with constant g's.

    Parameters
    ----------
    gvals : (q, 3) array
        Constant coefficient vectors.
    increments : (..., J, q) array
        Wiener increments; leading axes are independent paths.
    Z0 : optional (..., 3, 3) initial rotations, identity by default.

    Returns
    -------
    (..., 3, 3) array of rotations after J steps.
    """
    gvals = np.asarray(gvals, dtype=float)
    increments = np.asarray(increments, dtype=float)
    J = increments.shape[-2]
    Z = (np.broadcast_to(np.eye(3), increments.shape[:-2] + (3, 3)).copy()
         if Z0 is None else np.array(Z0, dtype=float))
    for j in range(J):
        a = increments[..., j, :] @ gvals          # (..., 3)
        Z = rodrigues_exp(-a) @ Z
    return Z


class RotationField:
    """Z and xi sampled at all quadrature points and all mesh nodes.

    The evaluation points are flattened as [cell-major quadrature points,
    then vertices]; views reshape them back. Snapshots are immutable: each
    evolve_step returns a new field at index j+1 sharing the cached
    coefficient tensors.
    """

    def __init__(self, space, coeffs, j, Z, xi, cache):
        self.space = space
        self.coeffs = coeffs
        self.j = int(j)
        self.Z = Z
        self.xi = xi
        self._cache = cache
        Z.setflags(write=False)
        xi.setflags(write=False)

    # views ---------------------------------------------------------------

    @property
    def n_quad(self):
        return self.space.mesh.n_cells * self.space.n_qp

    @property
    def Z_quad(self):
        m = self.space.mesh
        return self.Z[:self.n_quad].reshape(m.n_cells, self.space.n_qp, 3, 3)

    @property
    def Z_nodes(self):
        return self.Z[self.n_quad:]

    @property
    def xi_quad(self):
        m = self.space.mesh
        return self.xi[:self.n_quad].reshape(m.n_cells, self.space.n_qp,
                                             m.dim, 3, 3)

    @property
    def xi_nodes(self):
        return self.xi[self.n_quad:]

    def orthogonality_defect(self):
        """max over points of ||Z^T Z - I||_F."""
        G = np.einsum("pba,pbc->pac", self.Z, self.Z)
        G = G - np.eye(3)
        return float(np.sqrt(np.sum(G * G, axis=(1, 2))).max())


def _coefficient_cache(space, coeffs):
    dim = space.mesh.dim
    points = np.vstack([space.quad_points.reshape(-1, dim),
                        space.mesh.vertices])
    g = coeffs.g_at(points)                        # (q, P, 3)
    jac = coeffs.jac_at(points)                    # (q, P, 3, dim)
    A = -cross_matrix(g)                           # matrix of u -> u x g
    A2 = A @ A
    Ii = -cross_matrix(np.moveaxis(jac, -1, 2))    # (q, P, dim, 3, 3)
    Hi = Ii @ A[:, :, None] + A[:, :, None] @ Ii
    Bi = 0.5 * (Ii @ A[:, :, None] - A[:, :, None] @ Ii)
    return {"points": points, "g": g, "A": A, "A2": A2,
            "Ii": Ii, "Hi": Hi, "Bi": Bi}


def init_rotation_field(space, coeffs):
    """Field at time index 0: Z = I, xi = 0 at every evaluation point."""
    cache = _coefficient_cache(space, coeffs)
    P = len(cache["points"])
    dim = space.mesh.dim
    Z = np.tile(np.eye(3), (P, 1, 1))
    xi = np.zeros((P, dim, 3, 3))
    return RotationField(space, coeffs, 0, Z, xi, cache)


def evolve_step(field, dW, k):
    """Advance Z by one exponential step and xi by one Euler-Maruyama step.

    Parameters
    ----------
    field : RotationField at index j
    dW : (q,) increments of step j
    k : time step (the Wiener increments have variance k)

    Returns
    -------
    RotationField at index j + 1.
    """
    dW = np.asarray(dW, dtype=float).reshape(-1)
    if dW.shape[0] != field.coeffs.q:
        raise ValueError(f"expected {field.coeffs.q} increments, got {dW.shape[0]}")
    if not np.isfinite(dW).all():
        raise ValueError("non-finite Wiener increment")
    if not k > 0:
        raise ValueError(f"time step must be positive, got {k}")
    c = field._cache
    a = np.einsum("i,ipa->pa", dW, c["g"])
    Z1 = rodrigues_exp(-a) @ field.Z

    drift = 0.5 * k * (np.einsum("ipab,pdbc->pdac", c["A2"], field.xi)
                       + np.einsum("ipdab,pbc->pdac", c["Hi"], field.Z))
    noise = (np.einsum("i,ipab,pdbc->pdac", dW, c["A"], field.xi)
             + np.einsum("i,ipdab,pbc->pdac", dW, c["Ii"], field.Z))
    xi1 = field.xi + drift + noise
    return RotationField(field.space, field.coeffs, field.j + 1, Z1, xi1, c)


def apply_Z(field, u, inverse=False):
    """Pointwise rotate a field by Z (or Z^T when inverse).

    Accepts nodal fields of shape (N, 3) or quadrature-sampled fields of
    shape (n_cells, n_qp, 3) and returns the same kind.
    """
    u = np.asarray(u, dtype=float)
    m = field.space.mesh
    if u.shape == (m.n_vertices, 3):
        Z = field.Z_nodes
        subscripts = "nba,nb->na" if inverse else "nab,nb->na"
        return np.einsum(subscripts, Z, u)
    if u.shape == (m.n_cells, field.space.n_qp, 3):
        Z = field.Z_quad
        subscripts = "cqba,cqb->cqa" if inverse else "cqab,cqb->cqa"
        return np.einsum(subscripts, Z, u)
    raise ValueError(f"field shape {u.shape} matches neither the nodes "
                     f"({m.n_vertices}, 3) nor the quadrature points "
                     f"({m.n_cells}, {field.space.n_qp}, 3)")


def grad_Z_apply(field, u):
    """grad(Z u) at quadrature points by the product rule.

    Returns (n_cells, n_qp, dim, 3): xi_d u + Z du/dx_d per direction d,
    with u and grad u sampled from the P1 interpolant.
    """
    space = field.space
    u_qp = space.values_at_qp(np.asarray(u, dtype=float))
    gu = space.grads_at_qp(np.asarray(u, dtype=float))
    return (np.einsum("cqdab,cqb->cqda", field.xi_quad, u_qp)
            + np.einsum("cqab,cdb->cqda", field.Z_quad, gu))


def compute_F_identity(field, u, v, K=None):
    """F(t_j, u, v) = <grad(Z u), grad(Z v)>_quadrature - u^T K v."""
    if field.j == 0:
        return 0.0  # Z = I, xi = 0: exact zero, not two sums that cancel
    space = field.space
    if K is None:
        K = space.stiffness()
    gu = grad_Z_apply(field, u)
    gv = grad_Z_apply(field, v)
    twisted = np.einsum("cq,cqda,cqda->", space.quad_weights, gu, gv)
    base = float(np.sum(np.asarray(u) * (K @ np.asarray(v))))
    return float(twisted) - base


def assemble_rotated_stiffness(field):
    """Gram matrix of u -> grad(Z u) on vector P1 fields.

    Returns a (3N, 3N) CSR matrix KZ with u^T KZ v equal to the quadrature
    value of <grad(Z u), grad(Z v)>; KZ minus the plain vector stiffness is
    the matrix of F(t_j, ., .) restricted to P1 fields.
    """
    space = field.space
    mesh = space.mesh
    # T[c,q,d,a,l,b]: contribution of nodal dof (l,b) to grad_d(Z u)_a at qp
    gphi_dl = np.transpose(space.grad_phi, (0, 2, 1))   # (c, dim, d1)
    T = (space.phi_qp[None, :, None, None, :, None]
         * field.xi_quad[:, :, :, :, None, :]
         + gphi_dl[:, None, :, None, :, None]
         * field.Z_quad[:, :, None, :, None, :])
    local = np.einsum("cq,cqdalb,cqdame->clbme", space.quad_weights, T, T)
    d1 = mesh.dim + 1
    local = local.reshape(mesh.n_cells, 3 * d1, 3 * d1)
    rows, cols = space.vector_block_indices()
    KZ = sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                       shape=(3 * space.N, 3 * space.N))
    return KZ.tocsr()


def compute_F_direct(path, coeffs, u, v, j_end, space):
    """Ito-sum oracle for F: accumulate F_1i k + F_2i dW_i along the path.

    Evolves its own rotation field from t = 0 and adds the left-endpoint
    increment densities up to (excluding) step j_end. Independent of
    compute_F_identity apart from the shared evolution kernel; the two
    converge to each other at strong order ~1/2 in k.
    """
    j_end = int(j_end)
    if j_end < 0 or j_end > path.J:
        raise ValueError(f"t index {j_end} beyond path horizon J = {path.J}")
    if path.q != coeffs.q:
        raise ValueError("path and coefficients disagree on q")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    field = init_rotation_field(space, coeffs)
    w = space.quad_weights
    u_qp, gu = space.values_at_qp(u), space.grads_at_qp(u)
    v_qp, gv = space.values_at_qp(v), space.grads_at_qp(v)
    c = field._cache
    nq = field.n_quad
    ncells, n_qp = space.mesh.n_cells, space.n_qp
    Ii = c["Ii"][:, :nq].reshape(coeffs.q, ncells, n_qp, space.mesh.dim, 3, 3)
    Bi = c["Bi"][:, :nq].reshape(coeffs.q, ncells, n_qp, space.mesh.dim, 3, 3)

    acc = 0.0
    for s in range(j_end):
        Zq, xiq = field.Z_quad, field.xi_quad
        Zu = np.einsum("cqab,cqb->cqa", Zq, u_qp)
        Zv = np.einsum("cqab,cqb->cqa", Zq, v_qp)
        gZu = (np.einsum("cqdab,cqb->cqda", xiq, u_qp)
               + np.einsum("cqab,cdb->cqda", Zq, gu))
        gZv = (np.einsum("cqdab,cqb->cqda", xiq, v_qp)
               + np.einsum("cqab,cdb->cqda", Zq, gv))
        IZu = np.einsum("icqdab,cqb->icqda", Ii, Zu)
        IZv = np.einsum("icqdab,cqb->icqda", Ii, Zv)
        BZu = np.einsum("icqdab,cqb->icqda", Bi, Zu)
        BZv = np.einsum("icqdab,cqb->icqda", Bi, Zv)
        F1 = (np.einsum("cq,icqda,cqda->i", w, BZu, gZv)
              + np.einsum("cq,cqda,icqda->i", w, gZu, BZv)
              + np.einsum("cq,icqda,icqda->i", w, IZu, IZv))
        F2 = (np.einsum("cq,icqda,cqda->i", w, IZu, gZv)
              + np.einsum("cq,cqda,icqda->i", w, gZu, IZv))
        acc += path.k * F1.sum() + float(F2 @ path.increments[s])
        field = evolve_step(field, path.increments[s], path.k)
    return float(acc)
