"""Element-level kernels.

Every kernel has a numba loop implementation (``*_nb``) and a vectorized
numpy implementation (``*_np``); the public name dispatches on
:func:`stokes_darcy._jit.use_numba`. Both produce the same numbers up to
floating-point summation order (agreement is tested at 1e-13 relative).

Shapes: ``coords`` is (nt, 3, 2); ``bary`` is (nq, 3) barycentric points;
``weights`` is (nq,) reference weights summing to 1/2.
"""
import numpy as np

from . import _jit
from ._jit import njit

P1_REF_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


# ---------------------------------------------------------------------------
# geometry


def geometry_np(coords):
    e1 = coords[:, 1, :] - coords[:, 0, :]
    e2 = coords[:, 2, :] - coords[:, 0, :]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # rows of J^{-1}: grad(l1), grad(l2)
    g1 = np.column_stack([e2[:, 1], -e2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-e1[:, 1], e1[:, 0]]) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    return det, grads


@njit(cache=True)
def geometry_nb(coords):
    nt = coords.shape[0]
    det = np.empty(nt)
    grads = np.empty((nt, 3, 2))
    for t in range(nt):
        ax = coords[t, 1, 0] - coords[t, 0, 0]
        ay = coords[t, 1, 1] - coords[t, 0, 1]
        bx = coords[t, 2, 0] - coords[t, 0, 0]
        by = coords[t, 2, 1] - coords[t, 0, 1]
        d = ax * by - ay * bx
        det[t] = d
        grads[t, 1, 0] = by / d
        grads[t, 1, 1] = -bx / d
        grads[t, 2, 0] = -ay / d
        grads[t, 2, 1] = ax / d
        grads[t, 0, 0] = -grads[t, 1, 0] - grads[t, 2, 0]
        grads[t, 0, 1] = -grads[t, 1, 1] - grads[t, 2, 1]
    return det, grads


def geometry(coords):
    """Jacobian determinants (= 2 * signed area) and P1 gradients (nt, 3, 2)."""
    coords = np.ascontiguousarray(coords, dtype=float)
    if _jit.use_numba():
        return geometry_nb(coords)
    return geometry_np(coords)


# ---------------------------------------------------------------------------
# MINI element: deformation stiffness, mass, divergence


def _mini_basis_np(grads, bary):
    """Scalar MINI basis values (nq, 4) and physical gradients (nt, nq, 4, 2)."""
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    vals = np.column_stack([l0, l1, l2, 27.0 * l0 * l1 * l2])
    db = 27.0 * np.column_stack([l1 * l2, l0 * l2, l0 * l1])
    nt, nq = grads.shape[0], bary.shape[0]
    g = np.empty((nt, nq, 4, 2))
    g[:, :, :3, :] = grads[:, None, :, :]
    g[:, :, 3, :] = np.einsum("qk,tkc->tqc", db, grads)
    return vals, g


def mini_matrices_np(coords, bary, weights, nu):
    det, grads = geometry_np(coords)
    vals, g = _mini_basis_np(grads, bary)
    wq = weights[None, :] * np.abs(det)[:, None]  # (nt, nq)
    # scalar pieces
    gg = np.einsum("tq,tqac,tqbc->tab", wq, g, g)  # grad a . grad b
    gx = np.einsum("tq,tqai,tqbj->taibj", wq, g, g)  # d_i a d_j b
    mass_s = np.einsum("tq,qa,qb->tab", wq, vals, vals)
    nt = coords.shape[0]
    stiff = np.zeros((nt, 4, 2, 4, 2))
    eye = np.eye(2)
    # K[a i, b j] = nu * ( (ga.gb) d_ij + d_j a d_i b )
    stiff += gg[:, :, None, :, None] * eye[None, None, :, None, :]
    stiff += np.transpose(gx, (0, 1, 4, 3, 2))
    stiff *= nu
    mass = mass_s[:, :, None, :, None] * eye[None, None, :, None, :]
    # D[k, b j] = int l_k d_j(phi_b)
    div = np.einsum("tq,qk,tqbj->tkbj", wq, bary, g)
    return stiff.reshape(nt, 8, 8), mass.reshape(nt, 8, 8), div.reshape(nt, 3, 8)


@njit(cache=True)
def mini_matrices_nb(coords, bary, weights, nu):
    nt = coords.shape[0]
    nq = bary.shape[0]
    det, grads = geometry_nb(coords)
    stiff = np.zeros((nt, 8, 8))
    mass = np.zeros((nt, 8, 8))
    div = np.zeros((nt, 3, 8))
    g = np.empty((4, 2))
    v = np.empty(4)
    for t in range(nt):
        ad = abs(det[t])
        for q in range(nq):
            l0 = bary[q, 0]
            l1 = bary[q, 1]
            l2 = bary[q, 2]
            w = weights[q] * ad
            v[0] = l0
            v[1] = l1
            v[2] = l2
            v[3] = 27.0 * l0 * l1 * l2
            for c in range(2):
                g[0, c] = grads[t, 0, c]
                g[1, c] = grads[t, 1, c]
                g[2, c] = grads[t, 2, c]
                g[3, c] = 27.0 * (l1 * l2 * grads[t, 0, c] + l0 * l2 * grads[t, 1, c] + l0 * l1 * grads[t, 2, c])
            for a in range(4):
                for b in range(4):
                    gab = g[a, 0] * g[b, 0] + g[a, 1] * g[b, 1]
                    mab = w * v[a] * v[b]
                    for i in range(2):
                        mass[t, 2 * a + i, 2 * b + i] += mab
                        for j in range(2):
                            s = g[a, j] * g[b, i]
                            if i == j:
                                s += gab
                            stiff[t, 2 * a + i, 2 * b + j] += nu * w * s
                for k in range(3):
                    for j in range(2):
                        div[t, k, 2 * a + j] += w * bary[q, k] * g[a, j]
    return stiff, mass, div


def mini_matrices(coords, bary, weights, nu):
    """Local MINI matrices per triangle.

    Vector dofs are ordered ``2*a + i`` with ``a`` in (l0, l1, l2, bubble)
    and ``i`` the component. Returns

    - deformation stiffness ``2 nu (D(phi), D(psi))`` (nt, 8, 8),
    - vector mass (nt, 8, 8),
    - ``(l_k, div phi)`` for P1 pressure ``l_k`` (nt, 3, 8).
    """
    coords = np.ascontiguousarray(coords, dtype=float)
    bary = np.ascontiguousarray(bary, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    if _jit.use_numba():
        return mini_matrices_nb(coords, bary, weights, float(nu))
    return mini_matrices_np(coords, bary, weights, float(nu))


# ---------------------------------------------------------------------------
# RT0 mass with diagonal inverse conductivity


def rt0_mass_np(coords, signs, kinv, bary, weights):
    det = geometry_np(coords)[0]
    area = 0.5 * det
    x = np.einsum("qk,tkc->tqc", bary, coords)  # (nt, nq, 2)
    diff = x[:, None, :, :] - coords[:, :, None, :]  # (nt, 3, nq, 2)
    psi = signs[:, :, None, None] * diff / (2.0 * area)[:, None, None, None]
    wq = weights[None, :] * np.abs(det)[:, None]
    return np.einsum("tq,c,tiqc,tjqc->tij", wq, kinv, psi, psi)


@njit(cache=True)
def rt0_mass_nb(coords, signs, kinv, bary, weights):
    nt = coords.shape[0]
    nq = bary.shape[0]
    out = np.zeros((nt, 3, 3))
    psi = np.empty((3, 2))
    for t in range(nt):
        ax = coords[t, 1, 0] - coords[t, 0, 0]
        ay = coords[t, 1, 1] - coords[t, 0, 1]
        bx = coords[t, 2, 0] - coords[t, 0, 0]
        by = coords[t, 2, 1] - coords[t, 0, 1]
        det = ax * by - ay * bx
        for q in range(nq):
            xq0 = 0.0
            xq1 = 0.0
            for k in range(3):
                xq0 += bary[q, k] * coords[t, k, 0]
                xq1 += bary[q, k] * coords[t, k, 1]
            for i in range(3):
                psi[i, 0] = signs[t, i] * (xq0 - coords[t, i, 0]) / det
                psi[i, 1] = signs[t, i] * (xq1 - coords[t, i, 1]) / det
            w = weights[q] * abs(det)
            for i in range(3):
                for j in range(3):
                    out[t, i, j] += w * (kinv[0] * psi[i, 0] * psi[j, 0] + kinv[1] * psi[i, 1] * psi[j, 1])
    return out


def rt0_mass(coords, signs, kinv, bary, weights):
    """Local RT0 mass ``(K^{-1} psi_i, psi_j)`` per triangle, (nt, 3, 3)."""
    coords = np.ascontiguousarray(coords, dtype=float)
    signs = np.ascontiguousarray(signs, dtype=float)
    kinv = np.ascontiguousarray(kinv, dtype=float)
    bary = np.ascontiguousarray(bary, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    if _jit.use_numba():
        return rt0_mass_nb(coords, signs, kinv, bary, weights)
    return rt0_mass_np(coords, signs, kinv, bary, weights)


# ---------------------------------------------------------------------------
# RT0 evaluation at quadrature points


def rt0_values_np(coords, signs, bary):
    det = geometry_np(coords)[0]
    x = np.einsum("qk,tkc->tqc", bary, coords)
    diff = x[:, None, :, :] - coords[:, :, None, :]
    return signs[:, :, None, None] * diff / det[:, None, None, None]


@njit(cache=True)
def rt0_values_nb(coords, signs, bary):
    nt = coords.shape[0]
    nq = bary.shape[0]
    out = np.empty((nt, 3, nq, 2))
    for t in range(nt):
        ax = coords[t, 1, 0] - coords[t, 0, 0]
        ay = coords[t, 1, 1] - coords[t, 0, 1]
        bx = coords[t, 2, 0] - coords[t, 0, 0]
        by = coords[t, 2, 1] - coords[t, 0, 1]
        det = ax * by - ay * bx
        for q in range(nq):
            xq0 = 0.0
            xq1 = 0.0
            for k in range(3):
                xq0 += bary[q, k] * coords[t, k, 0]
                xq1 += bary[q, k] * coords[t, k, 1]
            for i in range(3):
                out[t, i, q, 0] = signs[t, i] * (xq0 - coords[t, i, 0]) / det
                out[t, i, q, 1] = signs[t, i] * (xq1 - coords[t, i, 1]) / det
    return out


def rt0_values(coords, signs, bary):
    """RT0 basis values at quadrature points, (nt, 3, nq, 2)."""
    coords = np.ascontiguousarray(coords, dtype=float)
    signs = np.ascontiguousarray(signs, dtype=float)
    bary = np.ascontiguousarray(bary, dtype=float)
    if _jit.use_numba():
        return rt0_values_nb(coords, signs, bary)
    return rt0_values_np(coords, signs, bary)


# ---------------------------------------------------------------------------
# MINI evaluation of a discrete field


def mini_eval_np(coords, local_coeffs, bary):
    det, grads = geometry_np(coords)
    vals, g = _mini_basis_np(grads, bary)
    c = local_coeffs.reshape(-1, 4, 2)
    u = np.einsum("qa,tai->tqi", vals, c)
    du = np.einsum("tqaj,tai->tqij", g, c)
    return u, du


@njit(cache=True)
def mini_eval_nb(coords, local_coeffs, bary):
    nt = coords.shape[0]
    nq = bary.shape[0]
    det, grads = geometry_nb(coords)
    u = np.zeros((nt, nq, 2))
    du = np.zeros((nt, nq, 2, 2))
    g = np.empty((4, 2))
    v = np.empty(4)
    for t in range(nt):
        for q in range(nq):
            l0 = bary[q, 0]
            l1 = bary[q, 1]
            l2 = bary[q, 2]
            v[0] = l0
            v[1] = l1
            v[2] = l2
            v[3] = 27.0 * l0 * l1 * l2
            for c in range(2):
                g[0, c] = grads[t, 0, c]
                g[1, c] = grads[t, 1, c]
                g[2, c] = grads[t, 2, c]
                g[3, c] = 27.0 * (l1 * l2 * grads[t, 0, c] + l0 * l2 * grads[t, 1, c] + l0 * l1 * grads[t, 2, c])
            for a in range(4):
                for i in range(2):
                    ca = local_coeffs[t, 2 * a + i]
                    u[t, q, i] += v[a] * ca
                    for j in range(2):
                        du[t, q, i, j] += g[a, j] * ca
    return u, du


def mini_eval(coords, local_coeffs, bary):
    """Values (nt, nq, 2) and gradients (nt, nq, 2, 2) of a MINI field.

    ``du[..., i, j]`` is the derivative of component ``i`` in direction ``j``.
    """
    coords = np.ascontiguousarray(coords, dtype=float)
    local_coeffs = np.ascontiguousarray(local_coeffs, dtype=float)
    bary = np.ascontiguousarray(bary, dtype=float)
    if _jit.use_numba():
        return mini_eval_nb(coords, local_coeffs, bary)
    return mini_eval_np(coords, local_coeffs, bary)


def mini_basis(coords, bary):
    """Scalar MINI basis values (nq, 4) and gradients (nt, nq, 4, 2)."""
    det, grads = geometry(coords)
    return _mini_basis_np(grads, np.asarray(bary, dtype=float))
