"""Reference-element basis functions and quadrature rules.

Conventions
-----------
Reference triangle has vertices (0,0), (1,0), (0,1); a reference point
``(xi, eta)`` has barycentric coordinates ``(1 - xi - eta, xi, eta)``.
Local edge ``i`` of a triangle is the edge opposite local vertex ``i``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 10

# gradients of the barycentric coordinates on the reference triangle
P1_REF_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class QuadRule:
    """Quadrature rule in barycentric coordinates.

    Triangle rules have ``points`` of shape (nq, 3) and weights summing to the
    reference area 1/2. Edge rules have ``points`` of shape (nq, 2) and
    weights summing to the reference length 1.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


def _check_degree(degree):
    if int(degree) != degree or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"quadrature degree must be an integer in [1, {MAX_DEGREE}], got {degree!r}")
    return int(degree)


@lru_cache(maxsize=None)
def quad_triangle(degree):
    """Rule on the reference triangle exact for polynomials of total degree <= ``degree``.

    Degrees 1 and 2 use the classical barycenter and interior 3-point rules;
    higher degrees use a collapsed (Duffy) Gauss-Jacobi x Gauss-Legendre
    product, which keeps all weights positive and all points interior.
    """
    degree = _check_degree(degree)
    if degree == 1:
        pts = np.array([[1.0, 1.0, 1.0]]) / 3.0
        w = np.array([0.5])
    elif degree == 2:
        pts = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        w = np.full(3, 1.0 / 6.0)
    else:
        m = (degree + 2) // 2
        # x-direction carries the (1 - s) Jacobian factor of the collapse
        s, ws = roots_jacobi(m, 1.0, 0.0)
        r, wr = np.polynomial.legendre.leggauss(m)
        s = 0.5 * (s + 1.0)
        ws = ws / 4.0
        r = 0.5 * (r + 1.0)
        wr = wr / 2.0
        xi = np.repeat(s, m)
        eta = np.outer(1.0 - s, r).ravel()
        w = np.outer(ws, wr).ravel()
        pts = np.column_stack([1.0 - xi - eta, xi, eta])
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(pts, w, degree)


@lru_cache(maxsize=None)
def quad_edge(degree):
    """Gauss-Legendre rule on [0, 1]; points given as (1 - s, s)."""
    degree = _check_degree(degree)
    m = (degree + 2) // 2
    r, w = np.polynomial.legendre.leggauss(m)
    s = 0.5 * (r + 1.0)
    w = 0.5 * w
    pts = np.column_stack([1.0 - s, s])
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(pts, w, degree)


def _bary(ref_point):
    ref_point = np.asarray(ref_point, dtype=float)
    xi, eta = ref_point[..., 0], ref_point[..., 1]
    return np.stack([1.0 - xi - eta, xi, eta], axis=-1)


def eval_p1(ref_point):
    """P1 Lagrange basis at reference point(s).

    Returns ``(values, gradients)`` with values of shape (..., 3) and the
    constant reference gradients of shape (3, 2).
    """
    return _bary(ref_point), P1_REF_GRADS.copy()


def eval_bubble(ref_point):
    """Cubic bubble ``27 l0 l1 l2`` and its reference gradient."""
    lam = _bary(ref_point)
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    value = 27.0 * l0 * l1 * l2
    dl = np.stack([l1 * l2, l0 * l2, l0 * l1], axis=-1)
    grad = 27.0 * dl @ P1_REF_GRADS
    return value, grad


def bubble_bary(lam):
    """Bubble value and the coefficients of grad(l_k) in its gradient."""
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    return 27.0 * l0 * l1 * l2, 27.0 * np.stack([l1 * l2, l0 * l2, l0 * l1], axis=-1)


def triangle_area(coords):
    """Signed area of triangle(s) with vertex coordinates of shape (..., 3, 2)."""
    coords = np.asarray(coords, dtype=float)
    e1 = coords[..., 1, :] - coords[..., 0, :]
    e2 = coords[..., 2, :] - coords[..., 0, :]
    return 0.5 * (e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])


def p1_gradients(coords):
    """Physical gradients of the barycentric coordinates, shape (..., 3, 2)."""
    coords = np.asarray(coords, dtype=float)
    jac = np.stack([coords[..., 1, :] - coords[..., 0, :], coords[..., 2, :] - coords[..., 0, :]], axis=-1)
    inv = np.linalg.inv(jac)
    # grad(lambda_k) = J^{-T} grad_ref(lambda_k)
    return np.einsum("kr,...rc->...kc", P1_REF_GRADS, inv)


def eval_rt0(coords, edge_signs, points):
    """Lowest-order Raviart-Thomas basis on a physical triangle.

    ``psi_i(x) = s_i (x - P_i) / (2|K|)`` where ``P_i`` is the vertex opposite
    local edge ``i``; this is the contravariant Piola image of the reference
    basis. Each function carries unit outward flux ``s_i`` through its own
    edge and none through the others, so ``div psi_i = s_i / |K|``.

    Returns ``(values, divergences)`` of shapes (3, m, 2) and (3,).
    """
    coords = np.asarray(coords, dtype=float)
    signs = np.asarray(edge_signs, dtype=float)
    area = triangle_area(coords)
    if not area > 0.0:
        raise ValueError(f"degenerate or clockwise triangle (signed area {area:g})")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    values = signs[:, None, None] * (pts[None, :, :] - coords[:, None, :]) / (2.0 * area)
    return values, signs / area


def eval_dg0(points):
    return np.ones(np.atleast_2d(points).shape[0])
