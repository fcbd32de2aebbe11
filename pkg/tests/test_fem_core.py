from math import factorial

import numpy as np
import pytest

from stokes_darcy.fem_core import (
    eval_bubble,
    eval_p1,
    eval_rt0,
    quad_edge,
    quad_triangle,
    triangle_area,
)


def _ref_xy(rule):
    return rule.points[:, 1], rule.points[:, 2]


@pytest.mark.parametrize("degree", range(1, 11))
def test_triangle_monomials(degree):
    rule = quad_triangle(degree)
    x, y = _ref_xy(rule)
    assert (rule.weights > 0).all()
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            assert abs(rule.weights @ (x**a * y**b) - exact) <= 1e-13


@pytest.mark.parametrize("degree", range(1, 11))
def test_edge_monomials(degree):
    rule = quad_edge(degree)
    s = rule.points[:, 1]
    for a in range(degree + 1):
        assert abs(rule.weights @ s**a - 1.0 / (a + 1)) <= 1e-13


@pytest.mark.parametrize("degree", [0, 11, 2.5])
def test_degree_range(degree):
    with pytest.raises(ValueError):
        quad_triangle(degree)
    with pytest.raises(ValueError):
        quad_edge(degree)


def test_p1_partition_of_unity():
    pts = np.array([[0.2, 0.3], [0.0, 0.0], [1.0, 0.0]])
    vals, grads = eval_p1(pts)
    assert np.allclose(vals.sum(axis=-1), 1.0)
    assert np.allclose(grads.sum(axis=0), 0.0)
    assert np.allclose(vals[1], [1, 0, 0])


def test_bubble():
    v, g = eval_bubble([1 / 3, 1 / 3])
    assert np.isclose(v, 1.0)
    assert np.allclose(g, 0.0)
    for p in ([0.0, 0.4], [0.5, 0.5], [0.3, 0.0]):
        assert abs(eval_bubble(p)[0]) < 1e-15
    rule = quad_triangle(3)
    vals, _ = eval_bubble(rule.points[:, 1:])
    assert np.isclose(rule.weights @ vals, 27 / 120)


def test_bubble_gradient_fd():
    p = np.array([0.21, 0.33])
    _, g = eval_bubble(p)
    eps = 1e-6
    for k in range(2):
        d = np.zeros(2)
        d[k] = eps
        fd = (eval_bubble(p + d)[0] - eval_bubble(p - d)[0]) / (2 * eps)
        assert abs(fd - g[k]) < 1e-8


def _edge_flux(coords, signs, i, rule):
    # local edge i joins vertices i+1, i+2; outward normal of a ccw triangle
    a, b = coords[(i + 1) % 3], coords[(i + 2) % 3]
    t = b - a
    n = np.array([t[1], -t[0]]) / np.linalg.norm(t)
    x = rule.points[:, :1] * a + rule.points[:, 1:] * b
    vals, _ = eval_rt0(coords, signs, x)
    return np.linalg.norm(t) * (vals[:, :, :] @ n) @ rule.weights


def test_rt0_unit_fluxes():
    coords = np.array([[0.1, 0.2], [0.9, 0.4], [0.3, 1.1]])
    signs = np.array([1.0, -1.0, 1.0])
    rule = quad_edge(2)
    flux = np.array([_edge_flux(coords, signs, i, rule) for i in range(3)]).T  # (basis, edge)
    assert np.allclose(flux, np.diag(signs), atol=1e-12)


def test_rt0_divergence_and_constants():
    coords = np.array([[0.0, 0.0], [2.0, 0.5], [0.5, 1.5]])
    signs = np.ones(3)
    _, div = eval_rt0(coords, signs, np.zeros((1, 2)))
    assert np.allclose(div, 1.0 / triangle_area(coords))
    # a constant field c is reproduced from its outward fluxes
    c = np.array([0.7, -1.3])
    rule = quad_edge(2)
    fluxes = []
    for i in range(3):
        a, b = coords[(i + 1) % 3], coords[(i + 2) % 3]
        t = b - a
        fluxes.append(np.dot(c, [t[1], -t[0]]))
    pts = np.array([[0.3, 0.3], [1.0, 0.6]])
    vals, _ = eval_rt0(coords, signs, pts)
    assert np.allclose(np.einsum("i,imc->mc", fluxes, vals), c, atol=1e-12)
    assert rule.degree == 2


def test_rt0_rejects_clockwise():
    with pytest.raises(ValueError):
        eval_rt0(np.array([[0, 0], [0, 1], [1, 0]]), np.ones(3), np.zeros((1, 2)))


def test_spec_small_cases():
    r = quad_triangle(1)
    assert len(r) == 1 and np.allclose(r.points, 1 / 3) and r.weights[0] == 0.5
    assert np.allclose(eval_p1([1 / 3, 1 / 3])[0], 1 / 3)
    e = quad_edge(5)
    assert abs(e.weights @ e.points[:, 1] ** 5 - 1 / 6) < 1e-14


def test_rt0_sign_flip():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    pts = np.array([[0.2, 0.3], [0.5, 0.1]])
    a, da = eval_rt0(coords, np.ones(3), pts)
    b, db = eval_rt0(coords, np.array([1.0, -1.0, 1.0]), pts)
    assert np.allclose(b[1], -a[1]) and np.allclose(b[[0, 2]], a[[0, 2]])
    assert np.isclose(db[1], -da[1])
    # unit right triangle: int_K div psi_i = 1
    assert np.allclose(da * triangle_area(coords), 1.0)
