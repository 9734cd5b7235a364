import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from expdg.basis import (InvalidOrderError, MAX_ORDER, gauss_quadrature, l2_project, lgl_basis,
                         lgl_quadrature, over_integration_points)
from expdg.mesh import FieldState, build_interval_mesh, build_quad_mesh, PERIODIC


def sympy_lgl(k):
    """Independent oracle: roots of (1 - x^2) P_k'(x) and 2 / (k (k+1) P_k(x)^2)."""
    x = sp.Symbol("x")
    pk = sp.legendre(k, x)
    roots = sorted(sp.Poly(sp.expand((1 - x**2) * sp.diff(pk, x)), x).nroots(n=30), key=float)
    weights = [float(2 / (k * (k + 1) * pk.subs(x, r).evalf(30) ** 2)) for r in roots]
    return np.array([float(r) for r in roots]), np.array(weights)


def test_k1_endpoint_rule():
    b = lgl_basis(1)
    np.testing.assert_allclose(b.nodes, [-1, 1])
    np.testing.assert_allclose(b.weights, [1, 1])


def test_k2_closed_form():
    b = lgl_basis(2)
    np.testing.assert_allclose(b.nodes, [-1, 0, 1], atol=1e-15)
    np.testing.assert_allclose(b.weights, [1 / 3, 4 / 3, 1 / 3], rtol=1e-14)


def test_k3_closed_form():
    b = lgl_basis(3)
    s = 1 / math.sqrt(5)
    np.testing.assert_allclose(b.nodes, [-1, -s, s, 1], rtol=1e-14)
    np.testing.assert_allclose(b.weights, [1 / 6, 5 / 6, 5 / 6, 1 / 6], rtol=1e-14)


@pytest.mark.parametrize("k", [2, 4, 7, 12, 20])
def test_nodes_and_weights_match_symbolic_oracle(k):
    nodes, weights = sympy_lgl(k)
    b = lgl_basis(k)
    np.testing.assert_allclose(b.nodes, nodes, atol=1e-14)
    np.testing.assert_allclose(b.weights, weights, rtol=1e-12)


@pytest.mark.parametrize("k", range(1, MAX_ORDER + 1))
def test_basis_invariants(k):
    b = lgl_basis(k)
    assert np.all(np.diff(b.nodes) > 0)
    assert b.nodes[0] == -1.0 and b.nodes[-1] == 1.0
    np.testing.assert_allclose(b.nodes, -b.nodes[::-1], atol=1e-15)
    assert np.all(b.weights > 0)
    assert abs(b.weights.sum() - 2.0) < 1e-13
    np.testing.assert_allclose(b.diff_matrix @ np.ones(k + 1), 0.0, atol=1e-10)
    np.testing.assert_allclose(b.diff_matrix @ b.nodes, 1.0, atol=1e-10)


@pytest.mark.parametrize("k", [1, 3, 6, 10])
def test_diff_matrix_exact_on_monomials(k):
    b = lgl_basis(k)
    for j in range(k + 1):
        d = b.diff_matrix @ b.nodes**j
        exact = j * b.nodes ** max(j - 1, 0) if j else np.zeros(k + 1)
        np.testing.assert_allclose(d, exact, atol=1e-12 * max(1, k * k))


@pytest.mark.parametrize("k", [0, -1, MAX_ORDER + 1])
def test_invalid_order(k):
    with pytest.raises(InvalidOrderError):
        lgl_basis(k)


def test_gauss_small_rules():
    q1 = gauss_quadrature(1)
    np.testing.assert_allclose(q1.points, [0.0])
    np.testing.assert_allclose(q1.weights, [2.0])
    q2 = gauss_quadrature(2)
    np.testing.assert_allclose(q2.points, [-1 / math.sqrt(3), 1 / math.sqrt(3)])
    np.testing.assert_allclose(q2.weights, [1, 1])
    assert q2.exact_degree == 3
    assert abs(gauss_quadrature(3).integrate(lambda x: x**4) - 0.4) < 1e-15


def test_gauss_rejects_zero_points():
    with pytest.raises(ValueError):
        gauss_quadrature(0)


@settings(max_examples=60, deadline=None)
@given(k=st.integers(1, 12), seed=st.integers(0, 2**31 - 1))
def test_lgl_quadrature_exact_to_degree_2k_minus_1(k, seed):
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal(2 * k)  # degree 2k-1
    poly = np.polynomial.Polynomial(coeffs)
    exact = poly.integ()(1.0) - poly.integ()(-1.0)
    q = lgl_quadrature(k)
    assert q.exact_degree == 2 * k - 1
    assert abs(q.integrate(poly) - exact) <= 1e-12 * max(1.0, np.abs(coeffs).sum())


@pytest.mark.parametrize("k,nq", [(1, 3), (2, 4), (3, 6), (4, 7), (8, 13)])
def test_over_integration_point_count(k, nq):
    assert over_integration_points(k) == nq


def test_projection_reproduces_constants_and_linears():
    mesh = build_interval_mesh(0.0, 1.0, 1)
    u = l2_project(lambda x: np.ones_like(x), build_interval_mesh(0.0, 1.0, 7), lgl_basis(3))
    np.testing.assert_allclose(u.values, 1.0, rtol=1e-14)
    lin = l2_project(lambda x: x, mesh, lgl_basis(1))
    np.testing.assert_allclose(lin.values[0, :, 0], [0.0, 1.0], atol=1e-15)


def test_projection_of_sine_converges_at_order_k_plus_1():
    # error of the projection against high-order quadrature of the analytic integrand
    k = 4
    errs = []
    for ne in (10, 20, 40):
        mesh = build_interval_mesh(0.0, 1.0, ne, PERIODIC)
        b = lgl_basis(k)
        u = l2_project(lambda x: np.sin(2 * np.pi * x), mesh, b)
        q = gauss_quadrature(20)
        x = mesh.map_points(q.points)
        uq = u.values[..., 0] @ b.interpolation_matrix(q.points).T
        h = 1.0 / ne
        errs.append(math.sqrt(np.sum(h / 2 * q.weights * (uq - np.sin(2 * np.pi * x)) ** 2)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 4.8)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(1, 8), ne=st.integers(1, 6), seed=st.integers(0, 2**31 - 1))
def test_projection_idempotent_on_piecewise_polynomials(k, ne, seed):
    rng = np.random.default_rng(seed)
    mesh = build_interval_mesh(-1.0, 2.0, ne)
    b = lgl_basis(k)
    u = FieldState(mesh, b, rng.standard_normal((ne, k + 1, 1)))
    back = l2_project(lambda x: u.evaluate(x.ravel()).reshape(*x.shape, 1), mesh, b)
    np.testing.assert_allclose(back.values, u.values, atol=1e-11)


def test_projection_2d_components():
    mesh = build_quad_mesh(((0.0, 1.0), (0.0, 2.0)), 3, 2)
    b = lgl_basis(2)
    u = l2_project(lambda x, y: np.stack([x + 2 * y, x * y], axis=-1), mesh, b)
    assert u.values.shape == (6, 9, 2)
    x, y = mesh.map_points(b.nodes)
    vals = u.values.reshape(3, 2, 3, 3, 2)
    np.testing.assert_allclose(vals[..., 0], x + 2 * y, atol=1e-13)
    np.testing.assert_allclose(vals[..., 1], x * y, atol=1e-13)


def test_projection_rejects_underintegrating_rule():
    with pytest.raises(ValueError):
        l2_project(np.sin, build_interval_mesh(0, 1, 2), lgl_basis(4), gauss_quadrature(3))
