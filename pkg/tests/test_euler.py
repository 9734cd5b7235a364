import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expdg.basis import gauss_quadrature, l2_project, lgl_basis
from expdg.euler import (EulerConfig, EulerDG, InadmissibleStateError, conservative,
                         euler_flux, euler_full_rhs, euler_split_operator, flux_jacobian,
                         isentropic_vortex, lax_friedrichs_flux, normal_flux, primitives,
                         roe_average, roe_flux, sound_speed)
from expdg.mesh import FieldState, build_quad_mesh

G = 1.4


def state(rho, u, v, p):
    return conservative(np.float64(rho), np.float64(u), np.float64(v), np.float64(p), G)


admissible = st.tuples(st.floats(0.1, 5.0), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 5.0))
angles = st.floats(0, 2 * math.pi)


def unit(theta):
    return (math.cos(theta), math.sin(theta))


# -- pointwise physics ----------------------------------------------------------------

def test_flux_at_rest():
    f = euler_flux(state(1, 0, 0, 1))
    np.testing.assert_allclose(f[:, 0], [0, 1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(f[:, 1], [0, 0, 1, 0], atol=1e-15)


def test_mean_flow_energy_and_mass_flux():
    q = state(1, 0.2, 0, 1)
    assert q[3] == pytest.approx(2.52)
    assert euler_flux(q)[0, 0] == pytest.approx(0.2)


def test_inadmissible_state():
    with pytest.raises(InadmissibleStateError):
        euler_flux(np.array([1.0, 0.0, 0.0, -1.0]))
    with pytest.raises(InadmissibleStateError):
        flux_jacobian(np.array([-1.0, 0.0, 0.0, 1.0]), (1.0, 0.0))


@settings(max_examples=100, deadline=None)
@given(s=admissible, theta=angles)
def test_homogeneity(s, theta):
    q = state(*s)
    n = unit(theta)
    fq = normal_flux(q, n, G)
    assert np.abs(flux_jacobian(q, n) @ q - fq).max() <= 1e-12 * max(1, np.abs(fq).max())


@settings(max_examples=60, deadline=None)
@given(s=admissible, theta=angles)
def test_jacobian_matches_finite_differences(s, theta):
    q = state(*s)
    n = unit(theta)
    a = flux_jacobian(q, n)
    eps = 1e-6
    fd = np.column_stack([(normal_flux(q + eps * e, n, G) - normal_flux(q - eps * e, n, G)) / (2 * eps)
                          for e in np.eye(4)])
    assert np.abs(a - fd).max() <= 1e-6 * max(1, np.abs(a).max())


def test_jacobian_at_rest():
    n = (0.6, 0.8)
    a = flux_jacobian(state(1.3, 0, 0, 0.9), n)
    np.testing.assert_allclose(a[0], [0, 0.6, 0.8, 0], atol=1e-15)
    np.testing.assert_allclose(a[:, 3], [0, (G - 1) * 0.6, (G - 1) * 0.8, 0], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(s=admissible, theta=angles)
def test_jacobian_eigenvalues(s, theta):
    q = state(*s)
    n = unit(theta)
    un = s[1] * n[0] + s[2] * n[1]
    a = float(sound_speed(q, G))
    ev = np.sort(np.linalg.eigvals(flux_jacobian(q, n)).real)
    np.testing.assert_allclose(ev, [un - a, un, un, un + a], atol=1e-8 * (1 + a + abs(un)))


def test_roe_average_hand_values():
    avg = roe_average(state(1, 0, 0, 1), state(4, 3, 0, 1))
    assert avg.rho == pytest.approx(2.0)
    assert avg.u == pytest.approx(2.0)


@settings(max_examples=50, deadline=None)
@given(a=admissible, b=admissible)
def test_roe_average_symmetric_and_consistent(a, b):
    qa, qb = state(*a), state(*b)
    x, y = roe_average(qa, qb), roe_average(qb, qa)
    for f in ("rho", "u", "v", "H", "a"):
        assert getattr(x, f) == pytest.approx(getattr(y, f), rel=1e-13, abs=1e-13)
    same = roe_average(qa, qa)
    rho, u, v, p = primitives(qa, G)
    assert same.rho == pytest.approx(rho) and same.u == pytest.approx(u, abs=1e-14)
    assert same.a == pytest.approx(float(sound_speed(qa, G)))


@settings(max_examples=60, deadline=None)
@given(a=admissible, b=admissible, theta=angles)
def test_roe_flux_consistency_and_conservation(a, b, theta):
    qa, qb = state(*a), state(*b)
    n = unit(theta)
    np.testing.assert_allclose(roe_flux(qa, qa, n), normal_flux(qa, n, G), rtol=1e-12, atol=1e-12)
    fwd = roe_flux(qa, qb, n)
    back = roe_flux(qb, qa, (-n[0], -n[1]))
    np.testing.assert_allclose(fwd, -back, rtol=1e-12, atol=1e-12 * max(1, np.abs(fwd).max()))


def test_roe_flux_supersonic_upwinding():
    a = math.sqrt(G)
    ql, qr = state(1.0, 3 * a, 0.2, 1.0), state(1.1, 3.2 * a, -0.1, 1.05)
    np.testing.assert_allclose(roe_flux(ql, qr, (1.0, 0.0)), normal_flux(ql, (1.0, 0.0), G), rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(a=admissible, b=admissible, theta=angles)
def test_lax_friedrichs_flux_conservative(a, b, theta):
    qa, qb = state(*a), state(*b)
    n = unit(theta)
    np.testing.assert_allclose(lax_friedrichs_flux(qa, qa, n), normal_flux(qa, n, G), rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(lax_friedrichs_flux(qa, qb, n), -lax_friedrichs_flux(qb, qa, (-n[0], -n[1])),
                               rtol=1e-12, atol=1e-12)


# -- vortex ---------------------------------------------------------------------------

def test_vortex_far_field_and_center():
    cfg = EulerConfig()
    far = isentropic_vortex(np.array(25.0), np.array(0.0), 0.0, cfg)
    np.testing.assert_allclose(far, state(1, 0.2, 0, 1), atol=1e-80)
    c = isentropic_vortex(np.array(5.0), np.array(0.0), 0.0, cfg)
    rho, u, v, p = primitives(c, G)
    assert u == pytest.approx(0.2) and v == pytest.approx(0.0, abs=1e-15)
    temp_center = 1 - (1 / 14) * (0.05 / (2 * math.pi)) ** 2 * math.e**2
    assert p / rho == pytest.approx(temp_center, rel=1e-14)
    assert 1 - temp_center == pytest.approx(3.342e-5, rel=1e-3)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(0, 10), y=st.floats(-5, 5), t=st.floats(0, 3), d=st.floats(-2, 2))
def test_vortex_translates_with_mean_flow(x, y, t, d):
    a = isentropic_vortex(np.array(x), np.array(y), t)
    b = isentropic_vortex(np.array(x - 0.2 * d), np.array(y), t - d)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


# -- DG operator ------------------------------------------------------------------------

def vortex_mesh(n):
    return build_quad_mesh(((0.0, 10.0), (-5.0, 5.0)), n, n)


def random_admissible_field(rng, mesh, k):
    n = mesh.nelements * (k + 1) ** 2
    rho = rng.uniform(0.5, 2.0, n)
    u, v = rng.uniform(-0.5, 0.5, (2, n))
    p = rng.uniform(0.5, 2.0, n)
    return FieldState(mesh, lgl_basis(k), conservative(rho, u, v, p, G).reshape(mesh.nelements, -1, 4))


@pytest.mark.parametrize("flux", ["roe", "lf"])
def test_uniform_flow_is_steady(flux):
    mesh = vortex_mesh(3)
    q = FieldState(mesh, lgl_basis(3), np.broadcast_to(state(1.2, 0.3, -0.1, 0.8), (9, 16, 4)).copy())
    op = euler_split_operator(q, EulerConfig(flux=flux))
    assert np.abs(op.rhs(q).values).max() < 1e-13


@settings(max_examples=15, deadline=None)
@given(k=st.integers(1, 4), seed=st.integers(0, 2**31 - 1), flux=st.sampled_from(["roe", "lf"]))
def test_euler_splitting_invariance(k, seed, flux):
    rng = np.random.default_rng(seed)
    mesh = vortex_mesh(3)
    q, r1, r2 = (random_admissible_field(rng, mesh, k) for _ in range(3))
    cfg = EulerConfig(flux=flux)
    a = euler_split_operator(r1, cfg).rhs(q).values
    b = euler_split_operator(r2, cfg).rhs(q).values
    full = euler_full_rhs(q, cfg).values
    scale = np.abs(full).max()
    assert np.abs(a - b).max() <= 1e-11 * scale
    assert np.abs(a - full).max() <= 1e-11 * scale


@settings(max_examples=15, deadline=None)
@given(k=st.integers(1, 4), seed=st.integers(0, 2**31 - 1), flux=st.sampled_from(["roe", "lf"]))
def test_euler_conservation(k, seed, flux):
    rng = np.random.default_rng(seed)
    mesh = build_quad_mesh(((0.0, 2.0), (0.0, 1.0)), 3, 2)
    q = random_admissible_field(rng, mesh, k)
    op = EulerDG(mesh, lgl_basis(k), EulerConfig(flux=flux))
    r = op.full_rhs(q.values)
    assert np.abs(op.component_integrals(r)).max() <= 1e-11 * max(1, np.abs(r).max())


def test_L_is_linear_and_reference_must_be_admissible():
    rng = np.random.default_rng(1)
    mesh = vortex_mesh(2)
    ref, u, w = (random_admissible_field(rng, mesh, 2) for _ in range(3))
    op = euler_split_operator(ref)
    lhs = op.apply_L(2.0 * u.as_vector() - 0.5 * w.as_vector())
    rhs = 2.0 * op.apply_L(u.as_vector()) - 0.5 * op.apply_L(w.as_vector())
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max()
    bad = ref.copy()
    bad.values[0, 0, 0] = -1.0
    with pytest.raises(InadmissibleStateError):
        euler_split_operator(bad)


def test_vortex_rhs_consistency_converges():
    # exact solution translates: q_t = -u_inf q_x, so RHS(Pi q) -> -u_inf d/dx q
    k = 4
    eps = 1e-4

    def exact_rate(x, y):
        return (isentropic_vortex(x, y, eps) - isentropic_vortex(x, y, -eps)) / (2 * eps)

    errs = []
    for n in (4, 8, 16):
        mesh = vortex_mesh(n)
        q = l2_project(lambda x, y: isentropic_vortex(x, y, 0.0), mesh, lgl_basis(k))
        r = euler_full_rhs(q)
        quad = gauss_quadrature(k + 3)
        b = lgl_basis(k).interpolation_matrix(quad.points)
        rv = r.values.reshape(n, n, k + 1, k + 1, 4)
        rq = np.einsum("ai,bj,XYijc->XYabc", b, b, rv)
        x, y = mesh.map_points(quad.points)
        diff = (rq - exact_rate(x, y))[..., 0]
        h = 10.0 / n
        errs.append(math.sqrt(np.einsum("a,b,XYab->", quad.weights, quad.weights, diff**2) * h * h / 4))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders[-1] >= 4.0


def test_euler_needs_periodic_2d_mesh():
    with pytest.raises(ValueError):
        EulerDG(build_quad_mesh(((0, 1), (0, 1)), 2, 2, bc="dirichlet_zero"), lgl_basis(2))
