import numpy as np
import pytest

from lagfsi.fem import QUAD_W, P2Space


def test_quadrature_weights_sum():
    assert QUAD_W.sum() == pytest.approx(1.0, abs=1e-15)


def test_mass_sums_to_area(coarse):
    m, V, Q = coarse
    assert V.scalar_mass.sum() == pytest.approx(m.domain_area(), rel=1e-13)
    assert Q.mass(V).sum() == pytest.approx(m.fluid_area(), rel=1e-13)


def test_stiffness_kills_constants(coarse):
    _, V, _ = coarse
    assert np.abs(V.scalar_stiffness @ np.ones(V.n_nodes)).max() < 1e-12


def test_quadratic_interpolation_exact(coarse):
    _, V, _ = coarse
    fn = lambda p: np.stack([p[..., 0] ** 2 - p[..., 0] * p[..., 1], 3 * p[..., 1] ** 2 + 1], -1)  # noqa: E731
    c = V.interpolate(fn)
    val, grad, hess = V.eval_qp(c)
    x = V.qpoints
    np.testing.assert_allclose(val, fn(x), atol=1e-13)
    np.testing.assert_allclose(grad[..., 0, 0], 2 * x[..., 0] - x[..., 1], atol=1e-12)
    np.testing.assert_allclose(hess[..., 1, 1, 1], 6.0, atol=1e-10)


def test_projection_reproduces_quadratics(coarse):
    _, V, _ = coarse
    fn = lambda p: np.stack([p[..., 0] * p[..., 1], 1 - p[..., 1] ** 2], -1)  # noqa: E731
    np.testing.assert_allclose(V.project(fn(V.qpoints)), V.interpolate(fn), atol=1e-12)


def test_p1_fluid_space(coarse):
    m, V, Q = coarse
    assert Q.n == len(np.unique(m.elements[m.tags == 0]))
    q = Q.interpolate(lambda p: 2 * p[:, 0] - p[:, 1])
    val, grad = Q.eval_qp(V, q)
    np.testing.assert_allclose(grad, np.broadcast_to([2.0, -1.0], grad.shape), atol=1e-12)


def test_single_element_space():
    from lagfsi.geometry import mesh_from_triangles

    m = mesh_from_triangles(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]), np.array([0]))
    V = P2Space(m)
    assert V.n_nodes == 6
    assert V.scalar_mass.sum() == pytest.approx(0.5)
