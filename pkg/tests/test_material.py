import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lagfsi.material import (
    MaterialParams,
    elastic_energy_density,
    elastic_stress,
    elasticity_tensor,
    fluid_stress,
)

mats = arrays(np.float64, (2, 2), elements=st.floats(-10, 10))


def test_params_positive():
    with pytest.raises(ValueError):
        MaterialParams(-1.0, 1.0, 1.0)


def test_fluid_stress_examples():
    p1 = MaterialParams(1.0, 1.0, 1.0)
    np.testing.assert_array_equal(fluid_stress(np.zeros((2, 2)), 0.0, p1), np.zeros((2, 2)))
    np.testing.assert_array_equal(fluid_stress(np.eye(2), 1.0, p1), np.zeros((2, 2)))
    p2 = MaterialParams(2.0, 1.0, 1.0)
    np.testing.assert_array_equal(fluid_stress(np.array([[0, 1.0], [0, 0]]), 0.0, p2), [[0, 2.0], [0, 0]])


def test_fluid_stress_def_mode():
    p = MaterialParams(1.0, 1.0, 1.0)
    G = np.array([[0, 1.0], [0, 0]])
    np.testing.assert_allclose(fluid_stress(G, 0.0, p, "def"), [[0, 1.0], [1.0, 0]])
    with pytest.raises(ValueError):
        fluid_stress(G, 0.0, p, "other")


@settings(max_examples=50, deadline=None)
@given(mats, mats, st.floats(-5, 5), st.floats(-5, 5), st.floats(-3, 3))
def test_fluid_stress_superposition(G1, G2, p1, p2, s):
    par = MaterialParams(0.7, 1.0, 1.0)
    lhs = fluid_stress(G1 + s * G2, p1 + s * p2, par)
    rhs = fluid_stress(G1, p1, par) + s * fluid_stress(G2, p2, par)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_elastic_examples():
    p = MaterialParams(1.0, 1.0, 2.0)
    np.testing.assert_allclose(elastic_stress(np.array([[0, 1.0], [-1.0, 0]]), p), 0, atol=1e-15)
    np.testing.assert_allclose(elastic_stress(np.eye(2), p), (2 * p.lam + 2 * p.mu) * np.eye(2))


def test_contraction_matches_closed_form(rng):
    p = MaterialParams(1.0, 1.3, 0.7)
    G = rng.standard_normal((1000, 2, 2))
    c = elasticity_tensor(p, 2)
    via_tensor = np.einsum("ijkl,nkl->nij", c, G)
    np.testing.assert_allclose(elastic_stress(G, p), via_tensor, atol=1e-13)


def test_tensor_3d_symmetries():
    c = elasticity_tensor(MaterialParams(1.0, 2.0, 3.0), 3)
    np.testing.assert_array_equal(c, np.swapaxes(c, 0, 1))
    np.testing.assert_array_equal(c, np.transpose(c, (2, 3, 0, 1)))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (2, 2), elements=st.floats(-5, 5)))
def test_energy_coercive_on_symmetric(G):
    p = MaterialParams(1.0, 1.0, 1.0)
    S = 0.5 * (G + G.T)
    e = elastic_energy_density(S, p)
    assert e >= p.mu * np.sum(S**2) - 1e-12
    A = 0.5 * (G - G.T)
    assert abs(elastic_energy_density(A, p)) <= 1e-12
