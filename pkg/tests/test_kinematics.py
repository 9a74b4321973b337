import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lagfsi.fem import P2Space
from lagfsi.geometry import box_mesh, disk_mesh
from lagfsi.kinematics import (
    InvertibilityError,
    SingularMapError,
    a_divergence,
    advance_flow_map,
    coefficient_matrix,
    coefficient_time_derivatives,
    det_and_cofactor,
    flow_map_state,
    flow_map_trajectory,
    invertibility_check,
    piola_residual,
)


@pytest.fixture(scope="module")
def box():
    return P2Space(box_mesh(1.0, 1.0, 3, 3))


def test_zero_velocity_keeps_map(box):
    st0 = flow_map_state(box)
    st1 = advance_flow_map(st0, np.zeros((box.n_nodes, 2)), 0.1)
    assert np.all(st1.displacement == 0)


def test_constant_velocity_shift(box):
    st1 = advance_flow_map(flow_map_state(box), np.tile([1.0, 0.0], (box.n_nodes, 1)), 0.1)
    np.testing.assert_allclose(st1.displacement, np.tile([0.1, 0.0], (box.n_nodes, 1)), atol=1e-15)


def test_nonpositive_dt(box):
    with pytest.raises(ValueError):
        advance_flow_map(flow_map_state(box), np.zeros((box.n_nodes, 2)), 0.0)


@pytest.mark.parametrize(
    "F, a, det",
    [
        (np.eye(2), np.eye(2), 1.0),
        (2 * np.eye(2), 0.5 * np.eye(2), 4.0),
        ([[1.0, 0.3], [0.0, 1.0]], [[1.0, -0.3], [0.0, 1.0]], 1.0),
    ],
)
def test_coefficient_matrix_examples(F, a, det):
    a_c, det_c = coefficient_matrix(np.array(F))
    np.testing.assert_allclose(a_c, a, atol=1e-15)
    assert det_c == pytest.approx(det, abs=1e-15)


def test_singular_map():
    with pytest.raises(SingularMapError):
        coefficient_matrix(np.array([[1.0, 2.0], [0.5, 1.0]]))


def test_cofactor_3d():
    F = np.array([[2.0, 0.1, 0.0], [0.0, 1.0, 0.3], [0.2, 0.0, 1.5]])
    det, cof = det_and_cofactor(F)
    assert det == pytest.approx(np.linalg.det(F), rel=1e-14)
    np.testing.assert_allclose(cof, det * np.linalg.inv(F).T, atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (4, 2, 2), elements=st.floats(-0.25, 0.25)))
def test_coefficient_algebra_property(G):
    # F = I + G with |G| <= 1/4 entrywise has det >= 1/2 for 2x2
    F = np.eye(2) + G
    a, det = coefficient_matrix(F)
    assert np.abs(a @ F - np.eye(2)).max() <= 1e-12
    assert np.abs(F @ a - np.eye(2)).max() <= 1e-12


@pytest.mark.parametrize("scale, valid", [(1.0, True), (0.6, False), (0.8, True)])
def test_invertibility_examples(box, scale, valid):
    disp = (scale - 1.0) * box.coords
    rep = invertibility_check(flow_map_state(box, disp, elements=np.arange(box.mesh.n_elements)))
    assert rep.valid is valid
    assert rep.min_det == pytest.approx(scale**2, abs=1e-13)


def test_time_derivatives_examples():
    rng = np.random.default_rng(0)
    a, _ = coefficient_matrix(np.eye(2) + 0.1 * rng.standard_normal((2, 2)))
    gvt = rng.standard_normal((2, 2))
    a_t, a_tt = coefficient_time_derivatives(a, np.zeros((2, 2)), gvt)
    np.testing.assert_allclose(a_t, 0)
    np.testing.assert_allclose(a_tt, -a @ gvt @ a, atol=1e-15)
    G = rng.standard_normal((2, 2))
    a_t, _ = coefficient_time_derivatives(np.eye(2), G, np.zeros((2, 2)))
    np.testing.assert_allclose(a_t, -G, atol=1e-15)


def test_a_divergence_identity():
    G = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert a_divergence(np.eye(2), G) == pytest.approx(5.0)


def test_piola_affine():
    V = P2Space(disk_mesh(1.0, [(0, 0, 0.4)], 0.25))
    disp = V.coords @ np.array([[0.1, 0.2], [-0.05, 0.15]]).T + 0.3
    assert np.abs(piola_residual(V, disp)).max() <= 1e-12


def test_guard_monotone_in_dt(box):
    v = 3.0 * np.column_stack([-box.coords[:, 0], -box.coords[:, 1]])
    st0 = flow_map_state(box, elements=np.arange(box.mesh.n_elements))
    dets = [advance_flow_map(st0, v, dt).min_det for dt in (0.16, 0.08, 0.04, 0.02)]
    assert all(b >= a for a, b in zip(dets, dets[1:]))


def test_a_drift_linear_in_t(box):
    G = np.array([[0.3, -0.2], [0.1, 0.4]])
    v = box.coords @ G.T
    times = np.linspace(0, 0.2, 21)
    _, states = flow_map_trajectory(box, times, np.repeat(v[None], len(times), 0))
    drift = np.array([np.abs(s.a - np.eye(2)).max() for s in states])
    tm = 0.5 * (times[1:] + times[:-1])
    assert np.all(drift <= 1.01 * np.abs(G).sum() * tm + 1e-12)


def test_trajectory_raises_on_collapse(box):
    v = -5.0 * box.coords
    times = np.linspace(0, 0.2, 5)
    with pytest.raises(InvertibilityError) as exc:
        flow_map_trajectory(box, times, np.repeat(v[None], 5, 0))
    assert exc.value.time is not None and exc.value.min_det < 0.5
