import numpy as np
import pytest

from lagfsi.catalog import X, AnalyticField, zero_field
from lagfsi.kinematics import flow_map_state
from lagfsi.stepper import (
    PenaltySettings,
    StaticOperators,
    assemble_operators,
    compose_forcing,
    identity_coefficients,
    recover_pressure,
    solve_linear_problem,
)


def test_penalty_scales_with_eps(coarse, params):
    _, V, _ = coarse
    a = identity_coefficients(V)
    P1 = assemble_operators(V, a, params, 1e-3).P
    P2 = assemble_operators(V, a, params, 2e-3).P
    assert abs(P1 - 2 * P2).max() <= 1e-9 * abs(P1).max()


def test_operators_symmetric_for_deformed_map(coarse, params):
    _, V, _ = coarse
    disp = 0.05 * np.column_stack([np.sin(3 * V.coords[:, 1]), V.coords[:, 0] ** 2])
    st = flow_map_state(V, disp)
    ops = assemble_operators(V, st.a, params, 1e-3)
    for M in (ops.A, ops.K, ops.P):
        assert abs(M - M.T).max() <= 1e-13 * max(1.0, abs(M).max())


def test_invalid_coefficients(coarse, params):
    _, V, _ = coarse
    a = identity_coefficients(V)
    a[0, 0] = np.nan
    with pytest.raises(ValueError):
        assemble_operators(V, a, params, 1e-3)
    a = 3.0 * identity_coefficients(V)
    with pytest.raises(ValueError):
        assemble_operators(V, a, params, 1e-3)


def test_zero_input_zero_output(coarse, params):
    _, V, Q = coarse
    times = np.linspace(0, 0.05, 6)
    tr = solve_linear_problem(V, Q, params, zero_field(), np.zeros((V.n_nodes, 2)), np.zeros(Q.n),
                              np.zeros(Q.n), times, PenaltySettings(1e-3))
    assert np.abs(tr.w).max() == 0 and np.abs(tr.q_eps).max() == 0


@pytest.mark.parametrize("integrator", ["backward-euler", "midpoint"])
def test_boundary_rows_stay_zero(coarse, params, integrator):
    _, V, Q = coarse
    f = AnalyticField((1 + X, X**2))
    times = np.linspace(0, 0.05, 6)
    tr = solve_linear_problem(V, Q, params, f, np.zeros((V.n_nodes, 2)), np.zeros(Q.n), np.zeros(Q.n), times,
                              PenaltySettings(1e-3), integrator=integrator)
    assert np.all(tr.w[:, V.boundary] == 0)
    assert np.abs(tr.w).max() > 0


def test_pressure_at_origin(coarse):
    _, V, Q = coarse
    q0 = Q.interpolate(lambda p: p[:, 0])
    q = recover_pressure(V, Q, np.zeros((V.n_nodes, 2)), identity_coefficients(V), q0, np.zeros(Q.n), 0.0, 1e-3)
    np.testing.assert_array_equal(q, q0)


def test_pressure_penalty_substitution(coarse):
    _, V, Q = coarse
    eps, c, t = 1e-3, 2.0, 0.1
    w = V.interpolate(lambda p: 0.5 * eps * c * p)  # div w = eps c
    q0 = Q.interpolate(lambda p: 1 + p[:, 1])
    q1 = Q.interpolate(lambda p: p[:, 0])
    q = recover_pressure(V, Q, w, identity_coefficients(V), q0, q1, t, eps)
    np.testing.assert_allclose(q, q0 + t * q1 - c, atol=1e-10)


def test_compose_forcing_examples(coarse):
    _, V, _ = coarse
    disp = np.tile([0.1, 0.0], (V.n_nodes, 1))
    const = AnalyticField((1.5, -2))
    F = compose_forcing(const, V, disp, 0.0)
    np.testing.assert_array_equal(F, np.broadcast_to([1.5, -2.0], F.shape))
    ident = AnalyticField((X, sp_y()))
    F = compose_forcing(ident, V, disp, 0.0)
    fe = V.fluid_elements
    np.testing.assert_allclose(F[fe], V.qpoints[fe] + [0.1, 0.0], atol=1e-14)


def sp_y():
    from lagfsi.catalog import Y

    return Y


def test_static_free_dofs(coarse, params):
    _, V, _ = coarse
    st = StaticOperators(V, params)
    assert len(st.free) == 2 * int((~V.boundary).sum())
