import numpy as np
import pytest
from dataclasses import replace

from lagfsi.catalog import zero_field
from lagfsi.fixed_point import (
    CollisionRiskError,
    FixedPointDivergence,
    ProblemContext,
    ctm_membership,
    heat_smoother,
    iterate_to_fixed_point,
    l2h1_distance,
    lumped_mass,
    mollify_velocity,
    theta_map,
)
from lagfsi.initial_data import build_initial_data
from lagfsi.pipeline import second_start
from lagfsi.stepper import PenaltySettings


def test_lumped_mass_positive(coarse):
    _, V, _ = coarse
    ml = lumped_mass(V)
    assert np.all(ml > 0)
    assert ml.sum() == pytest.approx(V.scalar_mass.sum(), rel=1e-13)


@pytest.mark.parametrize("n", [2, 8])
def test_smoother_keeps_affine(coarse, n):
    _, V, _ = coarse
    v = V.coords @ np.array([[0.3, -1.0], [2.0, 0.5]]).T + [1.0, -2.0]
    np.testing.assert_allclose(heat_smoother(V, n)(v), v, atol=1e-12)


def test_mollified_initial_conditions(coarse, rng):
    _, V, _ = coarse
    times = np.linspace(0, 0.1, 11)
    v = rng.standard_normal((11, V.n_nodes, 2))
    u0 = rng.standard_normal((V.n_nodes, 2))
    w1 = rng.standard_normal((V.n_nodes, 2))
    for n in (None, 4):
        out = mollify_velocity(V, times, v, n, u0, w1)
        np.testing.assert_allclose(out[0], u0, atol=1e-13)
        np.testing.assert_allclose((out[1] - out[0]) / 0.01, w1, atol=1e-10)


def _zero_ctx(coarse, params, T=0.05):
    _, V, Q = coarse
    data = build_initial_data(zero_field(), zero_field(), V, Q, params)
    return ProblemContext(V, Q, params, zero_field(), data, np.linspace(0, T, 6), PenaltySettings(1e-3),
                          separation=0.6)


def test_zero_problem(coarse, params):
    ctx = _zero_ctx(coarse, params)
    res = theta_map(np.zeros((6, ctx.space.n_nodes, 2)), ctx)
    assert np.abs(res.trajectory.w).max() == 0
    fp = iterate_to_fixed_point(ctx)
    assert fp.report.converged and fp.report.iterations == 1
    assert fp.report.iterate_distances == [0.0]


def test_ctm_seed_and_zero_M(coarse, params, reference):
    ctx = reference.context()
    flag, br = ctm_membership(ctx, ctx.seed(), 1e12)
    assert flag and br["u0_mismatch"] == 0 and br["w1_mismatch"] <= 1e-12
    v = ctx.seed() + 1.0
    assert ctm_membership(ctx, v, 0.0)[0] is False


def test_collision_risk_raised(reference):
    ctx = reference.context()
    ctx.separation = 1e-3
    # a t^2 profile survives the initial-condition correction
    t = ctx.times[:, None, None]
    v = ctx.seed() + 100.0 * (t / ctx.times[-1]) ** 2 * (~ctx.space.boundary)[None, :, None]
    with pytest.raises(CollisionRiskError) as exc:
        theta_map(v, ctx)
    assert 0 < exc.value.time <= ctx.times[2]


def test_divergence_detected(reference, monkeypatch):
    import lagfsi.fixed_point as fpmod

    ctx = reference.context()
    calls = {"k": 0}
    real = fpmod.theta_map

    def growing(v, c, identity_reference=False):
        res = real(v, c)
        calls["k"] += 1
        res.trajectory.w = v + (2.0 ** calls["k"]) * (res.trajectory.w - v + 1e-3)
        return res

    monkeypatch.setattr(fpmod, "theta_map", growing)
    with pytest.raises(FixedPointDivergence, match="smaller T"):
        iterate_to_fixed_point(ctx, max_iterations=10)


def test_theta_matches_identity_reference_at_rest(reference):
    """With zero velocity input the flow map is the identity, so both routes agree bit for bit."""
    prob = reference
    ctx = prob.context()
    zero_data = replace(prob.data, u0=np.zeros_like(prob.data.u0), w1=np.zeros_like(prob.data.w1))
    ctx.data = zero_data
    v = np.zeros_like(ctx.seed())
    a = theta_map(v, ctx).trajectory.w
    b = theta_map(v, ctx, identity_reference=True).trajectory.w
    np.testing.assert_array_equal(a, b)


@pytest.mark.slow
def test_fixed_point_idempotent_and_preserves_ic(reference):
    ctx = reference.context()
    tol = reference.cfg.numerics.tol
    fp = iterate_to_fixed_point(ctx, tol=tol)
    again = theta_map(fp.v, ctx).trajectory.w
    assert l2h1_distance(ctx.space, ctx.times, again, fp.v, ctx.H) <= 2 * tol
    fl = ctx.space.fluid_nodes
    np.testing.assert_allclose(again[0][fl], reference.data.u0[fl], atol=1e-12)


@pytest.mark.slow
def test_second_start_admissible(reference):
    ctx = reference.context()
    v1 = second_start(ctx)
    flag, br = ctm_membership(ctx, v1, 1e12)
    assert flag and br["u0_mismatch"] <= 1e-12
    assert l2h1_distance(ctx.space, ctx.times, v1, ctx.seed(), ctx.H) > 1e-3
