"""Oracle-backed checks, one :class:`OracleReport` per check.

``CHECKS`` is ordered so the oracles themselves are exercised before any
solver result is compared against them.  ``REQUIRED`` lists every check
name; :func:`run_verification` reports a failure for any that is missing.
"""

from __future__ import annotations

import math

import numpy as np
import sympy as sp

from .catalog import FORCING_CATALOG, AnalyticField, T, X, Y, lookup, zero_field
from .config import load_reference
from .diagnostics import (
    EnergyLedger,
    collision_margin,
    divergence_residual,
    ledger_from_trajectory,
    update_energy_ledger,
)
from .fem import FluidP1Space, P2Space
from .fixed_point import heat_smoother, iterate_to_fixed_point, l2h1_distance, theta_map
from .geometry import FLUID, SOLID, LocalChart, box_mesh, disk_mesh, mesh_from_triangles
from .initial_data import (
    assemble_mixed_poisson,
    build_initial_data,
    check_compatibility,
    compute_w1,
    compute_w2,
    InitialData,
    solve_mixed_poisson,
    solve_q0,
    solve_q1,
)
from .kinematics import advance_flow_map, coefficient_matrix, coefficient_time_derivatives, flow_map_state, piola_residual
from .material import MaterialParams, elastic_stress, elasticity_tensor
from .oracles import OracleReport, compare, dense_oracle_solve, eigenmode_oracle, symbolic_element_oracle
from .pipeline import dt_sweep, eps_sweep, loglog_slope, n_sweep, setup_problem, T_sweep
from .stepper import (
    PenaltySettings,
    StaticOperators,
    assemble_operators,
    compose_forcing,
    elastic_matrix,
    identity_coefficients,
    solve_linear_problem,
    viscous_matrix,
)

P_REF = MaterialParams(1.0, 1.0, 1.0)


def _spaces(h, solids=((0.0, 0.0, 0.4),), **kw):
    m = disk_mesh(1.0, solids, h, **kw)
    return m, P2Space(m), FluidP1Space(m)


def _single(tri, tag):
    m = mesh_from_triangles(np.asarray(tri, float), np.array([[0, 1, 2]]), np.array([tag]))
    V = P2Space(m)
    perm = V.dofmap[0]
    return V, perm, (2 * perm[:, None] + np.arange(2)).ravel()


def _l2_fluid(V, Q, q, exact):
    qv, _ = Q.eval_qp(V, q)
    x = V.qpoints[V.fluid_elements]
    return math.sqrt(float(np.sum(V.qweights[V.fluid_elements] * (qv - exact(x)) ** 2)))


# -- oracles first ----------------------------------------------------------------


def check_oracle_p1_mass():
    tri = [[0, 0], [1, 0], [0, 1]]
    target = (0.5 / 12) * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]])
    return compare("oracle.p1_mass_reference_triangle", "closed-form simplex integration",
                   symbolic_element_oracle(tri, "mass", degree=1), target, 1e-15)


def check_oracle_dense_spd():
    rng = np.random.default_rng(7)
    B = rng.standard_normal((10, 10))
    A = B @ B.T + 10 * np.eye(10)
    b = rng.standard_normal(10)
    x = dense_oracle_solve(A, b)
    return compare("oracle.dense_spd_residual", "residual of dense LU", float(np.linalg.norm(A @ x - b)), 0.0, 1e-12, "le")


def check_oracle_eigen_1dof():
    lam, _, period = eigenmode_oracle(np.array([[4.0]]), np.array([[1.0]]))
    return compare("oracle.eigen_1dof_frequency", "dense generalized eigensolve", math.sqrt(lam), 2.0, 1e-12)


# -- geometry / kinematics / material -------------------------------------------


def check_chart_sine():
    chart = LocalChart(lambda s: 0.1 * np.sin(s), lambda s: 0.1 * np.cos(s), origin=(0.0, 0.0),
                       normal=(0.0, 1.0), radius=1.0)
    y = np.random.default_rng(3).uniform(-0.9, 0.9, size=(100, 2))
    det = np.linalg.det(chart.jacobian(y))
    return compare("geometry.chart_sine_det", "analytic Jacobian of shear map", det, np.ones(100), 1e-12)


def check_midpoint_displacement():
    m = box_mesh(1.0, 1.0, 2, 2)
    V = P2Space(m)
    st = flow_map_state(V)
    for t0 in (0.0, 0.1):
        v0 = np.tile([t0, 0.0], (V.n_nodes, 1))
        v1 = np.tile([t0 + 0.1, 0.0], (V.n_nodes, 1))
        st = advance_flow_map(st, v0, 0.1, v_end=v1)
    return compare("kinematics.midpoint_linear_velocity", "analytic integral 0.02",
                   st.displacement[:, 0], np.full(V.n_nodes, 0.02), 1e-15)


def check_shear_inverse():
    a, det = coefficient_matrix(np.array([[1.0, 0.3], [0.0, 1.0]]))
    return compare("kinematics.shear_inverse", "direct 2x2 inversion",
                   np.append(a.ravel(), det), [1.0, -0.3, 0.0, 1.0, 1.0], 1e-15)


def check_a_t_finite_difference():
    rng = np.random.default_rng(11)
    G0, G1, G2 = 0.2 * rng.standard_normal((3, 2, 2))

    def F(t):
        return np.eye(2) + t * G0 + t**2 * G1 + t**3 * G2

    def dF(t):
        return G0 + 2 * t * G1 + 3 * t**2 * G2

    t0 = 0.3
    a, _ = coefficient_matrix(F(t0))
    # grad v = dF a^{-1}... in Lagrangian variables grad_x v = dF/dt, so a_t = -a dF a
    a_t, _ = coefficient_time_derivatives(a, dF(t0), np.zeros((2, 2)))
    errs = []
    for h in (1e-2, 5e-3):
        fd = (coefficient_matrix(F(t0 + h))[0] - coefficient_matrix(F(t0 - h))[0]) / (2 * h)
        errs.append(np.abs(fd - a_t).max())
    order = math.log2(errs[0] / errs[1])
    return compare("kinematics.a_t_centered_difference_order", "centered finite difference", order, 2.0, 0.1)


def check_piola_refinement():
    res = []
    for h in (0.4, 0.2, 0.1):
        m, V, _ = _spaces(h)
        x = V.coords
        quad = 0.05 * np.column_stack([x[:, 0] ** 2 - x[:, 1] ** 2, x[:, 0] * x[:, 1]])
        res.append(np.abs(piola_residual(V, quad)).max())
    return compare("kinematics.piola_quadratic_refinement", "exact discrete Piola identity",
                   max(res), 0.0, 1e-12, "le")


def check_elasticity_tensor_loop():
    p = MaterialParams(1.0, 1.0, 2.0)
    c = elasticity_tensor(p, 2)
    d = np.eye(2)
    loop = np.zeros((2, 2, 2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    loop[i, j, k, l] = p.lam * d[i, j] * d[k, l] + p.mu * (d[i, k] * d[j, l] + d[i, l] * d[j, k])
    return compare("material.tensor_index_loop", "brute-force index loop", c, loop, 0.0)


def check_elastic_stress_loop():
    p = MaterialParams(1.0, 1.0, 2.0)
    g = np.array([[1.0, 0.0], [0.0, 0.0]])
    c = elasticity_tensor(p, 2)
    loop = np.einsum("ijkl,kl->ij", c, g)
    ok = compare("material.stress_contraction", "index-loop contraction", elastic_stress(g, p), loop, 1e-15)
    return [ok, compare("material.stress_value", "hand value [[5,0],[0,1]]", elastic_stress(g, p),
                        [[5.0, 0.0], [0.0, 1.0]], 1e-15)]


# -- initial data ---------------------------------------------------------------


def check_q0_manufactured_order():
    errs, hs = [], (0.2, 0.1, 0.05)
    for h in hs:
        m, V, Q = _spaces(h)
        q = solve_mixed_poisson(V, Q, neumann=lambda p, n: p[..., 1] * n[..., 0] + p[..., 0] * n[..., 1],
                                dirichlet=lambda p: p[:, 0] * p[:, 1])
        errs.append(_l2_fluid(V, Q, q, lambda x: x[..., 0] * x[..., 1]))
    return compare("initial_data.q0_manufactured_order", "manufactured q*=xy", loglog_slope(hs, errs), 1.9, 0.0, "ge")


def check_q0_dense_cross():
    m, V, Q = _spaces(0.25)
    f = AnalyticField((1 + X * Y, sp.sin(X)), "test")
    u0 = AnalyticField((-(1 - X**2 - Y**2) ** 2 * Y, (1 - X**2 - Y**2) ** 2 * X), "swirl")
    q_iter = solve_q0(u0, f, V, Q, P_REF)
    # rebuild the same system and solve it densely
    from .initial_data import _fluid_qp  # noqa: PLC0415

    x = _fluid_qp(V)
    G = u0.grad(x)
    from .geometry import vertex_interface_normals  # noqa: PLC0415

    vn = vertex_interface_normals(m)
    iv = Q.vertices[Q.interface_dofs]
    N = np.array([vn[int(v)] for v in iv])
    sys = assemble_mixed_poisson(V, Q, flux=f.value(x, 0.0), source=-np.einsum("...ij,...ji->...", G, G),
                                 neumann=lambda p, n: np.einsum("...i,...i->...", u0.laplacian(p), n),
                                 dirichlet=np.einsum("pi,pik,pk->p", N, u0.grad(m.nodes[iv]), N))
    q_dense = sys.expand(dense_oracle_solve(sys.matrix, sys.rhs))
    return compare("initial_data.q0_dense_cross_check", "dense LU of assembled system", q_iter, q_dense, 1e-10)


def check_w1_constant_force():
    m, V, Q = _spaces(0.25)
    f = AnalyticField((1, 0), "e1")
    q0 = solve_q0(zero_field(), f, V, Q, P_REF)
    sys = assemble_mixed_poisson(V, Q, flux=f.value(V.qpoints[V.fluid_elements]))
    q_dense = sys.expand(dense_oracle_solve(sys.matrix, sys.rhs))
    w1 = compute_w1(zero_field(), q0, f, V, Q, P_REF)
    # oracle: project f - grad(q_dense) by a dense solve of the mass system
    vals = f.value(V.qpoints).copy()
    _, gq = Q.eval_qp(V, q_dense)
    vals[V.fluid_elements] -= gq
    Ms = V.scalar_mass
    rhs = np.stack([np.bincount(V.dofmap.ravel(), weights=np.einsum("mq,qa,mq->ma", V.qweights, V.phi, vals[..., c]).ravel(),
                                minlength=V.n_nodes) for c in range(2)], axis=1)
    w_dense = np.column_stack([dense_oracle_solve(Ms, rhs[:, c]) for c in range(2)])
    return compare("initial_data.w1_constant_force_dense", "dense solves of q0 and projection", w1, w_dense, 1e-9)


def check_w1_symbolic():
    # all-fluid disk, linear pressure: the projected field is a quadratic, reproduced exactly
    m, V, Q = _spaces(0.2, solids=())
    u0 = AnalyticField((X**2 * Y, -X * Y**2), "poly")
    f = AnalyticField((X, Y**2), "polyf")
    q0 = Q.interpolate(lambda p: 2 * p[..., 0] - p[..., 1])
    w1 = compute_w1(u0, q0, f, V, Q, P_REF)
    exact = V.interpolate(lambda p: np.stack([p[..., 0] + 2 * p[..., 1] - 2, p[..., 1] ** 2 - 2 * p[..., 0] + 1], -1))
    return compare("initial_data.w1_symbolic", "sympy Laplacian of polynomial data", w1, exact, 1e-10)


def check_q1_dense():
    m, V, Q = _spaces(0.25)
    f = AnalyticField((0, T), "ft")
    q1 = solve_q1(zero_field(), np.zeros((V.n_nodes, 2)), np.zeros(Q.n), f, V, Q, P_REF)
    x = V.qpoints[V.fluid_elements]
    sys = assemble_mixed_poisson(V, Q, flux=np.broadcast_to([0.0, 1.0], x.shape))
    q_dense = sys.expand(dense_oracle_solve(sys.matrix, sys.rhs))
    return compare("initial_data.q1_dense", "dense LU of the reduced problem", q1, q_dense, 1e-10)


def check_q1_manufactured_order():
    errs, hs = [], (0.2, 0.1, 0.05)
    qx = lambda x: (x[..., 0] ** 2 + x[..., 1] ** 2 - 0.16) * x[..., 0]  # noqa: E731
    for h in hs:
        m, V, Q = _spaces(h)
        d = build_initial_data(zero_field(), lookup(FORCING_CATALOG, "ramp_gradient"), V, Q, P_REF)
        errs.append(_l2_fluid(V, Q, d.q1, qx))
    return compare("initial_data.q1_manufactured_order", "manufactured q1*", loglog_slope(hs, errs), 1.9, 0.0, "ge")


def check_w2_symbolic():
    # all-solid disk: the solid row is a quadratic, reproduced exactly by the projection
    m, V, Q = _spaces(0.2, solids=(), tag_all=SOLID)
    u0 = AnalyticField((X**2 + X * Y, Y**3), "poly")
    f = AnalyticField((T * X * Y, T * (1 + X)), "polyf")
    zero_w = np.zeros((V.n_nodes, 2))
    w2 = compute_w2(u0, zero_w, np.zeros(Q.n), np.zeros(Q.n), f, V, Q, P_REF)
    # f_t + lam grad div u0 + mu (lap u0 + grad div u0), derived by hand
    exact = V.interpolate(lambda p: np.stack([p[..., 0] * p[..., 1] + 6 + 0 * p[..., 0],
                                              1 + p[..., 0] + 2 * (1 + 6 * p[..., 1]) + 6 * p[..., 1]], -1))
    return compare("initial_data.w2_symbolic_solid", "hand derivatives of polynomial data", w2, exact, 1e-10)


def check_compat_tangential():
    m = box_mesh(1.0, 1.0, 8, 8, solid_box=(0.25, 0.75, 0.25, 0.75))
    V, Q = P2Space(m), FluidP1Space(m)
    u0 = AnalyticField((Y**2, 0), "shear")
    data = InitialData(u0, zero_field(), V.interpolate(u0.value), np.zeros(Q.n), np.zeros((V.n_nodes, 2)),
                       np.zeros(Q.n), np.zeros((V.n_nodes, 2)))
    r = check_compatibility(data, V, Q, P_REF)["tangential_strain"]
    # only horizontal sides contribute: |[grad u0 N]_tan| = 2|y| along y = 0.25 and y = 0.75
    exact = math.sqrt(0.5 * (2 * 0.25) ** 2 + 0.5 * (2 * 0.75) ** 2)
    return compare("initial_data.compat_tangential_flat", "closed-form tangential projection", r, exact, 1e-12)


# -- stepper ---------------------------------------------------------------------------


def check_viscous_element():
    tri = [[0.0, 0.0], [0.8, 0.0], [0.0, 0.5]]
    V, _, vd = _single(tri, FLUID)
    A = viscous_matrix(V, identity_coefficients(V), 1.0).toarray()[np.ix_(vd, vd)]
    return compare("stepper.viscous_right_triangle", "symbolic element integration",
                   A, symbolic_element_oracle(tri, "viscous-identity-a"), 1e-13)


def check_elastic_element():
    tri = [[0.1, 0.2], [1.3, 0.4], [0.5, 1.7]]
    V, _, vd = _single(tri, SOLID)
    p = MaterialParams(1.0, 1.3, 2.1)
    K = elastic_matrix(V, p).toarray()[np.ix_(vd, vd)]
    return compare("stepper.elastic_element", "symbolic element integration",
                   K, symbolic_element_oracle(tri, "elastic", lam=1.3, mu=2.1), 1e-12)


def check_penalty_composition():
    tri = [[0.1, 0.2], [1.3, 0.4], [0.5, 1.7]]
    V, _, vd = _single(tri, FLUID)
    ops = assemble_operators(V, identity_coefficients(V), P_REF, 0.01)
    P = ops.P.toarray()[np.ix_(vd, vd)]
    ref = symbolic_element_oracle(tri, "penalty-identity-a", eps=0.01)
    return compare("stepper.penalty_composition", "symbolic (1/eps) div-div form",
                   np.abs(P - ref).max() / np.abs(ref).max(), 0.0, 1e-13, "le")


def check_be_scalar():
    m_, a_, g_, w0, dt = 2.0, 3.0, 1.5, 0.7, 0.1
    closed = (m_ * w0 + dt * g_) / (m_ + dt * a_)
    from scipy.sparse import csr_matrix  # noqa: PLC0415

    lhs = csr_matrix([[m_ / dt + a_]])
    w1 = float(dense_oracle_solve(lhs, [m_ * w0 / dt + g_])[0])
    return compare("stepper.backward_euler_scalar", "hand algebra", w1, closed, 1e-15)


def check_midpoint_energy_2x2():
    k, mm, dt = 4.0, 1.0, 0.05
    w, d = 1.0, 0.0
    E0 = 0.5 * mm * w**2 + 0.5 * k * d**2
    drift = 0.0
    for _ in range(200):
        A = np.array([[mm / dt, 0.5 * k], [-0.5, 1.0 / dt]])
        b = np.array([mm * w / dt - 0.5 * k * d, d / dt + 0.5 * w])
        w, d = np.linalg.solve(A, b)
        drift = max(drift, abs(0.5 * mm * w**2 + 0.5 * k * d**2 - E0))
    return compare("stepper.midpoint_energy_2x2", "quadratic invariant of implicit midpoint", drift, 0.0, 1e-10, "le")


def check_compose_forcing():
    m, V, _ = _spaces(0.2)
    f = AnalyticField((sp.sin(X), 0), "sinx")
    rng = np.random.default_rng(5)
    c = rng.uniform(-0.05, 0.05, 4)
    x = V.coords
    disp = np.column_stack([c[0] * np.sin(x[:, 1]) + c[1] * x[:, 0] ** 2, c[2] * np.cos(x[:, 0]) + c[3] * x[:, 1]])
    F = compose_forcing(f, V, disp, 0.0)
    fe = V.fluid_elements
    dq, _, _ = V.eval_qp(disp, fe)
    pts = V.qpoints[fe] + dq
    direct = np.sin(pts[..., 0])
    sel = (slice(None), slice(None))
    return compare("stepper.compose_forcing_pointwise", "direct evaluation at eta(x_q)",
                   F[fe][sel + (0,)].ravel()[:1000], direct.ravel()[:1000], 1e-14)


# -- diagnostics ---------------------------------------------------------------------


def check_div_residual_area():
    m, V, _ = _spaces(0.2)
    w = V.interpolate(lambda p: p)
    return compare("diagnostics.div_residual_radial", "2 sqrt(|fluid|)", divergence_residual(V, w),
                   2 * math.sqrt(m.fluid_area()), 1e-12)


def check_collision_trapezoid():
    times = np.array([0.0, 0.1, 0.2, 0.3, 0.4])
    speeds = np.array([1.0, 1.0, 2.0, 2.0, 0.5])
    rep = collision_margin(times, speeds, 1.0)
    hand = 0.5 - np.array([0.0, 0.1, 0.25, 0.45, 0.575])
    return compare("diagnostics.collision_trapezoid", "hand trapezoid sums", rep.margin, hand, 1e-15)


def check_ledger_1dof():
    """Damped oscillator m w' + c w + k d = g under backward Euler, bookkept by hand."""
    from .stepper import StepRecord  # noqa: PLC0415

    m_, c_, k_, g_, dt = 1.0, 0.3, 4.0, 0.5, 0.01
    w, d = 0.2, 0.0
    led = EnergyLedger().start(0.0, 0.5 * m_ * w**2)
    hand_defect = []
    for n in range(100):
        w1 = (m_ * w / dt + g_ - k_ * d) / (m_ / dt + c_ + dt * k_)
        d1 = d + dt * w1
        rec = StepRecord((n + 1) * dt, 0.5 * m_ * w1**2, 0.5 * k_ * d1**2, dt * c_ * w1**2, 0.0, 0.0,
                         dt * g_ * w1, 0.0, 1.0)
        update_energy_ledger(led, rec)
        hand_defect.append(0.5 * m_ * (w1 - w) ** 2 + 0.5 * k_ * (d1 - d) ** 2)
        w, d = w1, d1
    return compare("diagnostics.ledger_1dof", "closed-form numerical dissipation of backward Euler",
                   led.column("defect")[1:], hand_defect, 1e-12)


def check_dt_halving():
    prob = setup_problem(load_reference())
    rows = dt_sweep(prob, (0.01, 0.005))
    ratio = rows[0]["total_defect"] / rows[1]["total_defect"]
    return compare("diagnostics.defect_dt_halving", "two runs with dt and dt/2", ratio, 2.0, 0.2 * 2.0)


# -- fixed point / reference problem -------------------------------------------------


def check_checkerboard_smoothing():
    m, V, _ = _spaces(0.15)
    rng = np.random.default_rng(2)
    v = np.where(V.boundary[:, None], 0.0, rng.choice([-1.0, 1.0], size=(V.n_nodes, 2)))
    sm = heat_smoother(V, 8)(v)
    S = V.scalar_stiffness
    before = sum(float(v[:, c] @ (S @ v[:, c])) for c in range(2))
    after = sum(float(sm[:, c] @ (S @ sm[:, c])) for c in range(2))
    return compare("fixed_point.checkerboard_h1_decrease", "direct seminorm before/after", after, before, 0.0, "le")


def check_eps_slope():
    prob = setup_problem(load_reference())
    rows = eps_sweep(prob)
    slope = loglog_slope([r["eps"] for r in rows], [r["div_residual"] for r in rows])
    return compare("stepper.eps_sweep_slope", "eps sweep on the reference problem", slope, 1.0, 0.15)


def check_n_sweep():
    prob = setup_problem(load_reference())
    rows = n_sweep(prob)
    d = [r["distance"] for r in rows]
    mono = float(all(b < a for a, b in zip(d, d[1:])))
    return compare("fixed_point.n_sweep_monotone", "n in {4, 8, 16}", mono, 1.0, 0.0)


def check_small_T_convergence():
    prob = setup_problem(load_reference())
    fp = iterate_to_fixed_point(prob.context(), tol=prob.cfg.numerics.tol)
    ok = float(fp.report.converged and all(r < 1 for r in fp.report.contraction_ratios))
    return compare("fixed_point.reference_converges", "Picard run on the reference problem", ok, 1.0, 0.0)


def check_T_sweep():
    prob = setup_problem(load_reference())
    rows = T_sweep(prob)
    means = [r["mean_ratio"] for r in rows]
    mono = float(all(b <= a for a, b in zip(means, means[1:])))
    return compare("fixed_point.T_sweep_mean_ratio", "T in {0.1, 0.05, 0.025}", mono, 1.0, 0.0)


def check_eigen_period():
    m, V, Q = _spaces(0.35, solids=(), tag_all=SOLID)
    p = MaterialParams(1.0, 1.0, 1.0)
    st = StaticOperators(V, p)
    lam, mode, period = eigenmode_oracle(st.K, st.M, st.free)
    measured, ledger = measure_period(V, Q, p, st, mode, period)
    return [compare("oracle.eigen_period_time_domain", "dense generalized eigensolve", measured, period, 0.01, "rel"),
            compare("stepper.midpoint_energy_solver", "quadratic invariant of implicit midpoint",
                    float(np.abs(ledger.column("defect")).max()), 0.0, 1e-10, "le")]


def check_eigen_scaling():
    m, V, _ = _spaces(0.5, solids=(), tag_all=SOLID)
    lam1 = eigenmode_oracle(*_clamped(V, MaterialParams(1.0, 1.0, 1.0)))[0]
    lam2 = eigenmode_oracle(*_clamped(V, MaterialParams(1.0, 2.0, 2.0)))[0]
    return compare("oracle.eigen_lame_doubling", "linearity of K in the Lame parameters", lam2 / lam1, 2.0, 1e-10)


def _clamped(V, p):
    st = StaticOperators(V, p)
    return st.K, st.M, st.free


def measure_period(V, Q, params, static, mode, period, steps_per_period=100, periods=2.2):
    dt = period / steps_per_period
    times = np.arange(0.0, periods * period, dt)
    tr = solve_linear_problem(V, Q, params, zero_field(), mode.reshape(-1, 2), np.zeros(Q.n), np.zeros(Q.n),
                              times, PenaltySettings(1.0), integrator="midpoint", static=static)
    c = np.array([mode @ (static.M @ w.ravel()) for w in tr.w])
    s = np.flatnonzero(np.sign(c[1:]) != np.sign(c[:-1]))
    tc = times[s] - c[s] * (times[s + 1] - times[s]) / (c[s + 1] - c[s])
    return 2.0 * float(np.mean(np.diff(tc))), ledger_from_trajectory(V, tr)


# -- whole-problem checks --------------------------------------------------------


def check_zero_data():
    from .config import parse_config_text  # noqa: PLC0415

    cfg = parse_config_text(ZERO_CONFIG)
    prob = setup_problem(cfg)
    ctx = prob.context()
    traj = theta_map(ctx.seed(), ctx).trajectory
    return [compare("acceptance.zero_data_velocity", "f = 0, u0 = 0", float(np.abs(traj.w).max()), 0.0, 1e-12, "le"),
            compare("acceptance.zero_data_pressure", "f = 0, u0 = 0", float(np.abs(traj.q_eps).max()), 0.0, 0.0, "le")]


def check_reference_run():
    import tempfile  # noqa: PLC0415

    from .pipeline import run_pipeline  # noqa: PLC0415

    with tempfile.TemporaryDirectory() as tmp:
        res = run_pipeline(load_reference(), tmp)
    fp = res.report.get("fixed_point", {})
    ratios = fp.get("contraction_ratios", [])
    ok = float(res.status == 0 and bool(ratios) and max(ratios) < 1)
    return [compare("pipeline.reference_run_converges", "shipped reference run", ok, 1.0, 0.0),
            compare("fixed_point.reference_within_M", "W_T norm of the converged fixed point",
                    res.report.get("w_norm_sq", np.inf), fp.get("M") or 0.0, 0.0, "le")]


def check_uniqueness():
    from .pipeline import second_start  # noqa: PLC0415

    prob = setup_problem(load_reference())
    ctx = prob.context()
    tol = prob.cfg.numerics.tol
    a = iterate_to_fixed_point(ctx, tol=tol)
    v1 = second_start(ctx)
    start_gap = l2h1_distance(ctx.space, ctx.times, v1, ctx.seed(), ctx.H)
    b = iterate_to_fixed_point(ctx, v0=v1, tol=tol)
    gap = l2h1_distance(ctx.space, ctx.times, a.v, b.v, ctx.H)
    return [compare("acceptance.uniqueness_distinct_starts", "starts differ", start_gap, 1e-3, 0.0, "ge"),
            compare("acceptance.uniqueness_fixed_points", "two Picard runs", gap, 10 * tol, 0.0, "le")]


def check_collision_constant_speed():
    d, speed, dt = 0.6, 1.0, 0.01
    times = np.arange(0.0, 1.0 + dt / 2, dt)
    rep = collision_margin(times, np.full(len(times), speed), d)
    return compare("acceptance.collision_trip_time", "d / (2 |v|)", rep.first_time if rep.flagged else np.inf,
                   d / (2 * speed), dt + 1e-12)


ZERO_CONFIG = """
geometry.container_radius = 1.0
geometry.solids = 0 0 0.4
geometry.h = 0.25
numerics.dt = 0.01
numerics.T = 0.05
forcing.name = zero
initial.name = zero
"""


CHECKS = (
    check_oracle_p1_mass,
    check_oracle_dense_spd,
    check_oracle_eigen_1dof,
    check_chart_sine,
    check_midpoint_displacement,
    check_shear_inverse,
    check_a_t_finite_difference,
    check_piola_refinement,
    check_elasticity_tensor_loop,
    check_elastic_stress_loop,
    check_viscous_element,
    check_elastic_element,
    check_penalty_composition,
    check_be_scalar,
    check_midpoint_energy_2x2,
    check_compose_forcing,
    check_q0_manufactured_order,
    check_q0_dense_cross,
    check_w1_constant_force,
    check_w1_symbolic,
    check_q1_dense,
    check_q1_manufactured_order,
    check_w2_symbolic,
    check_compat_tangential,
    check_div_residual_area,
    check_collision_trapezoid,
    check_ledger_1dof,
    check_checkerboard_smoothing,
    check_eigen_scaling,
    check_eigen_period,
    check_collision_constant_speed,
    check_zero_data,
    check_dt_halving,
    check_eps_slope,
    check_n_sweep,
    check_small_T_convergence,
    check_T_sweep,
    check_reference_run,
    check_uniqueness,
)

REQUIRED = (
    "oracle.p1_mass_reference_triangle",
    "oracle.dense_spd_residual",
    "oracle.eigen_1dof_frequency",
    "geometry.chart_sine_det",
    "kinematics.midpoint_linear_velocity",
    "kinematics.shear_inverse",
    "kinematics.a_t_centered_difference_order",
    "kinematics.piola_quadratic_refinement",
    "material.tensor_index_loop",
    "material.stress_contraction",
    "material.stress_value",
    "stepper.viscous_right_triangle",
    "stepper.elastic_element",
    "stepper.penalty_composition",
    "stepper.backward_euler_scalar",
    "stepper.midpoint_energy_2x2",
    "stepper.compose_forcing_pointwise",
    "initial_data.q0_manufactured_order",
    "initial_data.q0_dense_cross_check",
    "initial_data.w1_constant_force_dense",
    "initial_data.w1_symbolic",
    "initial_data.q1_dense",
    "initial_data.q1_manufactured_order",
    "initial_data.w2_symbolic_solid",
    "initial_data.compat_tangential_flat",
    "diagnostics.div_residual_radial",
    "diagnostics.collision_trapezoid",
    "diagnostics.ledger_1dof",
    "fixed_point.checkerboard_h1_decrease",
    "oracle.eigen_lame_doubling",
    "oracle.eigen_period_time_domain",
    "stepper.midpoint_energy_solver",
    "acceptance.collision_trip_time",
    "acceptance.zero_data_velocity",
    "acceptance.zero_data_pressure",
    "diagnostics.defect_dt_halving",
    "stepper.eps_sweep_slope",
    "fixed_point.n_sweep_monotone",
    "fixed_point.reference_converges",
    "fixed_point.T_sweep_mean_ratio",
    "pipeline.reference_run_converges",
    "fixed_point.reference_within_M",
    "acceptance.uniqueness_distinct_starts",
    "acceptance.uniqueness_fixed_points",
)


def run_verification(checks=CHECKS, required=REQUIRED):
    """Run all checks in order; returns the list of reports (missing ones as failures)."""
    reports = []
    for chk in checks:
        try:
            out = chk()
        except Exception as exc:  # a crashing check is a failed check
            out = OracleReport(chk.__name__, "exception", repr(exc), None, 0.0, False)
        reports.extend(out if isinstance(out, list) else [out])
    seen = {r.name for r in reports}
    for name in required:
        if name not in seen:
            reports.append(OracleReport(name, "missing", None, None, 0.0, False))
    return reports
