"""The twelve acceptance criteria, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import filecmp
import math
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from lagfsi import verify
from lagfsi.config import load_reference, parse_config_text
from lagfsi.diagnostics import collision_margin, fluid_speed_history
from lagfsi.fem import FluidP1Space, P2Space
from lagfsi.fixed_point import iterate_to_fixed_point, l2h1_distance
from lagfsi.geometry import disk_mesh
from lagfsi.initial_data import build_initial_data, check_compatibility
from lagfsi.catalog import zero_field
from lagfsi.kinematics import coefficient_matrix, flow_map_state, piola_residual, piola_residual_analytic
from lagfsi.material import MaterialParams
from lagfsi.pipeline import T_sweep, dt_sweep, eps_sweep, loglog_slope, run_pipeline, second_start, setup_problem

RESULTS = {}


def report(number, title, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    line = f"{'PASS' if ok else 'FAIL'} | criterion {number:2d} | {title} | {detail} | {elapsed:.2f}s (limit {limit:g}s)"
    RESULTS[number] = line
    print(line)
    return ok


@pytest.fixture(autouse=True)
def _show_lines(capsys):
    yield
    out = capsys.readouterr().out
    with capsys.disabled():
        for ln in out.splitlines():
            if ln.startswith(("PASS |", "FAIL |")):
                print("\n" + ln, end="")


@pytest.fixture(scope="module")
def ref():
    return setup_problem(load_reference())


def _random_flow_map(V, rng):
    """Smooth displacement sum_k c_k sin/cos(k . x) with det grad eta >= 1/2 guaranteed."""
    x = V.coords
    disp = np.zeros_like(x)
    for _ in range(4):
        k = rng.uniform(-3, 3, 2)
        c = rng.uniform(-1, 1, 2)
        phase = rng.uniform(0, 2 * np.pi)
        disp += np.outer(np.sin(x @ k + phase), c)
    return disp


def test_01_coefficient_algebra():
    V = P2Space(disk_mesh(1.0, [(0, 0, 0.4)], 0.25))
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst, count, min_det = 0.0, 0, np.inf
    while count < 100:
        disp = _random_flow_map(V, rng)
        scale = 1.0
        st = flow_map_state(V, scale * disp)
        while not st.valid:
            scale *= 0.5
            st = flow_map_state(V, scale * disp)
        a, _ = coefficient_matrix(st.grad_eta)
        worst = max(worst, float(np.abs(np.einsum("...ij,...jk->...ik", a, st.grad_eta) - np.eye(2)).max()))
        min_det = min(min_det, st.min_det)
        count += 1
    el = time.perf_counter() - t0
    ok = report(1, "coefficient algebra", worst <= 1e-12 and min_det >= 0.5,
                f"max|a grad_eta - I| = {worst:.2e} over 100 maps (min det {min_det:.3f})", el, 1.0)
    assert ok


def test_02_piola_identity():
    t0 = time.perf_counter()
    affine, quad, analytic, hs = [], [], [], (0.3, 0.15, 0.075)
    for h in hs:
        V = P2Space(disk_mesh(1.0, [(0, 0, 0.4)], h))
        x = V.coords
        affine.append(np.abs(piola_residual(V, x @ np.array([[0.2, 0.1], [-0.1, 0.3]]).T + 0.5)).max())
        quad.append(np.abs(piola_residual(V, 0.1 * np.column_stack([x[:, 0] ** 2 - x[:, 1] ** 2,
                                                                    x[:, 0] * x[:, 1]]))).max())

        def grad_eta(p):
            F = np.zeros(p.shape + (2,))
            F[..., 0, 0] = F[..., 1, 1] = 1.0
            F[..., 0, 1] = 0.2 * np.cos(2 * p[..., 1])
            F[..., 1, 0] = -0.3 * np.sin(3 * p[..., 0])
            return F

        analytic.append(np.abs(piola_residual_analytic(V, grad_eta)).max())
    order = loglog_slope(hs, analytic)
    el = time.perf_counter() - t0
    ok = report(2, "Piola identity", max(affine) <= 1e-12 and max(quad) <= 1e-12 and order >= 1.0,
                f"affine {max(affine):.1e}, quadratic P2 {max(quad):.1e} at all levels, "
                f"analytic-Jacobian order {order:.2f}", el, 10.0)
    assert ok


def test_03_penalty_scaling(ref):
    t0 = time.perf_counter()
    rows = eps_sweep(ref, (1e-2, 1e-3, 1e-4, 1e-5))
    slope = loglog_slope([r["eps"] for r in rows], [r["div_residual"] for r in rows])
    el = time.perf_counter() - t0
    ok = report(3, "penalty scaling", abs(slope - 1.0) <= 0.15, f"log-log slope {slope:.3f} (target 1 +- 0.15)",
                el, 300.0)
    assert ok


def test_04_energy_identity(ref):
    t0 = time.perf_counter()
    dt = ref.cfg.numerics.dt
    rows = dt_sweep(ref, (dt, dt / 2))
    with tempfile.TemporaryDirectory() as tmp:
        run_pipeline(ref.cfg, tmp)
        lines = (Path(tmp) / "ledger.csv").read_text().splitlines()
    cols = lines[1].split(",")
    run_defects = [float(ln.split(",")[cols.index("defect")]) for ln in lines[3:]]  # skip step 0
    min_defect = min(min(r["min_defect"] for r in rows), min(run_defects))
    ratio = rows[0]["total_defect"] / rows[1]["total_defect"]
    el = time.perf_counter() - t0
    ok = report(4, "discrete energy identity", min_defect >= -1e-12 and abs(ratio - 2.0) <= 0.4,
                f"min per-step defect {min_defect:.2e}, defect ratio under dt halving {ratio:.3f}", el, 300.0)
    assert ok


def test_05_zero_data():
    t0 = time.perf_counter()
    prob = setup_problem(parse_config_text(verify.ZERO_CONFIG))
    ctx = prob.context()
    fp = iterate_to_fixed_point(ctx)
    tr = fp.last.trajectory
    wmax, qmax = float(np.abs(tr.w).max()), float(np.abs(tr.q_eps).max())
    el = time.perf_counter() - t0
    ok = report(5, "zero-data sanity", wmax <= 1e-12 and qmax == 0.0, f"max|w| = {wmax:.1e}, max|q_eps| = {qmax:.1e}",
                el, 10.0)
    assert ok


def test_06_elastodynamics():
    t0 = time.perf_counter()
    period_rep, energy_rep = verify.check_eigen_period()
    el = time.perf_counter() - t0
    rel = abs(period_rep.computed - period_rep.target) / period_rep.target
    ok = report(6, "elastodynamics eigenperiod", period_rep.passed,
                f"time-domain {period_rep.computed:.5f} vs eigensolve {period_rep.target:.5f} (rel {rel:.1e})", el, 60.0)
    assert ok


def test_07_mixed_poisson():
    t0 = time.perf_counter()
    r0 = verify.check_q0_manufactured_order()
    r1 = verify.check_q1_manufactured_order()
    el = time.perf_counter() - t0
    ok = report(7, "mixed Poisson order", r0.passed and r1.passed,
                f"q0 order {r0.computed:.2f}, q1 order {r1.computed:.2f} (>= 1.9)", el, 60.0)
    assert ok


def test_08_compatibility():
    t0 = time.perf_counter()
    m = disk_mesh(1.0, [(0, 0, 0.4)], 0.2)
    V, Q = P2Space(m), FluidP1Space(m)
    p = MaterialParams(1.0, 1.0, 1.0)
    zero = check_compatibility(build_initial_data(zero_field(), zero_field(), V, Q, p), V, Q, p)
    tang = verify.check_compat_tangential()
    el = time.perf_counter() - t0
    worst = max(zero.values())
    ok = report(8, "compatibility checker", worst <= 1e-10 and tang.passed,
                f"zero-data max residual {worst:.1e}; tangential {tang.computed:.6f} vs {tang.target:.6f}", el, 10.0)
    assert ok


def test_09_fixed_point(ref):
    t0 = time.perf_counter()
    num = ref.cfg.numerics
    fp = iterate_to_fixed_point(ref.context(T=0.05), tol=num.tol, max_iterations=num.max_iterations)
    ratios = fp.report.contraction_ratios
    rows = T_sweep(ref, (0.1, 0.05, 0.025))
    means = [r["mean_ratio"] for r in rows]
    el = time.perf_counter() - t0
    ok = fp.report.converged and max(ratios) < 1 and all(b <= a for a, b in zip(means, means[1:]))
    ok = report(9, "fixed-point behavior", ok,
                f"T=0.05 converged in {fp.report.iterations} its, max ratio {max(ratios):.2e}; "
                f"mean ratios over T=0.1,0.05,0.025: {', '.join(f'{x:.2e}' for x in means)}", el, 900.0)
    assert ok


def test_10_uniqueness(ref):
    t0 = time.perf_counter()
    ctx = ref.context()
    tol = ref.cfg.numerics.tol
    a = iterate_to_fixed_point(ctx, tol=tol)
    v1 = second_start(ctx)
    gap0 = l2h1_distance(ctx.space, ctx.times, v1, ctx.seed(), ctx.H)
    b = iterate_to_fixed_point(ctx, v0=v1, tol=tol)
    gap = l2h1_distance(ctx.space, ctx.times, a.v, b.v, ctx.H)
    el = time.perf_counter() - t0
    ok = report(10, "empirical uniqueness", a.report.converged and b.report.converged and gap <= 10 * tol,
                f"starts differ by {gap0:.2e}; fixed points differ by {gap:.2e} (limit {10 * tol:.0e})", el, 900.0)
    assert ok


def test_11_collision_guard():
    t0 = time.perf_counter()
    m = disk_mesh(1.0, [(0, 0, 0.4)], 0.25)
    V = P2Space(m)
    d = m.separation
    dt = 0.01
    times = np.arange(0.0, 1.0 + dt / 2, dt)
    v = np.zeros((len(times), V.n_nodes, 2))
    v[:, ~V.boundary] = [0.6, 0.8]  # unit speed
    rep = collision_margin(times, fluid_speed_history(V, v), d)
    el = time.perf_counter() - t0
    hit = rep.first_time if rep.flagged else math.inf
    ok = report(11, "collision guard", abs(hit - d / 2) <= dt + 1e-12,
                f"flag at t = {hit:.4f}, expected d/2 = {d / 2:.4f} +- {dt}", el, 1.0)
    assert ok


def test_12_determinism(ref):
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as t1, tempfile.TemporaryDirectory() as t2:
        run_pipeline(ref.cfg, t1)
        run_pipeline(ref.cfg, t2)
        names = ("ledger.csv", "fixed_point.json", "compat.csv", "snapshot_final.txt")
        same = [filecmp.cmp(Path(t1) / n, Path(t2) / n, shallow=False) for n in names]
    el = time.perf_counter() - t0
    ok = report(12, "determinism", all(same) and ref.cfg.numerics.deterministic,
                "bit-identical " + ", ".join(n for n, s in zip(names, same) if s), el, 600.0)
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
