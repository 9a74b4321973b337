"""End-to-end runs: configuration -> mesh -> initial data -> fixed point -> files."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .catalog import FORCING_CATALOG, INITIAL_CATALOG, lookup
from .config import SimulationConfig
from .diagnostics import (
    a_tt_l3,
    collision_margin,
    fluid_speed_history,
    ledger_from_trajectory,
    n_data_sq,
)
from .fem import FluidP1Space, P2Space
from .fixed_point import (
    CollisionRiskError,
    FixedPointDivergence,
    ProblemContext,
    ctm_membership,
    default_M,
    iterate_to_fixed_point,
    l2h1_distance,
    mollify_velocity,
    theta_map,
)
from .geometry import GeometryError, build_reference_config, write_snapshot
from .initial_data import build_initial_data
from .kinematics import InvertibilityError
from .material import MaterialParams
from .stepper import PenaltySettings, solve_linear_problem

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_COLLISION = 4


class PipelineError(RuntimeError):
    def __init__(self, module, message, status=EXIT_SOLVER):
        super().__init__(f"[{module}] {message}")
        self.module = module
        self.status = status


def time_grid(T: float, dt: float) -> np.ndarray:
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    return np.linspace(0.0, T, n + 1)


@dataclass
class Problem:
    cfg: SimulationConfig
    mesh: object
    space: P2Space
    Q: FluidP1Space
    params: MaterialParams
    u0: object
    forcing: object
    data: object
    n_sq: float
    compat_tol: float

    def context(self, T=None, dt=None, eps=None, n="config", integrator=None) -> ProblemContext:
        num = self.cfg.numerics
        times = time_grid(num.T if T is None else T, num.dt if dt is None else dt)
        settings = PenaltySettings(num.eps if eps is None else eps, num.n if n == "config" else n)
        return ProblemContext(self.space, self.Q, self.params, self.forcing, self.data, times, settings,
                              self.mesh.separation, integrator or num.integrator, num.constitutive)

    def compat_ok(self):
        return all(v <= self.compat_tol for v in self.data.compat_residuals.values())


def setup_problem(cfg: SimulationConfig) -> Problem:
    try:
        mesh = build_reference_config(cfg)
    except GeometryError as exc:
        raise PipelineError("geometry", str(exc), EXIT_CONFIG) from exc
    space = P2Space(mesh)
    Q = FluidP1Space(mesh)
    m = cfg.material
    params = MaterialParams(m.nu, m.lam, m.mu)
    u0 = lookup(INITIAL_CATALOG, cfg.initial.name, cfg.initial.amplitude)
    forcing = lookup(FORCING_CATALOG, cfg.forcing.name, cfg.forcing.amplitude)
    try:
        data = build_initial_data(u0, forcing, space, Q, params)
    except RuntimeError as exc:
        raise PipelineError("initial_data", str(exc)) from exc
    n_sq = n_data_sq(u0, forcing, space, cfg.numerics.T)
    tol = cfg.numerics.compat_tol_factor * math.sqrt(n_sq)
    return Problem(cfg, mesh, space, Q, params, u0, forcing, data, n_sq, tol)


# -- output helpers ---------------------------------------------------------------


def write_compat_csv(path, residuals: dict, tol: float, config_hash: str | None = None):
    with open(path, "w") as fh:
        fh.write(compat_table(residuals, tol, config_hash))


def compat_table(residuals: dict, tol: float, config_hash: str | None = None) -> str:
    lines = []
    if config_hash:
        lines.append(f"# config_hash={config_hash}")
    lines.append("residual,value,tolerance,ok")
    for k, v in residuals.items():
        lines.append(f"{k},{float(v)!r},{float(tol)!r},{int(v <= tol)}")
    return "\n".join(lines) + "\n"


def write_iterate(path, times, w, n_vertices, config_hash):
    with open(path, "w") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        fh.write("t,node,wx,wy\n")
        for t, wt in zip(times, w):
            for k in range(n_vertices):
                fh.write(f"{float(t)!r},{k},{float(wt[k, 0])!r},{float(wt[k, 1])!r}\n")


@dataclass
class RunResult:
    status: int
    messages: list = field(default_factory=list)
    report: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)


def run_pipeline(cfg: SimulationConfig, out_dir=None, emit_iterates=None) -> RunResult:
    """Full run with outputs written to ``out_dir`` (default ``cfg.output.dir``).

    Exit status 0 means the Picard iteration converged, the compatibility
    residuals are within tolerance, and the invertibility and collision
    guards held throughout.
    """
    out = Path(out_dir or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.hash
    res = RunResult(EXIT_OK)
    try:
        prob = setup_problem(cfg)
    except PipelineError as exc:
        res.status = exc.status
        res.messages.append(str(exc))
        _write_report(out / "fixed_point.json", chash, res)
        return res

    files = res.files
    files["compat"] = out / "compat.csv"
    write_compat_csv(files["compat"], prob.data.compat_residuals, prob.compat_tol, chash)
    if not prob.compat_ok():
        res.messages.append("[initial_data] compatibility residuals exceed tolerance")

    num = cfg.numerics
    T, dt = num.T, num.dt
    fp = None
    for attempt in range(num.max_halvings + 1):
        ctx = prob.context(T=T, dt=dt)
        try:
            M = num.M if num.M is not None else default_M(ctx)
            fp = iterate_to_fixed_point(ctx, tol=num.tol, max_iterations=num.max_iterations, M=M,
                                        keep_iterates=bool(emit_iterates or cfg.output.iterates))
            break
        except (InvertibilityError, FixedPointDivergence) as exc:
            res.messages.append(f"[fixed_point] {exc}; halving T to {T / 2:.6g}")
            T /= 2.0
            dt = min(dt, T / 2.0)
        except CollisionRiskError as exc:
            res.status = EXIT_COLLISION
            res.messages.append(f"[diagnostics] {exc}")
            _write_report(out / "fixed_point.json", chash, res)
            return res
    if fp is None:
        res.status = EXIT_SOLVER
        res.messages.append("[fixed_point] no admissible horizon found")
        _write_report(out / "fixed_point.json", chash, res)
        return res

    last = fp.last
    traj = last.trajectory
    ledger = ledger_from_trajectory(prob.space, traj, num.deterministic)
    files["ledger"] = out / "ledger.csv"
    ledger.to_csv(files["ledger"], chash)

    member_ok, breakdown = ctm_membership(ctx, fp.v, fp.report.M)
    margin = collision_margin(ctx.times, fluid_speed_history(prob.space, last.smoothed_input), prob.mesh.separation)
    min_det = min((st.min_det for st in last.states), default=1.0)
    guards = dict(
        compatibility=prob.compat_ok(),
        invertibility=min_det >= 0.5,
        collision=not margin.flagged,
        converged=fp.report.converged,
    )
    res.report = dict(
        fixed_point=fp.report.to_dict(),
        guards=guards,
        T_used=float(ctx.times[-1]),
        dt_used=float(ctx.times[1] - ctx.times[0]),
        n_data_sq=prob.n_sq,
        compat_tolerance=prob.compat_tol,
        compat_residuals={k: float(v) for k, v in prob.data.compat_residuals.items()},
        w_norm_sq=breakdown["w_norm_sq"],
        x_norm_sq=breakdown["x_norm_sq"],
        norm_summands={k: float(v) for k, v in breakdown["summands"].items()},
        surrogates=breakdown["surrogates"],
        fixed_point_within_M=bool(breakdown["w_norm_sq"] <= fp.report.M),
        min_collision_margin=float(margin.margin.min()),
        min_det=float(min_det),
        a_tt_L3=a_tt_l3(last.states, prob.space),
        final_div_residual=traj.records[-1].div_residual if traj.records else 0.0,
        total_defect=ledger.total_defect(),
    )
    if cfg.output.snapshots:
        files["snapshot"] = out / "snapshot_final.txt"
        nv = prob.mesh.n_nodes
        write_snapshot(files["snapshot"], prob.mesh, {
            "velocity": traj.w[-1][:nv],
            "displacement": traj.d[-1][:nv],
            "pressure": prob.Q.to_vertices(traj.q_eps[-1], fill=0.0),
        }, chash)
    it_dir = emit_iterates or cfg.output.iterates
    if it_dir:
        it_dir = Path(it_dir)
        it_dir.mkdir(parents=True, exist_ok=True)
        for k, w in enumerate(fp.history):
            write_iterate(it_dir / f"iterate_{k:03d}.csv", ctx.times, w, prob.mesh.n_nodes, chash)
    if not fp.report.converged:
        res.status = EXIT_NOT_CONVERGED
        res.messages.append("[fixed_point] iteration limit reached without convergence")
    elif not all(guards.values()):
        res.status = EXIT_NOT_CONVERGED
    _write_report(out / "fixed_point.json", chash, res)
    files["report"] = out / "fixed_point.json"
    return res


def _write_report(path, chash, res: RunResult):
    doc = {"config_hash": chash, "exit_status": res.status, "messages": res.messages, **res.report}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


# -- sweeps ------------------------------------------------------------------------

SWEEP_DEFAULTS = {
    "eps": (1e-2, 1e-3, 1e-4, 1e-5),
    "dt": (0.01, 0.005, 0.0025),
    "n": (4, 8, 16),
    "T": (0.1, 0.05, 0.025),
}


def eps_sweep(prob: Problem, values=SWEEP_DEFAULTS["eps"]):
    """Final-time divergence residual of the seed image for each epsilon."""
    rows = []
    for eps in values:
        ctx = prob.context(eps=eps)
        traj = theta_map(ctx.seed(), ctx).trajectory
        rows.append(dict(eps=eps, div_residual=traj.records[-1].div_residual,
                         max_div_residual=max(r.div_residual for r in traj.records)))
    return rows


def dt_sweep(prob: Problem, values=SWEEP_DEFAULTS["dt"]):
    """Total numerical energy defect of the a = I problem for each dt."""
    rows = []
    for dt in values:
        ctx = prob.context(dt=dt)
        traj = solve_linear_problem(prob.space, prob.Q, prob.params, prob.forcing, prob.data.u0, prob.data.q0,
                                    prob.data.q1, ctx.times, ctx.settings, integrator=ctx.integrator,
                                    mode=ctx.mode, static=ctx.static)
        led = ledger_from_trajectory(prob.space, traj)
        rows.append(dict(dt=dt, total_defect=led.total_defect(), min_defect=float(led.column("defect")[1:].min())))
    return rows


def n_sweep(prob: Problem, values=SWEEP_DEFAULTS["n"], input_history=None):
    """Distance between outputs for mollified and raw inputs, per level n."""
    base = prob.context(n=None)
    v = base.seed() if input_history is None else input_history
    if input_history is None:
        v = theta_map(v, base).trajectory.w
    raw = theta_map(v, base).trajectory.w
    rows = []
    for n in values:
        ctx = prob.context(n=n)
        w = theta_map(v, ctx).trajectory.w
        rows.append(dict(n=n, distance=l2h1_distance(prob.space, ctx.times, w, raw, ctx.H)))
    return rows


def T_sweep(prob: Problem, values=SWEEP_DEFAULTS["T"]):
    """Picard contraction statistics for each horizon T (dt fixed)."""
    rows = []
    num = prob.cfg.numerics
    for T in values:
        ctx = prob.context(T=T, dt=min(num.dt, T / 2))
        fp = iterate_to_fixed_point(ctx, tol=num.tol, max_iterations=num.max_iterations)
        r = fp.report.contraction_ratios
        rows.append(dict(T=T, iterations=fp.report.iterations, converged=fp.report.converged,
                         mean_ratio=float(np.mean(r)) if r else 0.0, max_ratio=float(np.max(r)) if r else 0.0))
    return rows


SWEEPS = {"eps": eps_sweep, "dt": dt_sweep, "n": n_sweep, "T": T_sweep}


def run_sweep(cfg: SimulationConfig, param: str, values=None):
    prob = setup_problem(cfg)
    fn = SWEEPS[param]
    return fn(prob) if values is None else fn(prob, values)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def second_start(ctx: ProblemContext, amplitude=20.0, n=8):
    """An admissible start distinct from the seed: seed + t^2 bump, smoothed and corrected.

    The ``t^2`` term leaves the initial value and rate untouched; the bump
    ``(1 - r^2)^2 (-y, x)`` vanishes on the unit circle.
    """
    x = ctx.space.coords
    r2 = np.sum(x**2, axis=1)
    bump = amplitude * ((1 - r2) ** 2)[:, None] * np.column_stack([-x[:, 1], x[:, 0]])
    bump[ctx.space.boundary] = 0.0
    t = (ctx.times - ctx.times[0])[:, None, None]
    v = ctx.seed() + t**2 * bump[None]
    return mollify_velocity(ctx.space, ctx.times, v, n, ctx.data.u0, ctx.data.w1)


def with_numerics(cfg: SimulationConfig, **kw) -> SimulationConfig:
    return replace(cfg, numerics=replace(cfg.numerics, **kw))
