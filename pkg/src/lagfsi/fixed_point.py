"""The fixed-point map v -> w on velocity histories and its Picard iteration.

For a given velocity history ``v`` the map smooths ``v`` (keeping the
initial value and initial rate), integrates the flow map, freezes the
coefficient matrices and solves the penalized linear problem.  A fixed
point of this map solves the nonlinear coupled system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .catalog import AnalyticField
from .diagnostics import (
    NormTracker,
    collision_margin,
    fluid_speed_history,
    norm_tracker_update,
    trapezoid,
)
from .fem import FluidP1Space, P2Space
from .initial_data import InitialData
from .kinematics import flow_map_trajectory
from .material import MaterialParams
from .stepper import PenaltySettings, StaticOperators, Trajectory, solve_linear_problem


class CollisionRiskError(RuntimeError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class FixedPointDivergence(RuntimeError):
    pass


# -- smoothing ------------------------------------------------------------------


def lumped_mass(space: P2Space):
    """Diagonal (HRZ) lumping of the scalar P2 mass matrix: positive, total preserved."""
    M = space.scalar_mass
    diag = M.diagonal()
    return diag * (M.sum() / diag.sum())


def heat_smoother(space: P2Space, n: int):
    """Explicit heat-flow sweeps of duration ``1/(2 n^2)`` on interior nodes.

    Each sweep ``v <- v - s Ml^{-1} K v`` is a local weighted average of
    neighbours.  Boundary nodes are left alone, and affine fields are
    reproduced exactly because ``K`` annihilates them in interior rows.
    Returns a function acting on ``(..., n_nodes, c)`` arrays.
    """
    K = space.scalar_stiffness.tocsr()
    ml = lumped_mass(space)
    # Gershgorin bound on the largest eigenvalue of Ml^{-1} K
    lam_max = float(np.max(np.asarray(abs(K).sum(axis=1)).ravel() / ml))
    tau = 1.0 / (2.0 * n * n)
    sweeps = max(1, math.ceil(tau * lam_max / 1.9))
    s = tau / sweeps
    interior = (~space.boundary).astype(float)
    G = sp.diags(s * interior / ml) @ K

    def smooth(v):
        v = np.asarray(v, dtype=float)
        flat = np.moveaxis(v, -2, 0).reshape(v.shape[-2], -1)
        for _ in range(sweeps):
            flat = flat - G @ flat
        return np.moveaxis(flat.reshape((v.shape[-2],) + v.shape[:-2] + v.shape[-1:]), 0, -2)

    smooth.sweeps = sweeps
    smooth.step = s
    return smooth


def initial_correction(times, v, u0, w1):
    """``v(t) - v(0) + u0 + t (w1 - v'(0))`` with the forward-difference ``v'(0)``."""
    times = np.asarray(times, dtype=float)
    v = np.asarray(v, dtype=float)
    t = (times - times[0])[:, None, None]
    if len(times) > 1:
        vdot0 = (v[1] - v[0]) / (times[1] - times[0])
    else:
        vdot0 = np.zeros_like(v[0])
    return v - v[0] + np.asarray(u0)[None] + t * (np.asarray(w1)[None] - vdot0[None])


def mollify_velocity(space: P2Space, times, v, n, u0, w1):
    """Smoothed history with ``v_n(0) = u0`` and discrete ``v_n'(0) = w1`` exactly.

    ``n = None`` skips the smoothing and applies only the initial correction.
    """
    v = np.asarray(v, dtype=float)
    sm = v if n is None else heat_smoother(space, n)(v)
    return initial_correction(times, sm, u0, w1)


# -- distances ------------------------------------------------------------------


def h1_matrix(space: P2Space):
    """``M + S`` for vector fields in the interleaved numbering."""
    return sp.kron(space.scalar_mass + space.scalar_stiffness, sp.eye(2)).tocsr()


def l2h1_distance(space: P2Space, times, u, v, H=None) -> float:
    """Discrete ``L2(0, T; H1)`` distance (trapezoid in time)."""
    if H is None:
        H = h1_matrix(space)
    e = (np.asarray(u) - np.asarray(v)).reshape(len(times), -1)
    vals = np.einsum("ti,ti->t", e, (H @ e.T).T)
    return math.sqrt(max(trapezoid(times, vals), 0.0))


# -- the map --------------------------------------------------------------------


@dataclass
class ProblemContext:
    """Everything the map needs besides the iterate."""

    space: P2Space
    Q: FluidP1Space
    params: MaterialParams
    forcing: AnalyticField
    data: InitialData
    times: np.ndarray
    settings: PenaltySettings
    separation: float = np.inf
    integrator: str = "backward-euler"
    mode: str = "grad"
    static: StaticOperators | None = None
    _H: object = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.static is None:
            self.static = StaticOperators(self.space, self.params)

    @property
    def H(self):
        if self._H is None:
            self._H = h1_matrix(self.space)
        return self._H

    def seed(self):
        """``u0 + t w1``."""
        t = (self.times - self.times[0])[:, None, None]
        return self.data.u0[None] + t * self.data.w1[None]

    def with_times(self, times):
        return ProblemContext(self.space, self.Q, self.params, self.forcing, self.data, times, self.settings,
                              self.separation, self.integrator, self.mode, self.static, self._H)


@dataclass
class ThetaResult:
    trajectory: Trajectory
    smoothed_input: np.ndarray
    states: list
    collision: object


def theta_map(v, ctx: ProblemContext, identity_reference=False) -> ThetaResult:
    """Apply the fixed-point map to a velocity history ``v`` of shape ``(N + 1, n_nodes, 2)``.

    Raises :class:`lagfsi.kinematics.InvertibilityError` if the flow map
    loses invertibility and :class:`CollisionRiskError` if the collision
    margin of the smoothed input closes.
    """
    space, data = ctx.space, ctx.data
    vin = mollify_velocity(space, ctx.times, v, ctx.settings.mollification, data.u0, data.w1)
    report = collision_margin(ctx.times, fluid_speed_history(space, vin), ctx.separation)
    if report.flagged:
        raise CollisionRiskError(f"collision margin closes at t = {report.first_time:.6g}", report.first_time)
    if identity_reference:
        coeffs = disps = None
        states = []
    else:
        disp, states = flow_map_trajectory(space, ctx.times, vin)
        coeffs = [st.a for st in states]
        disps = [(disp[n + 1], st.displacement) for n, st in enumerate(states)]
    traj = solve_linear_problem(space, ctx.Q, ctx.params, ctx.forcing, data.u0, data.q0, data.q1, ctx.times,
                                ctx.settings, coefficients=coeffs, displacements=disps,
                                integrator=ctx.integrator, mode=ctx.mode, static=ctx.static)
    return ThetaResult(traj, vin, states, report)


@dataclass
class FixedPointReport:
    iterate_distances: list = field(default_factory=list)
    contraction_ratios: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    M_bound_ok: list = field(default_factory=list)
    M: float | None = None
    tol: float = 0.0
    T: float = 0.0

    def to_dict(self):
        return dict(
            T=self.T,
            tol=self.tol,
            M=self.M,
            converged=self.converged,
            iterations=self.iterations,
            iterate_distances=[float(x) for x in self.iterate_distances],
            contraction_ratios=[float(x) for x in self.contraction_ratios],
            M_bound_ok=[bool(x) for x in self.M_bound_ok],
        )


@dataclass
class FixedPointResult:
    v: np.ndarray
    q: np.ndarray
    report: FixedPointReport
    last: ThetaResult
    history: list = field(default_factory=list)


def iterate_to_fixed_point(ctx: ProblemContext, v0=None, tol=1e-10, max_iterations=30, M=None,
                           keep_iterates=False) -> FixedPointResult:
    """Picard iteration ``v_{k+1} = Theta(v_k)`` from ``v0`` (default ``u0 + t w1``).

    Stops when the discrete ``L2(0, T; H1)`` distance between successive
    iterates is at most ``tol``.  Raises :class:`FixedPointDivergence` when
    the contraction ratio is >= 1 three times in a row.
    """
    v = ctx.seed() if v0 is None else np.asarray(v0, dtype=float)
    rep = FixedPointReport(tol=tol, T=float(ctx.times[-1] - ctx.times[0]), M=M)
    history = []
    above = 0
    res = None
    for k in range(max_iterations):
        res = theta_map(v, ctx)
        w = res.trajectory.w
        if M is not None:
            rep.M_bound_ok.append(ctm_membership(ctx, res.smoothed_input, M)[0])
        dist = l2h1_distance(ctx.space, ctx.times, w, v, ctx.H)
        if rep.iterate_distances:
            prev = rep.iterate_distances[-1]
            ratio = dist / prev if prev > 0 else 0.0
            rep.contraction_ratios.append(ratio)
            above = above + 1 if ratio >= 1.0 else 0
        rep.iterate_distances.append(dist)
        rep.iterations = k + 1
        if keep_iterates:
            history.append(w.copy())
        v = w
        if dist <= tol:
            rep.converged = True
            break
        if above >= 3:
            raise FixedPointDivergence(
                f"Picard iteration diverging (ratios {rep.contraction_ratios[-3:]}); choose a smaller T"
            )
    return FixedPointResult(v, res.trajectory.q_eps, rep, res, history)


def ctm_membership(ctx: ProblemContext, v, M: float, ic_tol: float = 1e-9):
    """Check ``||v||^2_W <= M`` and the initial conditions on the fluid.

    Returns ``(flag, breakdown)``; the breakdown holds the squared norm, its
    summands and the two initial-condition mismatches (discrete L2 over the
    fluid, using the forward-difference rate at t = 0).
    """
    space, data = ctx.space, ctx.data
    v = np.asarray(v, dtype=float)
    tracker = norm_tracker_update(NormTracker(), space, ctx.times, v)
    fl = space.fluid_nodes
    Mf = space.vector_mass(space.fluid_elements)

    def fluid_l2(e):
        e = np.where(fl[:, None], e, 0.0).ravel()
        return math.sqrt(max(float(e @ (Mf @ e)), 0.0))

    mis0 = fluid_l2(v[0] - data.u0)
    if len(ctx.times) > 1:
        rate = (v[1] - v[0]) / (ctx.times[1] - ctx.times[0])
        mis1 = fluid_l2(rate - data.w1)
    else:
        mis1 = 0.0
    norm_sq = tracker.w_norm_sq
    scale = max(1.0, math.sqrt(norm_sq))
    flag = norm_sq <= M and mis0 <= ic_tol * scale and mis1 <= ic_tol * scale
    breakdown = dict(w_norm_sq=norm_sq, x_norm_sq=tracker.x_norm_sq, u0_mismatch=mis0, w1_mismatch=mis1,
                     summands={**tracker.x_summands, **tracker.w_summands}, surrogates=tracker.surrogates)
    return bool(flag), breakdown


def default_M(ctx: ProblemContext) -> float:
    """``2 max(||seed||^2_W, ||Theta(seed)||^2_W)``.

    The seed ``u0 + t w1`` vanishes for zero initial data, which would make
    the bound degenerate; the first image keeps it meaningful.
    """
    seed = ctx.seed()
    n0 = norm_tracker_update(NormTracker(), ctx.space, ctx.times, seed).w_norm_sq
    first = theta_map(seed, ctx).trajectory.w
    n1 = norm_tracker_update(NormTracker(), ctx.space, ctx.times, first).w_norm_sq
    return 2.0 * max(n0, n1)
