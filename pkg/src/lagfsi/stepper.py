"""Penalized Galerkin system for the linearized fluid-structure problem.

With coefficients ``a`` frozen on each time step, the semi-discrete system
for the nodal velocity ``w`` and the displacement ``d = int_0^t w`` is

    M w' + A(a) w + K d + P(a) w = L + B(a)^T W (q0 + t q1)

where ``M`` is the velocity mass matrix, ``A`` the viscous form on the
fluid, ``K`` the elastic form on the solid, ``P = (1/eps) B^T W B`` the
divergence penalty (``B`` maps a velocity to its a-weighted divergence at
the fluid quadrature points, ``W`` holds their weights) and ``L`` the
external load.  The velocity space is continuous across the interface and
zero on the container wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .catalog import AnalyticField
from .fem import FluidP1Space, P2Space
from .kinematics import DET_GUARD, a_divergence
from .material import MaterialParams

INTEGRATORS = ("backward-euler", "midpoint")


class LinearSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class PenaltySettings:
    epsilon: float = 1e-4
    mollification: int | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.mollification is not None and self.mollification < 1:
            raise ValueError("mollification level must be a positive integer or None")


@dataclass
class OperatorBundle:
    M: sp.csr_matrix
    A: sp.csr_matrix
    K: sp.csr_matrix
    P: sp.csr_matrix
    B: sp.csr_matrix
    weights: np.ndarray  # fluid quadrature weights, flattened like B's rows
    eps: float
    a: np.ndarray


class StaticOperators:
    """Mass and elastic matrices, which do not depend on the flow map."""

    def __init__(self, space: P2Space, params: MaterialParams):
        self.space = space
        self.params = params
        self.M = space.vector_mass()
        self.K = elastic_matrix(space, params)
        self.free = np.flatnonzero(~np.repeat(space.boundary, 2))


def elastic_matrix(space: P2Space, params: MaterialParams):
    """``(c : grad d, grad phi)`` over the solid elements."""
    se = space.solid_elements
    if len(se) == 0:
        n = 2 * space.n_nodes
        return sp.csr_matrix((n, n))
    g = space.grad_phi[se]  # (m, q, 6, 2)
    w = space.qweights[se]
    lam, mu = params.lam, params.mu
    t1 = lam * np.einsum("mq,mqai,mqbj->maibj", w, g, g)
    gg = np.einsum("mq,mqak,mqbk->mab", w, g, g)
    t2 = mu * np.einsum("mab,ij->maibj", gg, np.eye(2))
    t3 = mu * np.einsum("mq,mqaj,mqbi->maibj", w, g, g)
    return space.assemble_vector_matrix((t1 + t2 + t3).reshape(len(se), 12, 12), se)


def _a_weighted_gradients(space: P2Space, a):
    """``ga[m, q, b, :] = a^T grad N_b`` on the fluid elements."""
    fe = space.fluid_elements
    return np.einsum("mqrk,mqbr->mqbk", a, space.grad_phi[fe])


def viscous_matrix(space: P2Space, a, nu: float, mode: str = "grad"):
    fe = space.fluid_elements
    ga = _a_weighted_gradients(space, a)
    w = space.qweights[fe]
    gg = np.einsum("mq,mqak,mqbk->mab", w, ga, ga)
    local = np.einsum("mab,ij->maibj", gg, np.eye(2))
    if mode == "def":
        local = local + np.einsum("mq,mqaj,mqbi->maibj", w, ga, ga)
    elif mode != "grad":
        raise ValueError(f"unknown constitutive mode {mode!r}")
    return space.assemble_vector_matrix(nu * local.reshape(len(fe), 12, 12), fe)


def divergence_matrix(space: P2Space, a):
    """Sparse ``B`` with ``(B w)[q] = a^k_i w^i,_k`` at each fluid quadrature point."""
    fe = space.fluid_elements
    ga = _a_weighted_gradients(space, a)  # (m, q, 6, 2)
    m, nq = ga.shape[:2]
    rows = np.repeat(np.arange(m * nq), 12)
    dofs = space.vector_dofs(fe)  # (m, 12)
    cols = np.repeat(dofs, nq, axis=0).ravel()
    return sp.csr_matrix((ga.reshape(m * nq, 12).ravel(), (rows, cols)), shape=(m * nq, 2 * space.n_nodes))


def assemble_operators(space: P2Space, a, params: MaterialParams, eps: float, static: StaticOperators | None = None, mode="grad"):
    """Operator bundle for frozen coefficients ``a`` (fluid quadrature points)."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("coefficient field is not finite")
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    # det a = 1 / det grad eta; the guard det grad eta >= 1/2 means det a <= 2
    if det.size and (det.min() <= 0 or det.max() > 1.0 / DET_GUARD + 1e-12):
        raise ValueError("coefficient field violates the invertibility guard")
    if static is None:
        static = StaticOperators(space, params)
    A = viscous_matrix(space, a, params.nu, mode)
    B = divergence_matrix(space, a)
    W = space.qweights[space.fluid_elements].ravel()
    P = (B.T @ sp.diags(W / eps) @ B).tocsr()
    return OperatorBundle(static.M, A, static.K, P, B, W, eps, a)


def identity_coefficients(space: P2Space):
    return np.broadcast_to(np.eye(2), (len(space.fluid_elements), space.nq, 2, 2)).copy()


def compose_forcing(forcing: AnalyticField, space: P2Space, displacement, t: float):
    """``F = f(eta(x), t)`` on fluid quadrature points and ``f(x, t)`` on the solid."""
    x = space.qpoints.copy()
    if displacement is not None:
        fe = space.fluid_elements
        dv, _, _ = space.eval_qp(displacement, fe)
        x[fe] += dv
    return forcing.value(x, t)


def load_vector(space: P2Space, F_qp):
    local = np.einsum("mq,qa,mqi->mai", space.qweights, space.phi, F_qp).reshape(-1, 12)
    return space.assemble_vector_load(local, np.arange(space.mesh.n_elements))


@dataclass
class LinearSolveState:
    t: float
    w: np.ndarray  # (n_nodes, 2)
    d: np.ndarray  # (n_nodes, 2)
    q_eps: np.ndarray
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class StepRecord:
    """Energy bookkeeping for one step (all flat, in units of energy)."""

    t: float
    kinetic: float
    elastic: float
    viscous: float  # dt * w*^T A w*
    penalty: float  # dt * w*^T P w*
    offset_work: float  # dt * w*^T B^T W g
    external_work: float  # dt * L . w*
    div_residual: float
    min_det: float


def _qform(x, A, y=None):
    return float(x @ (A @ (x if y is None else y)))


def step(state: LinearSolveState, ops: OperatorBundle, load, offset, dt: float, static: StaticOperators,
         integrator: str = "backward-euler", min_det: float = 1.0):
    """Advance one implicit step.

    ``load`` is the external load vector and ``offset`` the penalty offset
    ``q0 + t q1`` at the fluid quadrature points, both at the integrator's
    time level (end point for backward Euler, midpoint for implicit
    midpoint).  Returns ``(new_state, record)``.
    """
    M, K = ops.M, ops.K
    S = ops.A + ops.P
    w0 = state.w.ravel()
    d0 = state.d.ravel()
    rhs_src = load + ops.B.T @ (ops.weights * offset)
    if integrator == "backward-euler":
        lhs = M / dt + S + dt * K
        rhs = rhs_src + M @ w0 / dt - K @ d0
    elif integrator == "midpoint":
        lhs = M / dt + 0.5 * S + 0.25 * dt * K
        rhs = rhs_src + M @ w0 / dt - 0.5 * (S @ w0) - K @ d0 - 0.25 * dt * (K @ w0)
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    free = static.free
    w1 = np.zeros_like(w0)
    if np.any(rhs[free]):
        sub = lhs[free][:, free].tocsc()
        try:
            w1[free] = splu(sub).solve(rhs[free])
        except RuntimeError as exc:  # singular factorization
            raise LinearSolveError(f"step at t={state.t + dt:.6g}: {exc}") from exc
        res = np.linalg.norm(sub @ w1[free] - rhs[free])
        if not np.isfinite(res) or res > 1e-8 * max(1.0, np.linalg.norm(rhs[free])):
            raise LinearSolveError(f"step at t={state.t + dt:.6g}: residual {res:.3e}")
    if integrator == "backward-euler":
        w_star = w1
        d1 = d0 + dt * w1
    else:
        w_star = 0.5 * (w0 + w1)
        d1 = d0 + dt * w_star
    div = ops.B @ w1
    rec = StepRecord(
        t=state.t + dt,
        kinetic=0.5 * _qform(w1, M),
        elastic=0.5 * _qform(d1, K),
        viscous=dt * _qform(w_star, ops.A),
        penalty=dt * _qform(w_star, ops.P),
        offset_work=dt * float(w_star @ (ops.B.T @ (ops.weights * offset))),
        external_work=dt * float(load @ w_star),
        div_residual=float(np.sqrt(np.sum(ops.weights * div**2))),
        min_det=min_det,
    )
    new = LinearSolveState(state.t + dt, w1.reshape(-1, 2), d1.reshape(-1, 2), state.q_eps, state.history)
    return new, rec


def recover_pressure(space: P2Space, Q: FluidP1Space, w, a, q0, q1, t: float, eps: float):
    """``q_eps = q0 + t q1 - (1/eps) a^k_i w^i,_k`` projected on the fluid P1 space."""
    _, gw, _ = space.eval_qp(w, space.fluid_elements)
    div = a_divergence(a, gw)
    q0v, _ = Q.eval_qp(space, q0)
    q1v, _ = Q.eval_qp(space, q1)
    if not np.any(div):
        # offset already lies in the P1 space
        return np.asarray(q0, dtype=float) + t * np.asarray(q1, dtype=float)
    return Q.project(space, q0v + t * q1v - div / eps)


def offset_at(space, Q, q0, q1, t):
    q0v, _ = Q.eval_qp(space, q0)
    q1v, _ = Q.eval_qp(space, q1)
    return (q0v + t * q1v).ravel()


@dataclass
class Trajectory:
    """Velocity, displacement and pressure samples on the time grid."""

    times: np.ndarray
    w: np.ndarray  # (N + 1, n_nodes, 2)
    d: np.ndarray  # (N + 1, n_nodes, 2)
    q_eps: np.ndarray  # (N + 1, nQ)
    records: list

    @property
    def n_steps(self):
        return len(self.times) - 1


def solve_linear_problem(space: P2Space, Q: FluidP1Space, params: MaterialParams, forcing: AnalyticField,
                         u0, q0, q1, times, settings: PenaltySettings, *, coefficients=None,
                         displacements=None, integrator="backward-euler", mode="grad", static=None):
    """Run the penalized scheme over a time grid.

    Parameters
    ----------
    u0 : (n_nodes, 2) nodal initial velocity
    q0, q1 : fluid P1 pressures entering the penalty offset ``q0 + t q1``
    coefficients : list of per-step ``a`` arrays (fluid quadrature points),
        or None for ``a = I``.  Entry ``n`` is used on ``[t_n, t_{n+1}]``.
    displacements : list of per-step nodal displacement pairs
        ``(at end point, at midpoint)`` used to compose the forcing, or None
        for the identity map.
    """
    times = np.asarray(times, dtype=float)
    if static is None:
        static = StaticOperators(space, params)
    w = np.asarray(u0, dtype=float).reshape(-1, 2).copy()
    w[space.boundary] = 0.0
    d = np.zeros_like(w)
    nQ = Q.n
    q_hist = np.zeros((len(times), nQ))
    q_hist[0] = np.asarray(q0) + times[0] * np.asarray(q1)
    W = [w.copy()]
    D = [d.copy()]
    records = []
    state = LinearSolveState(times[0], w, d, q_hist[0])
    ident = identity_coefficients(space)
    ops_I = None
    for n in range(len(times) - 1):
        dt = times[n + 1] - times[n]
        if coefficients is None:
            if ops_I is None:
                ops_I = assemble_operators(space, ident, params, settings.epsilon, static, mode)
            ops, a, mdet = ops_I, ident, 1.0
        else:
            a = coefficients[n]
            ops = assemble_operators(space, a, params, settings.epsilon, static, mode)
            mdet = float(1.0 / np.max(a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]))
        t_eval = times[n + 1] if integrator == "backward-euler" else times[n] + 0.5 * dt
        disp = None
        if displacements is not None:
            disp = displacements[n][0] if integrator == "backward-euler" else displacements[n][1]
        load = load_vector(space, compose_forcing(forcing, space, disp, t_eval))
        offset = offset_at(space, Q, q0, q1, t_eval)
        state, rec = step(state, ops, load, offset, dt, static, integrator, mdet)
        state.q_eps = recover_pressure(space, Q, state.w, a, q0, q1, state.t, settings.epsilon)
        q_hist[n + 1] = state.q_eps
        W.append(state.w.copy())
        D.append(state.d.copy())
        records.append(rec)
    return Trajectory(times, np.array(W), np.array(D), q_hist, records)
