"""Lagrangian flow map and its inverse-gradient coefficient matrices.

Index convention: for a field ``u`` the gradient array has ``G[..., i, k]
= d u^i / d x_k``.  The coefficient matrix is ``a = (grad eta)^{-1}`` and
``a^k_i`` is stored as ``a[..., k, i]``, so the a-weighted divergence
``a^k_i w^i,_k`` is ``trace(grad_w @ a)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fem import P2Space

DET_GUARD = 0.5
SINGULAR_TOL = 1e-14


class SingularMapError(ArithmeticError):
    pass


class InvertibilityError(RuntimeError):
    """Raised when a flow map leaves the det >= 1/2 region mid-horizon."""

    def __init__(self, message, time=None, min_det=None):
        super().__init__(message)
        self.time = time
        self.min_det = min_det


def det_and_cofactor(F):
    """Determinant and cofactor matrix of a stack of 2x2 or 3x3 matrices."""
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    if d == 2:
        det = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
        cof = np.empty_like(F)
        cof[..., 0, 0] = F[..., 1, 1]
        cof[..., 0, 1] = -F[..., 1, 0]
        cof[..., 1, 0] = -F[..., 0, 1]
        cof[..., 1, 1] = F[..., 0, 0]
        return det, cof
    if d == 3:
        # rows of the cofactor are cross products of the other two rows
        r0, r1, r2 = F[..., 0, :], F[..., 1, :], F[..., 2, :]
        cof = np.stack([np.cross(r1, r2), np.cross(r2, r0), np.cross(r0, r1)], axis=-2)
        det = np.einsum("...j,...j->...", r0, cof[..., 0, :])
        return det, cof
    raise ValueError(f"unsupported dimension {d}")


def coefficient_matrix(F):
    """Return ``(a, det)`` with ``a = Cof(F)^T / det F = F^{-1}``.

    Works on single matrices and on stacks ``(..., d, d)``.
    """
    det, cof = det_and_cofactor(F)
    if np.any(np.abs(det) < SINGULAR_TOL):
        raise SingularMapError(f"singular flow-map gradient: |det| = {np.min(np.abs(det)):.3e}")
    a = np.swapaxes(cof, -1, -2) / np.asarray(det)[..., None, None]
    return a, det


def coefficient_time_derivatives(a, grad_v, grad_vt):
    """First and second time derivatives of ``a = (grad eta)^{-1}``.

    With ``eta_t = v``: ``a_t = -a grad_v a`` and
    ``a_tt = -a_t grad_v a - a grad_vt a - a grad_v a_t``.
    """
    a_t = -a @ grad_v @ a
    a_tt = -a_t @ grad_v @ a - a @ grad_vt @ a - a @ grad_v @ a_t
    return a_t, a_tt


def a_divergence(a, grad_w):
    """``a^k_i w^i,_k`` pointwise."""
    return np.einsum("...ik,...ki->...", grad_w, a)


@dataclass(frozen=True)
class InvertibilityReport:
    valid: bool
    min_det: float
    element: int
    point: np.ndarray


@dataclass(frozen=True)
class FlowMapState:
    """Flow map ``eta = Id + displacement`` with quadrature-point caches.

    Caches cover the fluid elements (``space.fluid_elements``), which is where
    the coefficient matrices enter the weak forms.  ``a_t`` and ``a_tt`` are
    filled only when a velocity (and its time derivative) is supplied.
    """

    space: P2Space
    displacement: np.ndarray
    grad_eta: np.ndarray
    cof: np.ndarray
    det: np.ndarray
    a: np.ndarray
    a_t: np.ndarray | None = None
    a_tt: np.ndarray | None = None
    valid: bool = True
    elements: np.ndarray = field(default=None, repr=False)

    @property
    def min_det(self) -> float:
        return float(self.det.min()) if self.det.size else 1.0


def flow_map_state(space: P2Space, displacement=None, v=None, v_t=None, elements=None) -> FlowMapState:
    """Build a :class:`FlowMapState` from nodal displacement (and velocity)."""
    if elements is None:
        elements = space.fluid_elements
    if displacement is None:
        displacement = np.zeros((space.n_nodes, 2))
    displacement = np.asarray(displacement, dtype=float).reshape(space.n_nodes, 2)
    _, gd, _ = space.eval_qp(displacement, elements)
    grad_eta = gd + np.eye(2)
    det, cof = det_and_cofactor(grad_eta)
    if np.any(np.abs(det) < SINGULAR_TOL):
        a = np.full_like(grad_eta, np.nan)
        return FlowMapState(space, displacement, grad_eta, cof, det, a, valid=False, elements=elements)
    a = np.swapaxes(cof, -1, -2) / det[..., None, None]
    a_t = a_tt = None
    if v is not None:
        _, gv, _ = space.eval_qp(v, elements)
        gvt = np.zeros_like(gv) if v_t is None else space.eval_qp(v_t, elements)[1]
        a_t, a_tt = coefficient_time_derivatives(a, gv, gvt)
    valid = bool(det.min() >= DET_GUARD) if det.size else True
    return FlowMapState(space, displacement, grad_eta, cof, det, a, a_t, a_tt, valid, elements)


def advance_flow_map(state: FlowMapState, v, dt: float, v_end=None) -> FlowMapState:
    """One step of ``eta_t = v``.

    ``v`` is the velocity at the step midpoint; if ``v_end`` is given, ``v``
    is read as the start value and the midpoint is their average (implicit
    midpoint rule, exact for velocities affine in time).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = np.asarray(v, dtype=float).reshape(-1, 2)
    v_mid = v if v_end is None else 0.5 * (v + np.asarray(v_end, dtype=float).reshape(-1, 2))
    return flow_map_state(state.space, state.displacement + dt * v_mid, elements=state.elements)


def invertibility_check(state: FlowMapState) -> InvertibilityReport:
    """``valid`` iff the minimum quadrature-point determinant is >= 1/2."""
    if state.det.size == 0:
        return InvertibilityReport(True, 1.0, -1, np.zeros(2))
    m, q = np.unravel_index(np.argmin(state.det), state.det.shape)
    min_det = float(state.det[m, q])
    el = int(state.elements[m])
    return InvertibilityReport(min_det >= DET_GUARD, min_det, el, state.space.qpoints[el, q].copy())


def flow_map_trajectory(space: P2Space, times, velocities, elements=None):
    """Flow maps at the step midpoints of a sampled velocity history.

    ``velocities`` has shape ``(n_steps + 1, n_nodes, 2)`` sampled at
    ``times``; the velocity is taken piecewise linear in time so the
    displacement is integrated exactly.  Returns ``(nodal_displacements,
    midpoint_states)`` where the states carry ``a``, ``a_t`` and ``a_tt``.

    Raises :class:`InvertibilityError` at the first midpoint or node where
    det grad eta < 1/2.
    """
    times = np.asarray(times, dtype=float)
    v = np.asarray(velocities, dtype=float)
    disp = np.zeros_like(v)
    states = []
    for n in range(len(times) - 1):
        dt = times[n + 1] - times[n]
        disp[n + 1] = disp[n] + 0.5 * dt * (v[n] + v[n + 1])
        d_mid = disp[n] + 0.125 * dt * (3 * v[n] + v[n + 1])
        v_mid = 0.5 * (v[n] + v[n + 1])
        v_t = (v[n + 1] - v[n]) / dt
        st = flow_map_state(space, d_mid, v_mid, v_t, elements)
        if not st.valid:
            raise InvertibilityError(
                f"flow map lost invertibility near t = {times[n] + 0.5 * dt:.6g} (min det {st.min_det:.4f})",
                time=times[n] + 0.5 * dt,
                min_det=st.min_det,
            )
        states.append(st)
    return disp, states


def piola_residual(space: P2Space, displacement, elements=None):
    """Weak divergence of the columns of ``det(grad eta) a``.

    Returns the vector ``r[c, node] = -int_{elements} (J a)[k, c] d_k phi_node``
    over interior test functions, as an array of shape ``(2, n_interior)``.
    The Piola identity says this vanishes.
    """
    if elements is None:
        elements = np.arange(space.mesh.n_elements)
    st = flow_map_state(space, displacement, elements=elements)
    return weak_cofactor_divergence(space, st.cof, elements)


def piola_residual_analytic(space: P2Space, grad_eta, elements=None):
    """As :func:`piola_residual` but with ``grad eta`` given as a callable on points.

    Only the quadrature error remains, so the residual decays at the
    quadrature order under refinement.
    """
    if elements is None:
        elements = np.arange(space.mesh.n_elements)
    _, cof = det_and_cofactor(grad_eta(space.qpoints[elements]))
    return weak_cofactor_divergence(space, cof, elements)


def weak_cofactor_divergence(space: P2Space, cof, elements):
    """``r[c, node] = -int (cof^T)[k, c] d_k phi_node`` restricted to interior test functions."""
    cofT = np.swapaxes(cof, -1, -2)  # det * a
    w = space.qweights[elements]
    local = np.einsum("mq,mqkc,mqak->mca", w, cofT, space.grad_phi[elements])
    out = np.zeros((2, space.n_nodes))
    dm = space.dofmap[elements]
    for c in range(2):
        out[c] = -np.bincount(dm.ravel(), weights=local[:, c, :].ravel(), minlength=space.n_nodes)
    interior = ~space.boundary
    if len(elements) != space.mesh.n_elements:
        # only test functions supported inside the chosen elements
        touched = np.zeros(space.n_nodes, dtype=bool)
        touched[dm.ravel()] = True
        others = np.setdiff1d(np.arange(space.mesh.n_elements), elements)
        outside = np.zeros(space.n_nodes, dtype=bool)
        outside[space.dofmap[others].ravel()] = True
        interior &= touched & ~outside
    return out[:, interior]


__all__ = [
    "DET_GUARD",
    "FlowMapState",
    "InvertibilityError",
    "InvertibilityReport",
    "SingularMapError",
    "a_divergence",
    "advance_flow_map",
    "coefficient_matrix",
    "coefficient_time_derivatives",
    "det_and_cofactor",
    "flow_map_state",
    "flow_map_trajectory",
    "invertibility_check",
    "piola_residual",
    "piola_residual_analytic",
    "weak_cofactor_divergence",
]
