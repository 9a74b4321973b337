"""Compatible initial data: the pressures q0, q1 and accelerations w1, w2.

``u0`` and the forcing are closed-form fields (:mod:`lagfsi.catalog`); the
derived quantities are discrete.  Laplacians of discrete fields are taken
element by element (broken P2 Hessians) and every Poisson problem is
solved in weak form on the fluid P1 space:

    (grad q, grad psi) = (G, grad psi) - (s, psi) + <g_N, psi>_{outer}

with ``q`` prescribed at the interface vertices.  This is the weak form of
``lap q = div G + s`` with ``dq/dN = G.N + g_N`` on the container wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .catalog import AnalyticField
from .fem import FluidP1Space, P2Space
from .geometry import interface_normals, outer_normals, vertex_interface_normals
from .material import MaterialParams, elastic_stress


class PoissonSolveError(RuntimeError):
    pass


@dataclass
class MixedPoissonSystem:
    """Assembled mixed Dirichlet/Neumann system on the fluid P1 space."""

    matrix: sp.csr_matrix  # free-free block
    rhs: np.ndarray  # free rows, lifting already subtracted
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    n: int

    def expand(self, q_free):
        q = np.zeros(self.n)
        q[self.fixed] = self.fixed_values
        q[self.free] = q_free
        return q

    def solve(self, rtol=1e-13, maxiter=None):
        """Jacobi-preconditioned conjugate gradients (deterministic)."""
        A = self.matrix
        b = self.rhs
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return self.expand(np.zeros(len(self.free))), 0.0
        dinv = 1.0 / A.diagonal()
        M = LinearOperator(A.shape, matvec=lambda x: dinv * x, dtype=float)
        x, info = cg(A, b, rtol=rtol, atol=0.0, maxiter=maxiter or 10 * A.shape[0], M=M)
        res = float(np.linalg.norm(A @ x - b))
        if info != 0 or not np.isfinite(res) or res > 1e3 * rtol * bnorm:
            raise PoissonSolveError(f"conjugate gradients did not converge (info={info}, residual={res:.3e})")
        return self.expand(x), res


def outer_facet_quadrature(space: P2Space):
    """Points ``(nf, 3, 2)``, weights ``(nf, 3)`` and normals ``(nf, 2)`` on the wall."""
    pts, w = space.facet_quadrature(space.mesh.outer_facets)
    return pts, w, outer_normals(space.mesh)


def interface_facet_quadrature(space: P2Space):
    pts, w = space.facet_quadrature(space.mesh.interface_facets)
    return pts, w, interface_normals(space.mesh)


def assemble_mixed_poisson(space: P2Space, Q: FluidP1Space, *, flux=None, source=None, neumann=None, dirichlet=None):
    """Assemble ``(grad q, grad psi) = (flux, grad psi) - (source, psi) + <neumann, psi>``.

    Parameters
    ----------
    flux : (mf, nq, 2) array at fluid quadrature points, optional
    source : (mf, nq) array at fluid quadrature points, optional
    neumann : (nf, 3) array at wall Gauss points, or callable ``(points, normals) -> values``
    dirichlet : values at ``Q.interface_dofs`` or callable ``points -> values``
    """
    K = Q.stiffness(space)
    b = np.zeros(Q.n)
    if flux is not None:
        b += Q.flux_load(space, flux)
    if source is not None:
        b -= Q.load(space, source)
    if neumann is not None:
        pts, w, normals = outer_facet_quadrature(space)
        g = neumann(pts, np.broadcast_to(normals[:, None, :], pts.shape)) if callable(neumann) else neumann
        from .fem import EDGE_S

        shape = np.stack([1.0 - EDGE_S, EDGE_S], axis=1)  # (3, 2) endpoint weights
        local = np.einsum("fq,fq,qa->fa", w, np.asarray(g, dtype=float), shape)
        dofs = Q.index[space.mesh.outer_facets]
        b += np.bincount(dofs.ravel(), weights=local.ravel(), minlength=Q.n)
    fixed = Q.interface_dofs
    if dirichlet is None:
        vals = np.zeros(len(fixed))
    elif callable(dirichlet):
        vals = np.asarray(dirichlet(Q.coords[fixed]), dtype=float)
    else:
        vals = np.asarray(dirichlet, dtype=float)
    free = np.setdiff1d(np.arange(Q.n), fixed)
    lift = np.zeros(Q.n)
    lift[fixed] = vals
    rhs = (b - K @ lift)[free]
    return MixedPoissonSystem(K[free][:, free].tocsr(), rhs, free, fixed, vals, Q.n)


def solve_mixed_poisson(space, Q, rtol=1e-13, **data):
    return assemble_mixed_poisson(space, Q, **data).solve(rtol=rtol)[0]


# -- helpers -------------------------------------------------------------


def _fluid_qp(space: P2Space):
    return space.qpoints[space.fluid_elements]


def _vertex_values_from_fluid(space: P2Space, coeffs, vertices):
    """Value and gradient of a P2 field at interface vertices, fluid side.

    Gradients are averaged over the fluid elements sharing each vertex
    along the interface.
    """
    mesh = space.mesh
    fl = mesh.interface_elements[:, 0]
    pos = {int(v): k for k, v in enumerate(vertices)}
    val = np.zeros((len(vertices), 2))
    grad = np.zeros((len(vertices), 2, 2))
    cnt = np.zeros(len(vertices))
    for end in range(2):
        verts = mesh.interface_facets[:, end]
        v, g = space.eval_points(coeffs, fl, mesh.nodes[verts])
        idx = np.array([pos[int(x)] for x in verts])
        np.add.at(val, idx, v)
        np.add.at(grad, idx, g)
        np.add.at(cnt, idx, 1.0)
    return val / cnt[:, None], grad / cnt[:, None, None]


def _p1_grad_at_facets(space: P2Space, Q: FluidP1Space, q, facet_elements):
    """Gradient of a fluid P1 field on the given (fluid) elements."""
    local = np.asarray(q)[Q.index[space.mesh.elements[facet_elements]]]
    return np.einsum("mkd,mk->md", space.grad_bary[facet_elements], local)


def _sym_t(grad_u):
    """``(a a^T)_t`` at t = 0, i.e. ``-(grad u0 + grad u0^T)``."""
    return -(grad_u + np.swapaxes(grad_u, -1, -2))


# -- the data --------------------------------------------------------------


def solve_q0(u0: AnalyticField, forcing: AnalyticField, space: P2Space, Q: FluidP1Space, params: MaterialParams):
    """Initial pressure.

    ``lap q0 = div f(0) + (a^j_i)_t(0) u0^i,_j`` in the fluid, ``q0 = nu
    (grad u0 N).N`` on the interface, ``dq0/dN = f(0).N + nu lap u0 . N`` on
    the wall, with ``a_t(0) = -grad u0``.
    """
    x = _fluid_qp(space)
    G = u0.grad(x)
    source = -np.einsum("...ij,...ji->...", G, G)
    flux = forcing.value(x, 0.0)
    nu = params.nu

    def neumann(p, n):
        return nu * np.einsum("...i,...i->...", u0.laplacian(p), n)

    vn = vertex_interface_normals(space.mesh)
    iface_vertices = Q.vertices[Q.interface_dofs]
    N = np.array([vn[int(v)] for v in iface_vertices])
    verts = space.mesh.nodes[iface_vertices]
    gu = u0.grad(verts)
    dir_vals = nu * np.einsum("pi,pik,pk->p", N, gu, N)
    return solve_mixed_poisson(space, Q, flux=flux, source=source, neumann=neumann, dirichlet=dir_vals)


def compute_w1(u0: AnalyticField, q0, forcing: AnalyticField, space: P2Space, Q: FluidP1Space, params: MaterialParams):
    """L2 projection of ``nu lap u0 - grad q0 + f(0)`` (fluid) and ``f(0)`` (solid)."""
    vals = forcing.value(space.qpoints, 0.0)
    fe = space.fluid_elements
    _, gq = Q.eval_qp(space, q0)
    vals[fe] += params.nu * u0.laplacian(space.qpoints[fe]) - gq
    return space.project(vals)


def _q1_flux_and_source(u0, w1, q0, forcing, space, Q, params):
    """``G`` and ``s`` of the q1 problem at fluid quadrature points."""
    fe = space.fluid_elements
    x = space.qpoints[fe]
    nu = params.nu
    gu = u0.grad(x)
    hu = u0.hess(x)  # [i, k, l]
    _, gw, hw = space.eval_qp(w1, fe)
    lap_w1 = hw[..., 0, 0] + hw[..., 1, 1]
    q0v, gq0 = Q.eval_qp(space, q0)

    F_t = forcing.time_derivative(x, 0.0) + np.einsum("...ik,...k->...i", forcing.grad(x, 0.0), u0.value(x))
    # nu ((a a^T)_t u0^i,_k),_j with B[k,j] = -(d_j u0^k + d_k u0^j)
    B = _sym_t(gu)
    dB = -(np.einsum("...kjj->...k", hu) + np.einsum("...jkj->...k", hu))  # sum_j d_j B[k, j]
    visc_coupling = np.einsum("...k,...ik->...i", dB, gu) + np.einsum("...kj,...ikj->...i", B, hu)
    # ((a^j_i)_t q0),_j = -d_i(div u0) q0 - d_i u0^j d_j q0
    grad_div = np.einsum("...jji->...i", hu)
    aq = -grad_div * q0v[..., None] - np.einsum("...ji,...j->...i", gu, gq0)
    G = nu * lap_w1 + F_t + nu * visc_coupling - aq

    a_t = -gu
    a_tt = 2.0 * gu @ gu - gw
    s = 2.0 * np.einsum("...ji,...ij->...", a_t, gw) + np.einsum("...ji,...ij->...", a_tt, gu)
    return G, s


def solve_q1(u0, w1, q0, forcing, space: P2Space, Q: FluidP1Space, params: MaterialParams):
    """Pressure time derivative at t = 0.

    Interior and wall rows combine into the weak form ``(grad q1, grad psi)
    = (G, grad psi) - (s, psi)``; the interface row is the normal-normal
    stress balance.
    """
    G, s = _q1_flux_and_source(u0, w1, q0, forcing, space, Q, params)
    iface_vertices = Q.vertices[Q.interface_dofs]
    vn = vertex_interface_normals(space.mesh)
    N = np.array([vn[int(v)] for v in iface_vertices])
    p = space.mesh.nodes[iface_vertices]
    gu = u0.grad(p)
    _, gw = _vertex_values_from_fluid(space, w1, iface_vertices)
    nu = params.nu
    B = _sym_t(gu)
    sigma = elastic_stress(gu, params)
    q0_iface = np.asarray(q0)[Q.interface_dofs]
    nn = lambda M: np.einsum("pi,pij,pj->p", N, M, N)  # noqa: E731
    dir_vals = nu * (nn(gw) + nn(gu @ B)) - nn(sigma) + q0_iface * nn(-gu)
    return solve_mixed_poisson(space, Q, flux=G, source=s, dirichlet=dir_vals)


def compute_w2(u0, w1, q0, q1, forcing, space: P2Space, Q: FluidP1Space, params: MaterialParams):
    """L2 projection of the initial acceleration derivative.

    Fluid: ``G - grad q1``; solid: ``f_t(0) + div(c : grad u0)``.
    """
    fe, se = space.fluid_elements, space.solid_elements
    vals = np.zeros((space.mesh.n_elements, space.nq, 2))
    G, _ = _q1_flux_and_source(u0, w1, q0, forcing, space, Q, params)
    _, gq1 = Q.eval_qp(space, q1)
    vals[fe] = G - gq1
    if len(se):
        x = space.qpoints[se]
        hu = u0.hess(x)
        grad_div = np.einsum("...jji->...i", hu)
        lap = hu[..., 0, 0] + hu[..., 1, 1]
        vals[se] = forcing.time_derivative(x, 0.0) + params.lam * grad_div + params.mu * (lap + grad_div)
    return space.project(vals)


@dataclass
class InitialData:
    u0_field: AnalyticField
    forcing: AnalyticField
    u0: np.ndarray
    q0: np.ndarray
    w1: np.ndarray
    q1: np.ndarray
    w2: np.ndarray
    compat_residuals: dict = field(default_factory=dict)


def build_initial_data(u0: AnalyticField, forcing: AnalyticField, space: P2Space, Q: FluidP1Space, params):
    u0h = space.interpolate(u0.value)
    q0 = solve_q0(u0, forcing, space, Q, params)
    w1 = compute_w1(u0, q0, forcing, space, Q, params)
    q1 = solve_q1(u0, w1, q0, forcing, space, Q, params)
    w2 = compute_w2(u0, w1, q0, q1, forcing, space, Q, params)
    data = InitialData(u0, forcing, u0h, q0, w1, q1, w2)
    data.compat_residuals = check_compatibility(data, space, Q, params)
    return data


def _tan(v, n):
    return v - np.einsum("...i,...i->...", v, n)[..., None] * n


def _l2(values, weights):
    v = np.asarray(values)
    sq = v**2 if v.ndim == weights.ndim else np.sum(v**2, axis=-1)
    return float(np.sqrt(np.sum(weights * sq)))


def check_compatibility(data: InitialData, space: P2Space, Q: FluidP1Space, params: MaterialParams) -> dict:
    """L2 norms of the compatibility residuals on the interface and wall.

    Keys, in order: ``u0_divergence`` and ``u0_wall`` (membership of u0),
    ``tangential_strain`` ([grad u0 N]_tan on the interface), ``w1_wall``
    (w1 on the container wall), ``interface_momentum`` (nu lap u0 - grad q0
    on the interface) and ``tangential_stress`` (second-order tangential
    stress balance on the interface).
    """
    u0 = data.u0_field
    nu = params.nu
    mesh = space.mesh
    fe = space.fluid_elements
    out = {}

    _, gu0h, _ = space.eval_qp(data.u0, fe)
    out["u0_divergence"] = _l2(gu0h[..., 0, 0] + gu0h[..., 1, 1], space.qweights[fe])
    pw, ww, _ = outer_facet_quadrature(space)
    out["u0_wall"] = _l2(u0.value(pw), ww)

    pi, wi, Ni = interface_facet_quadrature(space)
    Nq = np.broadcast_to(Ni[:, None, :], pi.shape)
    gu = u0.grad(pi)
    out["tangential_strain"] = _l2(_tan(np.einsum("...ik,...k->...i", gu, Nq), Nq), wi)

    owner = mesh.outer_elements
    w1w, _ = space.eval_points(data.w1, np.repeat(owner, 3), pw.reshape(-1, 2))
    out["w1_wall"] = _l2(w1w.reshape(pw.shape), ww)

    fl = mesh.interface_elements[:, 0]
    gq0 = _p1_grad_at_facets(space, Q, data.q0, fl)
    mom = nu * u0.laplacian(pi) - gq0[:, None, :]
    out["interface_momentum"] = _l2(mom, wi)

    _, gw1 = space.eval_points(data.w1, np.repeat(fl, 3), pi.reshape(-1, 2))
    gw1 = gw1.reshape(pi.shape + (2,))
    B = _sym_t(gu)
    lhs = nu * np.einsum("...ik,...k->...i", gw1, Nq) + nu * np.einsum("...ik,...kj,...j->...i", gu, B, Nq)
    rhs = np.einsum("...ij,...j->...i", elastic_stress(gu, params), Nq)
    out["tangential_stress"] = _l2(_tan(lhs - rhs, Nq), wi)
    return out
