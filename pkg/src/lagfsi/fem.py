"""Lagrange P2 (velocity) and P1 (fluid pressure) spaces on a :class:`Mesh`.

Vector fields are stored as arrays of shape ``(n_nodes, 2)``; flattened,
the degree of freedom of component ``c`` at node ``k`` is ``2 k + c``.
Scalar pressure fields live on the fluid vertices only.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .geometry import FLUID, SOLID, Mesh

# degree-5, 7-point rule on the reference triangle (barycentric, weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
QUAD_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
QUAD_W = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)

# 3-point Gauss-Legendre on [0, 1]
_gx, _gw = np.polynomial.legendre.leggauss(3)
EDGE_S = 0.5 * (_gx + 1.0)
EDGE_W = 0.5 * _gw

# local P2 nodes: vertices 0-2, then midpoints of edges (0,1), (1,2), (2,0)
EDGE_PAIRS = ((0, 1), (1, 2), (2, 0))


def p2_basis(bary):
    """P2 shape functions at barycentric points, shape (..., 6)."""
    L = np.asarray(bary)
    l0, l1, l2 = L[..., 0], L[..., 1], L[..., 2]
    return np.stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0],
        axis=-1,
    )


def p2_basis_dbary(bary):
    """Derivatives of the P2 shape functions w.r.t. the barycentrics, (..., 6, 3)."""
    L = np.asarray(bary)
    out = np.zeros(L.shape[:-1] + (6, 3))
    for k in range(3):
        out[..., k, k] = 4 * L[..., k] - 1
    for m, (i, j) in enumerate(EDGE_PAIRS):
        out[..., 3 + m, i] = 4 * L[..., j]
        out[..., 3 + m, j] = 4 * L[..., i]
    return out


_P2_HESS_BARY = np.zeros((6, 3, 3))
for _k in range(3):
    _P2_HESS_BARY[_k, _k, _k] = 4.0
for _m, (_i, _j) in enumerate(EDGE_PAIRS):
    _P2_HESS_BARY[3 + _m, _i, _j] = 4.0
    _P2_HESS_BARY[3 + _m, _j, _i] = 4.0


class P2Space:
    """Continuous P2 Lagrange space over the whole mesh (fluid and solid).

    Besides the dof numbering this caches the element quadrature tables used
    everywhere else: physical quadrature points, weights, basis gradients and
    the (element-wise constant) basis Hessians.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        el = mesh.elements
        nv = mesh.n_nodes
        edges = np.sort(np.stack([el[:, [i, j]] for i, j in EDGE_PAIRS], axis=1), axis=2)
        uniq, inv = np.unique(edges.reshape(-1, 2), axis=0, return_inverse=True)
        self.edges = uniq
        self.n_vertices = nv
        self.n_nodes = nv + len(uniq)
        self.dofmap = np.hstack([el, nv + inv.reshape(-1, 3)])
        mid = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
        self.coords = np.vstack([mesh.nodes, mid])

        edge_index = {tuple(e): nv + k for k, e in enumerate(uniq)}
        self.outer_midpoints = np.array(
            [edge_index[tuple(sorted(f))] for f in mesh.outer_facets], dtype=np.int64
        )
        self.interface_midpoints = np.array(
            [edge_index[tuple(sorted(f))] for f in mesh.interface_facets], dtype=np.int64
        )
        bnd = np.zeros(self.n_nodes, dtype=bool)
        bnd[mesh.outer_facets.ravel()] = True
        bnd[self.outer_midpoints] = True
        self.boundary = bnd

        self.fluid_elements = np.flatnonzero(mesh.tags == FLUID)
        self.solid_elements = np.flatnonzero(mesh.tags == SOLID)
        self.fluid_nodes = np.zeros(self.n_nodes, dtype=bool)
        self.fluid_nodes[self.dofmap[self.fluid_elements].ravel()] = True

        # element geometry
        p = mesh.nodes[el]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns = edges
        self.det_j = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        self.areas = 0.5 * self.det_j
        Jinv = np.linalg.inv(J)
        # grad(lambda_1), grad(lambda_2) are rows of J^{-1}
        g12 = Jinv
        self.grad_bary = np.concatenate([-(g12[:, 0] + g12[:, 1])[:, None], g12], axis=1)  # (m,3,2)

        self.qbary = QUAD_BARY
        self.nq = len(QUAD_W)
        self.qpoints = np.einsum("qk,mkd->mqd", QUAD_BARY, p)
        self.qweights = self.areas[:, None] * QUAD_W[None, :]
        self.phi = p2_basis(QUAD_BARY)  # (nq, 6)
        dphi = p2_basis_dbary(QUAD_BARY)  # (nq, 6, 3)
        self.grad_phi = np.einsum("qak,mkd->mqad", dphi, self.grad_bary)  # (m,nq,6,2)
        self.hess_phi = np.einsum("akl,mkd,mle->made", _P2_HESS_BARY, self.grad_bary, self.grad_bary)

    # -- evaluation ------------------------------------------------------

    def interpolate(self, fn, ncomp=2):
        """Nodal interpolant of ``fn(points) -> (n, ncomp)``."""
        vals = np.asarray(fn(self.coords), dtype=float)
        return vals.reshape(self.n_nodes, ncomp) if ncomp > 1 else vals.reshape(self.n_nodes)

    def eval_qp(self, coeffs, elements=None):
        """Value, gradient and Hessian of a P2 field at quadrature points.

        Returns arrays of shape ``(m, nq, c)``, ``(m, nq, c, 2)`` and
        ``(m, nq, c, 2, 2)`` for ``coeffs`` of shape ``(n_nodes, c)``.
        Scalar fields are promoted to ``c = 1``.
        """
        el = slice(None) if elements is None else elements
        u = np.asarray(coeffs, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        loc = u[self.dofmap[el]]  # (m, 6, c)
        val = np.einsum("qa,mac->mqc", self.phi, loc)
        grad = np.einsum("mqad,mac->mqcd", self.grad_phi[el], loc)
        hess = np.einsum("made,mac->mcde", self.hess_phi[el], loc)
        hess = np.broadcast_to(hess[:, None], grad.shape[:3] + (2, 2))
        return val, grad, hess

    def barycentric(self, elements, points):
        p0 = self.mesh.nodes[self.mesh.elements[elements, 0]]
        rel = np.asarray(points) - p0
        l12 = np.einsum("mkd,md->mk", self.grad_bary[elements][:, 1:], rel)
        return np.column_stack([1.0 - l12.sum(axis=1), l12])

    def eval_points(self, coeffs, elements, points):
        """Value and gradient of a P2 field at points inside given elements."""
        u = np.asarray(coeffs, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        bary = self.barycentric(elements, points)
        phi = p2_basis(bary)
        dphi = np.einsum("pak,pkd->pad", p2_basis_dbary(bary), self.grad_bary[elements])
        loc = u[self.dofmap[elements]]
        return np.einsum("pa,pac->pc", phi, loc), np.einsum("pad,pac->pcd", dphi, loc)

    def facet_quadrature(self, facets):
        """Gauss points, weights and positions along a set of vertex-pair facets."""
        p0 = self.mesh.nodes[facets[:, 0]]
        p1 = self.mesh.nodes[facets[:, 1]]
        pts = p0[:, None, :] + EDGE_S[None, :, None] * (p1 - p0)[:, None, :]
        lengths = np.linalg.norm(p1 - p0, axis=1)
        return pts, lengths[:, None] * EDGE_W[None, :]

    # -- assembly --------------------------------------------------------

    def vector_dofs(self, elements=None):
        dm = self.dofmap if elements is None else self.dofmap[elements]
        return (2 * dm[:, :, None] + np.arange(2)).reshape(len(dm), 12)

    def assemble_vector_matrix(self, local, elements):
        """Assemble (m, 12, 12) local blocks into a sparse (2n, 2n) matrix."""
        dofs = self.vector_dofs(elements)
        rows = np.repeat(dofs, 12, axis=1).ravel()
        cols = np.tile(dofs, (1, 12)).ravel()
        n = 2 * self.n_nodes
        return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    def assemble_vector_load(self, local, elements):
        """Assemble (m, 12) local load vectors into a flat (2n,) vector."""
        dofs = self.vector_dofs(elements)
        return np.bincount(dofs.ravel(), weights=local.ravel(), minlength=2 * self.n_nodes)

    def assemble_scalar_matrix(self, local, elements):
        dm = self.dofmap[elements]
        rows = np.repeat(dm, 6, axis=1).ravel()
        cols = np.tile(dm, (1, 6)).ravel()
        return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(self.n_nodes,) * 2).tocsr()

    @cached_property
    def scalar_mass(self):
        w = self.qweights
        local = np.einsum("mq,qa,qb->mab", w, self.phi, self.phi)
        return self.assemble_scalar_matrix(local, np.arange(self.mesh.n_elements))

    @cached_property
    def scalar_stiffness(self):
        local = np.einsum("mq,mqad,mqbd->mab", self.qweights, self.grad_phi, self.grad_phi)
        return self.assemble_scalar_matrix(local, np.arange(self.mesh.n_elements))

    def vector_mass(self, elements=None):
        if elements is None:
            elements = np.arange(self.mesh.n_elements)
        m = np.einsum("mq,qa,qb->mab", self.qweights[elements], self.phi, self.phi)
        local = np.einsum("mab,ij->maibj", m, np.eye(2)).reshape(len(elements), 12, 12)
        return self.assemble_vector_matrix(local, elements)

    def project(self, values_qp, elements=None, ncomp=2):
        """L2 projection onto the (unconstrained) P2 space.

        ``values_qp`` holds the target at the quadrature points of
        ``elements`` (default: all), shape ``(m, nq, ncomp)``; elements not
        listed contribute zero.
        """
        if elements is None:
            elements = np.arange(self.mesh.n_elements)
        v = np.asarray(values_qp, dtype=float).reshape(len(elements), self.nq, ncomp)
        local = np.einsum("mq,qa,mqc->mac", self.qweights[elements], self.phi, v)
        rhs = np.zeros((self.n_nodes, ncomp))
        for c in range(ncomp):
            rhs[:, c] = np.bincount(
                self.dofmap[elements].ravel(), weights=local[:, :, c].ravel(), minlength=self.n_nodes
            )
        from scipy.sparse.linalg import splu

        lu = splu(self.scalar_mass.tocsc())
        out = np.column_stack([lu.solve(rhs[:, c]) for c in range(ncomp)])
        return out if ncomp > 1 else out[:, 0]


class FluidP1Space:
    """Continuous P1 space on the fluid vertices (pressure-type fields)."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.elements_idx = np.flatnonzero(mesh.tags == FLUID)
        verts = np.unique(mesh.elements[self.elements_idx])
        self.vertices = verts
        self.index = np.full(mesh.n_nodes, -1, dtype=np.int64)
        self.index[verts] = np.arange(len(verts))
        self.n = len(verts)
        self.dofmap = self.index[mesh.elements[self.elements_idx]]
        self.coords = mesh.nodes[verts]
        iface = np.unique(mesh.interface_facets)
        self.interface_dofs = self.index[iface]

    def interpolate(self, fn):
        return np.asarray(fn(self.coords), dtype=float).reshape(self.n)

    def eval_qp(self, space: P2Space, q):
        """Values and gradients at the quadrature points of the fluid elements."""
        loc = np.asarray(q)[self.dofmap]  # (mf, 3)
        val = np.einsum("qk,mk->mq", QUAD_BARY, loc)
        grad = np.einsum("mkd,mk->md", space.grad_bary[self.elements_idx], loc)
        return val, np.broadcast_to(grad[:, None, :], val.shape + (2,))

    def _assemble(self, local):
        dm = self.dofmap
        rows = np.repeat(dm, 3, axis=1).ravel()
        cols = np.tile(dm, (1, 3)).ravel()
        return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(self.n, self.n)).tocsr()

    def stiffness(self, space: P2Space):
        g = space.grad_bary[self.elements_idx]
        local = space.areas[self.elements_idx, None, None] * np.einsum("mad,mbd->mab", g, g)
        return self._assemble(local)

    def mass(self, space: P2Space):
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
        local = space.areas[self.elements_idx, None, None] * ref[None]
        return self._assemble(local)

    def load(self, space: P2Space, values_qp):
        """``(f, psi)`` for ``f`` given at fluid quadrature points, shape (mf, nq)."""
        w = space.qweights[self.elements_idx]
        local = np.einsum("mq,qk,mq->mk", w, QUAD_BARY, values_qp)
        return np.bincount(self.dofmap.ravel(), weights=local.ravel(), minlength=self.n)

    def flux_load(self, space: P2Space, vectors_qp):
        """``(G, grad psi)`` for a vector field ``G`` at fluid quadrature points."""
        w = space.qweights[self.elements_idx]
        g = space.grad_bary[self.elements_idx]
        local = np.einsum("mq,mqd,mkd->mk", w, vectors_qp, g)
        return np.bincount(self.dofmap.ravel(), weights=local.ravel(), minlength=self.n)

    def project(self, space: P2Space, values_qp):
        from scipy.sparse.linalg import spsolve

        return spsolve(self.mass(space).tocsc(), self.load(space, values_qp))

    def to_vertices(self, q, fill=np.nan):
        """Expand to all mesh vertices, filling non-fluid vertices."""
        out = np.full(self.mesh.n_nodes, fill, dtype=float)
        out[self.vertices] = q
        return out
