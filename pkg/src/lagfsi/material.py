"""Constitutive laws: simplified Newtonian fluid stress and linear elasticity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MaterialParams:
    """Viscosity ``nu`` and Lame constants ``lam``, ``mu`` (all > 0)."""

    nu: float = 1.0
    lam: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        bad = [k for k in ("nu", "lam", "mu") if not getattr(self, k) > 0]
        if bad:
            raise ValueError("material parameters must be positive: " + ", ".join(bad))


def fluid_stress(grad_u, p, params: MaterialParams, mode: str = "grad"):
    """Fluid Cauchy stress ``nu grad_u - p I`` (or ``nu (grad_u + grad_u^T) - p I``).

    ``grad_u`` may be a stack ``(..., d, d)`` with ``p`` broadcastable to
    the leading shape.
    """
    g = np.asarray(grad_u, dtype=float)
    d = g.shape[-1]
    if mode == "grad":
        visc = params.nu * g
    elif mode == "def":
        visc = params.nu * (g + np.swapaxes(g, -1, -2))
    else:
        raise ValueError(f"unknown constitutive mode {mode!r}")
    return visc - np.asarray(p, dtype=float)[..., None, None] * np.eye(d)


def elasticity_tensor(params: MaterialParams, dim: int = 2) -> np.ndarray:
    """``c[i,j,k,l] = lam d_ij d_kl + mu (d_ik d_jl + d_il d_jk)``."""
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    I = np.eye(dim)
    return params.lam * np.einsum("ij,kl->ijkl", I, I) + params.mu * (
        np.einsum("ik,jl->ijkl", I, I) + np.einsum("il,jk->ijkl", I, I)
    )


def elastic_stress(grad_d, params: MaterialParams):
    """``sigma = c : grad_d = lam tr(grad_d) I + mu (grad_d + grad_d^T)``."""
    g = np.asarray(grad_d, dtype=float)
    d = g.shape[-1]
    tr = np.trace(g, axis1=-2, axis2=-1)
    return params.lam * tr[..., None, None] * np.eye(d) + params.mu * (g + np.swapaxes(g, -1, -2))


# name used by the operation list
elastic_stress_from_displacement_gradient = elastic_stress


def elastic_energy_density(grad_d, params: MaterialParams):
    """``1/2 c^{ijkl} d^k,_l d^i,_j``."""
    g = np.asarray(grad_d, dtype=float)
    return 0.5 * np.einsum("...ij,...ij->...", elastic_stress(g, params), g)
