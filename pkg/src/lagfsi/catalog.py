"""Closed-form space-time vector fields used for forcing and initial data.

Fields are defined symbolically (sympy) over all of R^2 and lambdified to
numpy, so every derivative that the initial-data construction needs is
exact.  The named catalogs at the bottom are what configuration files
refer to.
"""

from __future__ import annotations

import itertools

import numpy as np
import sympy as sp

X, Y, T = sp.symbols("x y t", real=True)
_VARS = (X, Y)


class AnalyticField:
    """Vector field ``f(x, t)`` given by two sympy expressions.

    All evaluators take points of shape ``(n, 2)`` and a scalar time.
    Derivative arrays put the component index first, then the spatial
    derivative indices in order: ``grad[p, i, k] = d_k f^i``.
    """

    def __init__(self, exprs, name="field"):
        self.exprs = tuple(sp.sympify(e) for e in exprs)
        if len(self.exprs) != 2:
            raise ValueError("expected two components")
        self.name = name
        self._cache = {}

    def __repr__(self):
        return f"AnalyticField({self.name}: {self.exprs})"

    @property
    def is_zero(self) -> bool:
        return all(e == 0 for e in self.exprs)

    def _fn(self, comp, spatial=(), nt=0):
        key = (comp, spatial, nt)
        if key not in self._cache:
            e = self.exprs[comp]
            for k in spatial:
                e = sp.diff(e, _VARS[k])
            if nt:
                e = sp.diff(e, T, nt)
            self._cache[key] = sp.lambdify((X, Y, T), e, "numpy")
        return self._cache[key]

    def _eval(self, comp, points, t, spatial=(), nt=0):
        p = np.asarray(points, dtype=float)
        out = self._fn(comp, spatial, nt)(p[..., 0], p[..., 1], float(t))
        return np.broadcast_to(np.asarray(out, dtype=float), p.shape[:-1])

    def derivative(self, points, t=0.0, order=0, nt=0):
        """All spatial derivatives of a given order as a tensor.

        Shape ``points.shape[:-1] + (2,) + (2,) * order``.
        """
        p = np.asarray(points, dtype=float)
        out = np.empty(p.shape[:-1] + (2,) + (2,) * order)
        for comp in range(2):
            for idx in itertools.product(range(2), repeat=order):
                # mixed partials commute; reuse the sorted index
                out[(Ellipsis, comp) + idx] = self._eval(comp, p, t, tuple(sorted(idx)), nt)
        return out

    def value(self, points, t=0.0):
        return self.derivative(points, t, 0)

    def grad(self, points, t=0.0):
        return self.derivative(points, t, 1)

    def hess(self, points, t=0.0):
        return self.derivative(points, t, 2)

    def laplacian(self, points, t=0.0):
        h = self.hess(points, t)
        return h[..., 0, 0] + h[..., 1, 1]

    def div(self, points, t=0.0):
        g = self.grad(points, t)
        return g[..., 0, 0] + g[..., 1, 1]

    def time_derivative(self, points, t=0.0, order=1, spatial_order=0):
        return self.derivative(points, t, spatial_order, nt=order)

    def at_time(self, t):
        """Frozen-in-time copy (useful for u0-type fields)."""
        return AnalyticField([e.subs(T, t) for e in self.exprs], f"{self.name}@t={t}")

    def __call__(self, points, t=0.0):
        return self.value(points, t)

    # Sobolev-type integrals by quadrature ------------------------------

    def seminorm_sq(self, points, weights, order, t=0.0, nt=0):
        """``sum_q w_q |D^order f|^2`` (Frobenius over all ordered index tuples)."""
        D = self.derivative(points, t, order, nt)
        axes = tuple(range(D.ndim - order - 1, D.ndim))
        return float(np.sum(np.asarray(weights) * np.sum(D**2, axis=axes)))

    def sobolev_sq(self, points, weights, k, t=0.0, nt=0):
        """Squared ``H^k`` norm: sum of seminorms of orders ``0..k``."""
        return sum(self.seminorm_sq(points, weights, j, t, nt) for j in range(k + 1))


def zero_field():
    return AnalyticField((0, 0), "zero")


def _stream(psi, name):
    return AnalyticField((sp.diff(psi, Y), -sp.diff(psi, X)), name)


# forcing catalog: name -> factory(amplitude) ---------------------------


def _ramp_swirl(amplitude=1.0):
    """``t * A * (-y, x + 1/2)``: rotational push plus a uniform drift."""
    return AnalyticField((-amplitude * T * Y, amplitude * T * (X + sp.Rational(1, 2))), "ramp_swirl")


def _ramp_gradient(amplitude=1.0):
    """``t * A * grad((x^2 + y^2 - 0.16) x)``: a pure-gradient ramp."""
    q = (X**2 + Y**2 - sp.Rational(4, 25)) * X
    return AnalyticField((amplitude * T * sp.diff(q, X), amplitude * T * sp.diff(q, Y)), "ramp_gradient")


def _constant(amplitude=1.0):
    return AnalyticField((amplitude, 0), "constant")


def _pulse(amplitude=1.0):
    """Smooth start-up ``A sin(pi t)^2 (-y, x)``; f and f_t vanish at t = 0."""
    s = amplitude * sp.sin(sp.pi * T) ** 2
    return AnalyticField((-s * Y, s * X), "pulse")


FORCING_CATALOG = {
    "zero": lambda amplitude=1.0: zero_field(),
    "constant": _constant,
    "ramp_swirl": _ramp_swirl,
    "ramp_gradient": _ramp_gradient,
    "pulse": _pulse,
}


# initial velocity catalog ------------------------------------------------


def _stream_bump(amplitude=1.0):
    """Divergence-free swirl vanishing on the unit circle (not interface-compatible)."""
    r2 = X**2 + Y**2
    return _stream(amplitude * (1 - r2) ** 2 * (1 + X) / 4, "stream_bump")


INITIAL_CATALOG = {
    "zero": lambda amplitude=1.0: zero_field(),
    "stream_bump": _stream_bump,
}


def lookup(catalog: dict, name: str, amplitude: float = 1.0) -> AnalyticField:
    try:
        factory = catalog[name]
    except KeyError:
        raise KeyError(f"unknown catalog entry {name!r}; choose from {sorted(catalog)}") from None
    return factory(amplitude)
