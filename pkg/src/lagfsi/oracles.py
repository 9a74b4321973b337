"""Independent reference computations used to cross-check the solver.

Each oracle avoids the code path it checks: dense factorization instead of
sparse iterative solves, exact symbolic integration over the simplex
instead of quadrature, and a dense generalized eigensolve instead of time
stepping.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import sympy as sp


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class OracleReport:
    name: str
    oracle: str
    computed: object
    target: object
    tolerance: float
    passed: bool
    metric: str = "abs"

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} | {self.name} | oracle={self.oracle} | computed={_short(self.computed)} | "
                f"target={_short(self.target)} | tol={self.tolerance:.3g} | metric={self.metric}")


def _short(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6g}"
    if isinstance(x, (list, tuple, np.ndarray)):
        a = np.asarray(x, dtype=float).ravel()
        if a.size <= 4:
            return "[" + ", ".join(f"{v:.4g}" for v in a) + "]"
        return f"<array {a.size}>"
    return str(x)


def compare(name, oracle, computed, target, tolerance, metric="abs") -> OracleReport:
    """Build a report; ``metric`` is 'abs' (max abs difference), 'rel' or 'le' (computed <= target)."""
    c = np.asarray(computed, dtype=float)
    t = np.asarray(target, dtype=float)
    if metric == "abs":
        ok = bool(np.all(np.abs(c - t) <= tolerance))
    elif metric == "rel":
        ok = bool(np.all(np.abs(c - t) <= tolerance * np.maximum(np.abs(t), 1e-300)))
    elif metric == "le":
        ok = bool(np.all(c <= t + tolerance))
    elif metric == "ge":
        ok = bool(np.all(c >= t - tolerance))
    else:
        raise ValueError(metric)
    return OracleReport(name, oracle, computed, target, tolerance, ok, metric)


# -- dense solve --------------------------------------------------------------------

DENSE_LIMIT = 5000


def dense_oracle_solve(A, b):
    """Solve ``A x = b`` by dense LU (at most 5000 unknowns)."""
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)
    A = np.atleast_2d(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] > DENSE_LIMIT:
        raise OracleError(f"system too large for the dense oracle ({A.shape[0]} > {DENSE_LIMIT})")
    try:
        with warnings.catch_warnings():
            # singularity is reported below as an OracleError
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    except ValueError as exc:
        raise OracleError(str(exc)) from exc
    if np.any(np.abs(np.diag(lu)) <= 1e-14 * max(1.0, np.abs(A).max())):
        raise OracleError("singular system")
    return scipy.linalg.lu_solve((lu, piv), b)


# -- symbolic element matrices -------------------------------------------------

_L = sp.symbols("l0 l1 l2")
FORMS = ("mass", "viscous-identity-a", "elastic", "penalty-identity-a")


def _monomial_integral(exps, area):
    a, b, c = exps
    return 2 * area * math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 2)


def _integrate(expr, area):
    poly = sp.Poly(sp.expand(expr), *_L)
    return float(sum(float(coef) * _monomial_integral(m, area) for m, coef in poly.terms()))


def _basis(degree):
    l0, l1, l2 = _L
    if degree == 1:
        return [l0, l1, l2]
    if degree == 2:
        return [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0]
    raise OracleError("degree must be 1 or 2")


def symbolic_element_oracle(vertices, form: str, degree: int = 2, nu=1.0, lam=1.0, mu=1.0, eps=1.0):
    """Exact element matrix of a bilinear form on one triangle.

    Integrals of barycentric monomials use ``int_T l0^a l1^b l2^c =
    2|T| a! b! c! / (a + b + c + 2)!``.  Scalar forms (``mass``) return a
    ``(k, k)`` matrix; vector forms return ``(2k, 2k)`` in the interleaved
    numbering ``2 * local_node + component``.
    """
    if form not in FORMS:
        raise OracleError(f"unknown form {form!r}; choose from {FORMS}")
    p = np.asarray(vertices, dtype=float)
    J = np.column_stack([p[1] - p[0], p[2] - p[0]])
    det = float(np.linalg.det(J))
    area = 0.5 * abs(det)
    if area <= 1e-14 * max(1.0, float(np.abs(p).max()) ** 2):
        raise OracleError("degenerate triangle")
    Jinv = np.linalg.inv(J)
    gl = np.vstack([-(Jinv[0] + Jinv[1]), Jinv])  # grad of barycentrics, (3, 2)
    N = _basis(degree)
    k = len(N)
    if form == "mass":
        return np.array([[_integrate(N[a] * N[b], area) for b in range(k)] for a in range(k)])
    dN = [[sum(sp.diff(N[a], _L[m]) * gl[m, d] for m in range(3)) for d in range(2)] for a in range(k)]
    out = np.zeros((2 * k, 2 * k))
    for a in range(k):
        for b in range(k):
            # the integrals needed are int dN_a[d] dN_b[e]
            G = np.array([[_integrate(dN[a][d] * dN[b][e], area) for e in range(2)] for d in range(2)])
            for i in range(2):
                for j in range(2):
                    if form == "viscous-identity-a":
                        v = nu * (G[0, 0] + G[1, 1]) * (i == j)
                    elif form == "penalty-identity-a":
                        v = G[i, j] / eps
                    else:
                        v = lam * G[i, j] + mu * ((G[0, 0] + G[1, 1]) * (i == j) + G[j, i])
                    out[2 * a + i, 2 * b + j] = v
    return out


# -- eigenmodes ------------------------------------------------------------------


def eigenmode_oracle(K, M, free=None):
    """Lowest generalized eigenpair of ``(K, M)`` by dense symmetric eigensolve.

    Returns ``(lambda_min, mode, period)`` with ``period = 2 pi / sqrt(lambda_min)``.
    ``free`` restricts to unconstrained dofs; the returned mode is padded
    back to full length.
    """
    Kd = K.toarray() if hasattr(K, "toarray") else np.atleast_2d(np.asarray(K, dtype=float))
    Md = M.toarray() if hasattr(M, "toarray") else np.atleast_2d(np.asarray(M, dtype=float))
    n = Kd.shape[0]
    idx = np.arange(n) if free is None else np.asarray(free)
    if len(idx) > DENSE_LIMIT:
        raise OracleError("system too large for the dense oracle")
    vals, vecs = scipy.linalg.eigh(Kd[np.ix_(idx, idx)], Md[np.ix_(idx, idx)], subset_by_index=[0, 0])
    lam = float(vals[0])
    mode = np.zeros(n)
    mode[idx] = vecs[:, 0]
    return lam, mode, 2 * math.pi / math.sqrt(lam)
