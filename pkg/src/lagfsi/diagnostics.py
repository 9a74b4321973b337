"""Run-time monitors: energy ledger, divergence residual, discrete norms,
the data size N(u0, f), the collision margin and difference quotients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import AnalyticField
from .fem import P2Space
from .kinematics import a_divergence

LEDGER_COLUMNS = (
    "step",
    "t",
    "kinetic",
    "elastic",
    "viscous_dissipation",
    "penalty_dissipation",
    "offset_work",
    "external_work",
    "defect",
    "div_residual",
    "min_det",
)


def _acc(values, deterministic):
    return math.fsum(values) if deterministic else float(np.sum(values))


@dataclass
class EnergyLedger:
    """Per-step energy accounts.

    ``kinetic`` and ``elastic`` are instantaneous; the dissipation and work
    columns are cumulative from t = 0.  The per-step ``defect`` is

        (external + offset work) - (change of kinetic + elastic energy)
        - (viscous + penalty dissipation)

    over the step, i.e. the energy removed by the time integrator itself.
    It is nonnegative for backward Euler and zero for implicit midpoint.
    """

    deterministic: bool = True
    rows: list = field(default_factory=list)
    _increments: dict = field(default_factory=lambda: {k: [] for k in ("viscous", "penalty", "offset", "external", "defect")})

    def start(self, t0: float, kinetic: float, elastic: float = 0.0):
        self.rows = [dict(step=0, t=t0, kinetic=kinetic, elastic=elastic, viscous_dissipation=0.0,
                          penalty_dissipation=0.0, offset_work=0.0, external_work=0.0, defect=0.0,
                          div_residual=float("nan"), min_det=1.0)]
        for v in self._increments.values():
            v.clear()
        return self

    @property
    def initial_energy(self):
        return self.rows[0]["kinetic"] + self.rows[0]["elastic"]

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def total_defect(self):
        return _acc(self._increments["defect"], self.deterministic)

    def telescoping_gap(self):
        """Sum of defects minus (work - final energy - dissipation + initial energy)."""
        last = self.rows[-1]
        rhs = (last["external_work"] + last["offset_work"] - last["kinetic"] - last["elastic"]
               - last["viscous_dissipation"] - last["penalty_dissipation"] + self.initial_energy)
        return self.total_defect() - rhs

    def to_csv(self, path, config_hash: str | None = None):
        with open(path, "w") as fh:
            if config_hash:
                fh.write(f"# config_hash={config_hash}\n")
            fh.write(",".join(LEDGER_COLUMNS) + "\n")
            for r in self.rows:
                fh.write(",".join(_fmt(r[c]) for c in LEDGER_COLUMNS) + "\n")


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def update_energy_ledger(ledger: EnergyLedger, record) -> EnergyLedger:
    """Append one step record (see :class:`lagfsi.stepper.StepRecord`)."""
    prev = ledger.rows[-1]
    inc = ledger._increments
    inc["viscous"].append(record.viscous)
    inc["penalty"].append(record.penalty)
    inc["offset"].append(record.offset_work)
    inc["external"].append(record.external_work)
    d_energy = (record.kinetic - prev["kinetic"]) + (record.elastic - prev["elastic"])
    defect = math.fsum([record.external_work, record.offset_work, -d_energy, -record.viscous, -record.penalty])
    inc["defect"].append(defect)
    det = ledger.deterministic
    ledger.rows.append(dict(
        step=prev["step"] + 1,
        t=record.t,
        kinetic=record.kinetic,
        elastic=record.elastic,
        viscous_dissipation=_acc(inc["viscous"], det),
        penalty_dissipation=_acc(inc["penalty"], det),
        offset_work=_acc(inc["offset"], det),
        external_work=_acc(inc["external"], det),
        defect=defect,
        div_residual=record.div_residual,
        min_det=record.min_det,
    ))
    return ledger


def ledger_from_trajectory(space: P2Space, trajectory, deterministic=True) -> EnergyLedger:
    M = space.vector_mass()
    w0 = trajectory.w[0].ravel()
    led = EnergyLedger(deterministic).start(trajectory.times[0], 0.5 * float(w0 @ (M @ w0)))
    for rec in trajectory.records:
        update_energy_ledger(led, rec)
    return led


def divergence_residual(space: P2Space, w, a=None) -> float:
    """``|| a^k_i w^i,_k ||_{L2(fluid)}`` by quadrature."""
    fe = space.fluid_elements
    _, gw, _ = space.eval_qp(w, fe)
    div = np.trace(gw, axis1=-2, axis2=-1) if a is None else a_divergence(a, gw)
    return float(np.sqrt(np.sum(space.qweights[fe] * div**2)))


# -- collision margin ---------------------------------------------------------


@dataclass
class CollisionReport:
    times: np.ndarray
    margin: np.ndarray
    flagged: bool
    first_time: float | None


def collision_margin(times, speeds, separation: float) -> CollisionReport:
    """``margin(t) = d/2 - int_0^t max|v|`` by the trapezoid rule.

    ``speeds`` is either the sampled sup-norm ``(N + 1,)`` or a velocity
    history ``(N + 1, n_nodes, 2)``, in which case the max is over nodes.
    The flag trips at the first sample where the margin is <= 0.
    """
    times = np.asarray(times, dtype=float)
    s = np.asarray(speeds, dtype=float)
    if s.ndim == 3:
        s = np.max(np.linalg.norm(s, axis=2), axis=1)
    inc = 0.5 * np.diff(times) * (s[1:] + s[:-1])
    margin = 0.5 * separation - np.concatenate([[0.0], np.cumsum(inc)])
    hit = np.flatnonzero(margin <= 0.0)
    first = float(times[hit[0]]) if len(hit) else None
    return CollisionReport(times, margin, bool(len(hit)), first)


def fluid_speed_history(space: P2Space, velocities):
    """Max |v| over fluid nodes (vertices and edge midpoints) at each sample."""
    v = np.asarray(velocities)[:, space.fluid_nodes]
    return np.max(np.linalg.norm(v, axis=2), axis=1) if v.shape[1] else np.zeros(len(v))


# -- difference quotients -----------------------------------------------------


class ChartDomainError(ValueError):
    pass


def difference_quotient(u, points, h, order: int = 1, chart=None):
    """``D_h u = (u(x+h) - u(x))/|h|`` or ``D_-h D_h u = (u(x+h) + u(x-h) - 2u(x))/|h|^2``.

    ``u`` is a callable on arrays of points.  With a ``chart`` (a
    :class:`lagfsi.geometry.LocalChart`), ``points`` are chart coordinates,
    ``h`` must be tangential (zero in the last coordinate) and every shifted
    point has to stay inside the chart.
    """
    x = np.asarray(points, dtype=float)
    h = np.asarray(h, dtype=float)
    nh = float(np.linalg.norm(h))
    if nh == 0.0:
        raise ValueError("offset h must be nonzero")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    shifted = [x + h] if order == 1 else [x + h, x - h]
    if chart is not None:
        if abs(h[-1]) > 1e-14 * nh:
            raise ValueError("offset must be tangential to the straightened interface")
        for s in shifted + [x]:
            if not np.all(chart.contains(s)):
                raise ChartDomainError("shifted point outside chart")
    u0 = np.asarray(u(x), dtype=float)
    if order == 1:
        return (np.asarray(u(x + h), dtype=float) - u0) / nh
    return (np.asarray(u(x + h), dtype=float) + np.asarray(u(x - h), dtype=float) - 2.0 * u0) / nh**2


# -- discrete norms -----------------------------------------------------------


class FieldNorms:
    """Squared Sobolev-type norms of P2 fields restricted to element sets.

    ``h1`` is exact for P2 fields; ``h2`` uses element-wise (broken)
    Hessians, which is what a C0 P2 field supports.
    """

    def __init__(self, space: P2Space):
        self.space = space
        all_el = np.arange(space.mesh.n_elements)
        self.sets = {"all": all_el, "fluid": space.fluid_elements, "solid": space.solid_elements}

    def sq(self, u, order: int, where: str = "all") -> float:
        el = self.sets[where]
        if len(el) == 0:
            return 0.0
        val, grad, hess = self.space.eval_qp(u, el)
        w = self.space.qweights[el]
        total = np.sum(w * np.sum(val**2, axis=-1))
        if order >= 1:
            total += np.sum(w * np.sum(grad**2, axis=(-2, -1)))
        if order >= 2:
            total += np.sum(w * np.sum(hess**2, axis=(-3, -2, -1)))
        return float(total)


# Summands of the velocity norms, with the surrogate used for each.  H3 has
# no meaning for a C0 P2 field; those entries use the broken H2 norm.
X_SUMMANDS = (
    ("u|L2(H1)", "u", 1, "all", "L2", None),
    ("u|L2(H3,fluid)", "u", 2, "fluid", "L2", "broken-H2 in place of H3"),
    ("u_t|L2(H2,fluid)", "u_t", 2, "fluid", "L2", "broken-H2"),
    ("int u|L2(H3,solid)", "d", 2, "solid", "L2", "broken-H2 in place of H3"),
    ("u|L2(H2,solid)", "u", 2, "solid", "L2", "broken-H2"),
    ("u_t|L2(H1,solid)", "u_t", 1, "solid", "L2", None),
    ("u_tt|L2(H1,fluid)", "u_tt", 1, "fluid", "L2", None),
)
W_EXTRA_SUMMANDS = (
    ("u_tt|Linf(L2)", "u_tt", 0, "all", "Linf", None),
    ("int u|Linf(H3,solid)", "d", 2, "solid", "Linf", "broken-H2 in place of H3"),
    ("u|Linf(H2,solid)", "u", 2, "solid", "Linf", "broken-H2"),
    ("u_t|Linf(H1,solid)", "u_t", 1, "solid", "Linf", None),
)


@dataclass
class NormTracker:
    x_summands: dict = field(default_factory=dict)
    w_summands: dict = field(default_factory=dict)
    surrogates: dict = field(default_factory=dict)
    n_data_sq: float | None = None

    @property
    def x_norm_sq(self):
        return math.fsum(self.x_summands.values())

    @property
    def w_norm_sq(self):
        return self.x_norm_sq + math.fsum(self.w_summands.values())


def _time_derivatives(times, u):
    """First and second time derivatives by (second-order) finite differences."""
    if len(times) < 2:
        z = np.zeros_like(u)
        return z, z
    ut = np.gradient(u, times, axis=0, edge_order=2 if len(times) > 2 else 1)
    utt = np.gradient(ut, times, axis=0, edge_order=2 if len(times) > 2 else 1)
    return ut, utt


def trapezoid(times, values, deterministic=True):
    times = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(times) == 1:
        return 0.0
    parts = 0.5 * np.diff(times) * (v[1:] + v[:-1])
    return math.fsum(parts) if deterministic else float(parts.sum())


def norm_tracker_update(tracker: NormTracker, space: P2Space, times, u, d=None) -> NormTracker:
    """Fill the summands of the discrete velocity norms from a sampled trajectory.

    ``u`` has shape ``(N + 1, n_nodes, 2)``; ``d`` (the running time
    integral of ``u``) is rebuilt by the trapezoid rule when omitted.
    """
    times = np.asarray(times, dtype=float)
    u = np.asarray(u, dtype=float)
    if d is None:
        d = np.zeros_like(u)
        for n in range(1, len(times)):
            d[n] = d[n - 1] + 0.5 * (times[n] - times[n - 1]) * (u[n] + u[n - 1])
    ut, utt = _time_derivatives(times, u)
    series = {"u": u, "u_t": ut, "u_tt": utt, "d": d}
    fn = FieldNorms(space)
    cache = {}

    def samples(key, order, where):
        k = (key, order, where)
        if k not in cache:
            cache[k] = np.array([fn.sq(f, order, where) for f in series[key]])
        return cache[k]

    for target, table in ((tracker.x_summands, X_SUMMANDS), (tracker.w_summands, W_EXTRA_SUMMANDS)):
        for name, key, order, where, kind, note in table:
            s = samples(key, order, where)
            target[name] = trapezoid(times, s) if kind == "L2" else float(np.max(s))
            if note:
                tracker.surrogates[name] = note
    return tracker


def n_data_sq(u0: AnalyticField, forcing: AnalyticField, space: P2Space, T: float, n_time: int = 8) -> float:
    """``N(u0, f)^2`` evaluated with the exact derivatives of the closed-form data.

    Spatial integrals use the element quadrature of ``space``; time
    integrals use Gauss-Legendre with ``n_time`` points on ``[0, T]``.
    """
    fe, se = space.fluid_elements, space.solid_elements
    xf, wf = space.qpoints[fe], space.qweights[fe]
    xs, ws = space.qpoints[se], space.qweights[se]
    xa, wa = space.qpoints, space.qweights
    s = 1.0
    s += u0.sobolev_sq(xf, wf, 5)
    if len(se):
        s += u0.sobolev_sq(xs, ws, 2)
    s += forcing.sobolev_sq(xa, wa, 3, 0.0)
    gx, gw = np.polynomial.legendre.leggauss(n_time)
    tq = 0.5 * T * (gx + 1.0)
    tw = 0.5 * T * gw
    for t, wt in zip(tq, tw):
        s += wt * forcing.sobolev_sq(xa, wa, 2, t)
        s += wt * forcing.sobolev_sq(xa, wa, 1, t, nt=1)
        s += wt * forcing.sobolev_sq(xa, wa, 0, t, nt=2)
    return s**4


def a_tt_l3(states, space: P2Space) -> float:
    """``max_t || a_tt ||_{L3(fluid)}`` over the step midpoints (logged only)."""
    w = space.qweights[space.fluid_elements]
    best = 0.0
    for st in states:
        if st.a_tt is None:
            continue
        mag = np.linalg.norm(st.a_tt, axis=(-2, -1))
        best = max(best, float(np.sum(w * mag**3) ** (1.0 / 3.0)))
    return best
