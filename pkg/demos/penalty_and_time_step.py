"""How the two discretization knobs show up in the diagnostics.

The penalty parameter eps controls how far the fluid velocity is from
satisfying the (Lagrangian) incompressibility constraint: the residual
shrinks like eps.  The time step controls the energy that backward Euler
removes on its own, which shrinks like dt.
"""

from lagfsi import load_reference, setup_problem
from lagfsi.pipeline import dt_sweep, eps_sweep, loglog_slope

prob = setup_problem(load_reference())

rows = eps_sweep(prob)
print("eps        ||a:grad w||_L2(fluid) at T")
for r in rows:
    print(f"{r['eps']:<10.0e} {r['div_residual']:.4e}")
print(f"log-log slope {loglog_slope([r['eps'] for r in rows], [r['div_residual'] for r in rows]):.3f}\n")

rows = dt_sweep(prob)
print("dt         total numerical dissipation")
for r in rows:
    print(f"{r['dt']:<10g} {r['total_defect']:.4e}")
for a, b in zip(rows, rows[1:]):
    print(f"ratio dt={a['dt']:g} -> {b['dt']:g}: {a['total_defect'] / b['total_defect']:.3f}")
