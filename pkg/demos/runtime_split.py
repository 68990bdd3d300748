"""
Where does the time go?
=======================

Generalized Rosenbrock, solved without sketching for a short budget of
3(d+1) evaluations. As d grows, building the interpolation model (the
d x d factorisation plus the solve against every residual) dominates the
runtime.
"""

from sketchdfo.cli import scaling_rows
from sketchdfo.instrument import TASKS

rows = scaling_rows([25, 50, 100, 200], [("none", "d", 1)], budget=3)

print(f"{'d':>5}{'total s':>10}  " + "".join(f"{k:>13}" for k in TASKS))
for row in rows:
    shares = "".join(f"{row[k] / row['total_s']:>13.1%}" for k in TASKS)
    print(f"{row['d']:>5}{row['total_s']:>10.3f}  {shares}")

print("\nshare of interp_solve + model_build:")
for row in rows:
    print(f"  d={row['d']:<4} {row['model_fraction']:.2f}")
