"""Hybrid versus fully atomistic solutions under grid refinement.

Run with ``python demos/convergence_study.py``.
"""
import numpy as np

from latstab.lattice import Grid, triangular_lattice
from latstab.models import HarmonicTriangular, LJTriangular, cell_average
from latstab.solver import EquilibriumProblem, convergence_study, fourier_load, solve_equilibrium

load = fourier_load([(0, (1, 0), 1.0), (1, (1, 1), 0.5, 0.3)])

# %% One solve, to see the pieces
grid = Grid(triangular_lattice(), 16)
f = cell_average(load, grid)
sol = solve_equilibrium(EquilibriumProblem(LJTriangular(), grid, f, scheme="hybrid"))
print(f"N = 16: residual {sol.residual_norm:.2e}, max |u| = {np.abs(sol.u).max():.4e}")

# %% Error table
for model in (HarmonicTriangular(), LJTriangular()):
    table = convergence_study(model, load, (8, 16, 32, 64))
    print(f"\n{model.name}")
    print(f"{'N':>4} {'e_l2':>12} {'e_h1':>12} {'e_h2':>12}")
    for r in table.rows:
        print(f"{r['N']:>4} {r['e_l2']:12.4e} {r['e_h1']:12.4e} {r['e_h2']:12.4e}")
    print("ratios:", [round(q, 3) for q in table.ratios], " fitted order:", round(table.fitted_order, 3))
