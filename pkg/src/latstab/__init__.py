"""
Stability of atomistic/continuum interfaces on lattices.

Submodules
----------
lattice
    Bravais lattices, periodic grids, difference operators, DFT and norms.
models
    Stencils, harmonic and Lennard-Jones models, pair-potential forces.
fold
    Folding a two-region interface into a half-space system.
stability
    Characteristic roots, bulk and boundary stability checks, reports.
solver
    Periodic equilibrium solves and convergence studies.
cli
    Command-line entry point.

Submodules load on first attribute access, so ``latstab.cli`` can set
thread counts before numpy is imported.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = ("lattice", "models", "fold", "stability", "solver", "cli")

_EXPORTS = {
    "Lattice": "lattice",
    "Grid": "lattice",
    "triangular_lattice": "lattice",
    "square_lattice": "lattice",
    "Stencil": "models",
    "HarmonicTriangular": "models",
    "LJTriangular": "models",
    "get_model": "models",
    "fold": "fold",
    "FoldedSystem": "fold",
    "full_stability_report": "stability",
    "mode1_scan": "stability",
    "roots_classified": "stability",
    "EquilibriumProblem": "solver",
    "solve_equilibrium": "solver",
    "convergence_study": "solver",
}

__all__ = ["__version__", *_SUBMODULES, *_EXPORTS]


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f"{__name__}.{name}")
    if name in _EXPORTS:
        mod = importlib.import_module(f"{__name__}.{_EXPORTS[name]}")
        return getattr(mod, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
