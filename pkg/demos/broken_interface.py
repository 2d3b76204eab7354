"""A deliberately bad stencil pair, and how the checks catch it.

Run with ``python demos/broken_interface.py``.
"""
import numpy as np

from latstab.models import TRIANGULAR_SHELLS, Stencil
from latstab.stability import assumption_b_check, folded_for, full_stability_report


def scalar_stencil(weights):
    c = {mu: np.atleast_2d(float(w)) for mu, w in weights.items()}
    c[(0, 0)] = -sum(c.values())
    return Stencil(c)


# nearest neighbours only on the atomistic side; the continuum side is skewed
# and carries negative weights
at = scalar_stencil({mu: 1.0 for mu in TRIANGULAR_SHELLS.first})
co = scalar_stencil({(1, 0): -2.0, (0, 1): -0.5, (-1, 1): 0.2, (-1, 0): -0.4, (0, -1): 0.6})

b = assumption_b_check(folded_for((at, co)), M=64)
print("boundary rows:", b["q"], " decaying roots (continuum, atomistic):", b["counts"])

rep = full_stability_report((at, co), M=200, M_b=64)
for name in ("assumption_b", "mode1", "mode2", "mode3", "supplementary"):
    sub = getattr(rep, name)
    print(f"{name:>14}: {'pass' if sub['pass'] else 'unresolved' if sub.get('unresolved') else 'fail'}")
print("overall:", rep.overall)
