"""Scan the interface determinant of the truncated Lennard-Jones model.

Run with ``python demos/lj_determinant_scan.py [out.csv]``.
"""
import sys

import numpy as np

from latstab.models import LJTriangular, lj_constants
from latstab.stability import example2_mode1_matrix, mode1_scan, mode3_check, folded_for

model = LJTriangular()
c = lj_constants()
print(f"K = {c.K:.6f}, kappa = {np.round(c.kappa, 4)}")
print(f"kappa2 + 9 kappa4 = {c.cb_modulus:.4f}, 60 K = {60 * c.K:.4f}")

# %% Determinant of the six-by-six interface matrix around the unit circle
scan = mode1_scan(lambda z: example2_mode1_matrix(z, model, precision="mp"), M=1000)
theta, absdet = scan["theta"], scan["abs_det"]
print(f"\nmin |det A| = {scan['min_abs_det']:.6e} at theta = {scan['argmin_theta']:.6f}")
print("symmetric about pi to", f"{scan['max_asymmetry']:.1e}")
print("increasing on (0, pi):", scan["increasing_on_half"])
for i in (0, 4, 9, 49, 249, 499):
    print(f"  theta = {theta[i]:.4f}   |det A| = {absdet[i]:.6e}")

# det A vanishes at zeta = 1, so the smallest values sit next to theta = 0;
# on a log scale the growth away from there is close to a power law
slope = np.polyfit(np.log(theta[:20]), np.log(absdet[:20]), 1)[0]
print(f"log-log slope near theta = 0: {slope:.2f}")

# %% Zero tangential frequency
m3 = mode3_check(folded_for(model))
print("\nretained decaying roots at zeta = 1:", np.round(m3["retained_roots"], 6))
print("kernel dimension:", m3["kernel_dim"])

if len(sys.argv) > 1:
    d = np.append(scan["M"] * np.diff(absdet), np.nan)
    np.savetxt(sys.argv[1], np.column_stack([theta, absdet, d]), delimiter=",", header="theta,abs_det,d_abs_det", comments="")
    print("wrote", sys.argv[1])
