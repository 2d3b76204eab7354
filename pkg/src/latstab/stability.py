"""
Stability checks for a folded interface system.

Bulk ellipticity
    :func:`bulk_stability_scan` bounds ``det(-h_at)`` below by
    ``Lambda_0^{2d}`` over the reciprocal grid.
Root counting
    :func:`assumption_b_check` counts decaying roots of the folded blocks
    and compares with the number of boundary rows.
Complementing condition
    :func:`mode1_scan`, :func:`mode2_check` and :func:`mode3_check` look for
    decaying eigensolutions at nonzero tangential frequency, in the long-wave
    limit, and at zero tangential frequency.

Characteristic polynomials are obtained by substituting ``T^mu ->
z^{mu_1} zeta^{mu_2}`` in a stencil and expanding the determinant exactly
over the finite offset set.  Roots come from companion-matrix eigenvalues
(``numpy.roots``).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from math import factorial

import numpy as np

from .fold import FoldedSystem, fold
from .lattice import lambda0_sq
from .models import Stencil

__all__ = [
    "CharPoly",
    "Root",
    "RootSet",
    "BoundaryMatrix",
    "StabilityReport",
    "matrix_poly",
    "det_poly",
    "char_poly",
    "roots_classified",
    "bulk_stability_scan",
    "assumption_b_check",
    "mode1_matrix",
    "mode1_scan",
    "example_inside_roots",
    "example1_mode1_matrix",
    "example2_mode1_matrix",
    "example2_mode3_matrix",
    "mode2_check",
    "mode3_check",
    "supplementary_check",
    "folded_for",
    "full_stability_report",
]

INSIDE, OUTSIDE, ANNULUS, AT_ZERO, AT_INF = "inside", "outside", "unit-annulus", "at-zero", "at-infinity"


# ---------------------------------------------------------------------------
# polynomial helpers (coefficient arrays are ascending along axis 0)


def matrix_poly(stencil: Stencil, zeta) -> tuple[np.ndarray, int]:
    """Matrix polynomial of a stencil in ``z`` at fixed ``zeta``.

    Returns ``(C, lo)`` with ``sum_p C[p] z^(p + lo)`` equal to the stencil
    evaluated at ``T^mu -> z^{mu_1} zeta^{mu_2}``.
    """
    lo, hi = stencil.extent(0)
    C = np.zeros((hi - lo + 1, stencil.m, stencil.m), dtype=complex)
    for mu, c in stencil.coeffs.items():
        C[mu[0] - lo] += c * np.prod([zeta**s for s in mu[1:]])
    return C, lo


def _pmul(a, b):
    return np.convolve(a, b)


def det_poly(C) -> np.ndarray:
    """Determinant of a square matrix polynomial, ascending coefficients."""
    C = np.asarray(C, dtype=complex)
    m = C.shape[1]
    if m == 1:
        return C[:, 0, 0].copy()
    if m == 2:
        return _pmul(C[:, 0, 0], C[:, 1, 1]) - _pmul(C[:, 0, 1], C[:, 1, 0])
    # interpolate on roots of unity; exact up to rounding for degree <= n - 1
    n = m * (C.shape[0] - 1) + 1
    z = np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.array([np.linalg.det(_peval(C, zk)) for zk in z])
    return np.fft.fft(vals) / n


def _peval(C, z):
    acc = np.zeros(C.shape[1:], dtype=complex)
    for c in C[::-1]:
        acc = acc * z + c
    return acc


def _pderiv(C, r: int):
    """Coefficients of the ``r``-th derivative divided by ``r!``."""
    if r == 0:
        return C
    if C.shape[0] <= r:
        return np.zeros((1,) + C.shape[1:], dtype=C.dtype)
    k = np.arange(r, C.shape[0])
    w = np.array([factorial(j) // (factorial(j - r) * factorial(r)) for j in k], dtype=float)
    return C[r:] * w.reshape((-1,) + (1,) * (C.ndim - 1))


def _adjugate_column(C, j: int):
    """Column ``j`` of the adjugate of a 1x1 or 2x2 matrix polynomial."""
    m = C.shape[1]
    if m == 1:
        return np.ones((1, 1), dtype=complex)
    if m == 2:
        if j == 0:
            return np.stack([C[:, 1, 1], -C[:, 1, 0]], axis=1)
        return np.stack([-C[:, 0, 1], C[:, 0, 0]], axis=1)
    raise NotImplementedError("adjugate columns are implemented for d <= 2")


def _matvec_poly(Bp, a):
    """Product of a ``(P, q, m)`` and a ``(R, m)`` polynomial: ``(P + R - 1, q)``."""
    out = np.zeros((Bp.shape[0] + a.shape[0] - 1, Bp.shape[1]), dtype=complex)
    for i in range(Bp.shape[0]):
        for j in range(a.shape[0]):
            out[i + j] += Bp[i] @ a[j]
    return out


# ---------------------------------------------------------------------------
# characteristic polynomials and roots


@dataclass
class CharPoly:
    """``R(z) = z^shift * sum_k coeffs[k] z^k`` at fixed ``zeta``."""

    zeta: complex
    coeffs: np.ndarray
    shift: int

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        return z**self.shift * np.polynomial.polynomial.polyval(z, self.coeffs)

    @property
    def span(self) -> int:
        return len(self.coeffs) - 1


def char_poly(stencil: Stencil, zeta) -> CharPoly:
    """Determinant of the ``z``-substituted symbol as a Laurent polynomial."""
    C, lo = matrix_poly(stencil, zeta)
    return CharPoly(zeta=complex(zeta), coeffs=det_poly(C), shift=stencil.m * lo)


@dataclass
class Root:
    z: complex
    multiplicity: int
    cls: str


@dataclass
class RootSet:
    roots: list
    tol_annulus: float
    degree: int

    def count(self, cls: str) -> int:
        return sum(r.multiplicity for r in self.roots if r.cls == cls)

    @property
    def n_inside(self) -> int:
        """Decaying roots; roots at zero count as inside."""
        return self.count(INSIDE) + self.count(AT_ZERO)

    @property
    def unresolved(self) -> bool:
        return self.count(ANNULUS) > 0

    def decaying(self) -> list:
        return [r for r in self.roots if r.cls in (INSIDE, AT_ZERO)]

    def values(self, *classes) -> np.ndarray:
        out = []
        for r in self.roots:
            if not classes or r.cls in classes:
                out.extend([r.z] * r.multiplicity)
        return np.array(out, dtype=complex)


def _deflate_at_one(c, tol: float):
    """Remove exact factors ``(z - 1)`` detected by ``|p(1)|`` being negligible."""
    c = np.array(c, dtype=complex)
    k = 0
    while len(c) > 1 and abs(np.sum(c)) <= tol * np.sum(np.abs(c)):
        # synthetic division by (z - 1), descending Horner on reversed coefficients
        desc = c[::-1]
        out = np.empty(len(desc) - 1, dtype=complex)
        acc = 0.0
        for i in range(len(desc) - 1):
            acc = acc + desc[i]
            out[i] = acc
        c = out[::-1]
        k += 1
    return c, k


def _cluster(values, tol: float):
    clusters: list[list[complex]] = []
    for z in values:
        for cl in clusters:
            if abs(z - cl[0]) <= tol * max(1.0, abs(cl[0])):
                cl.append(z)
                break
        else:
            clusters.append([z])
    return [(complex(np.mean(cl)), len(cl)) for cl in clusters]


def roots_classified(
    p: CharPoly,
    tol_annulus: float = 1e-8,
    cluster_tol: float = 1e-6,
    deflate_unit: bool = True,
) -> RootSet:
    """Classify the roots of a characteristic polynomial against the unit circle.

    Leading or trailing coefficients below ``1e-13`` of the largest are
    treated as roots at infinity or at zero.  Exact factors ``(z - 1)`` are
    removed by synthetic division first (when ``deflate_unit``) so that the
    multiple translation root at ``zeta = 1`` does not scatter.
    """
    c = np.asarray(p.coeffs, dtype=complex)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale < 1e-14:
        raise ValueError("identically zero determinant")
    small = np.abs(c) < 1e-13 * scale
    n_zero = int(np.argmin(small)) if not small.all() else 0
    n_inf = int(np.argmin(small[::-1]))
    core = c[n_zero : len(c) - n_inf]
    roots: list[Root] = []
    if n_inf:
        roots.append(Root(complex(np.inf), n_inf, AT_INF))
    n_one = 0
    if deflate_unit:
        core, n_one = _deflate_at_one(core, 1e-12)
        if n_one:
            roots.append(Root(1 + 0j, n_one, ANNULUS))
    finite = list(np.roots(core[::-1])) if len(core) > 1 else []
    # snapped zeros join nearby core roots: a split double root near the
    # origin otherwise yields one exact zero and one tiny partner
    finite = [0j] * n_zero + finite
    if finite:
        for z, mult in _cluster(finite, cluster_tol):
            r = abs(z)
            if z == 0:
                cls = AT_ZERO
            elif r < 1.0 - tol_annulus:
                cls = INSIDE
            elif r > 1.0 + tol_annulus:
                cls = OUTSIDE
            else:
                cls = ANNULUS
            roots.append(Root(z, mult, cls))
    rs = RootSet(roots=roots, tol_annulus=tol_annulus, degree=p.span)
    assert sum(r.multiplicity for r in roots) == rs.degree
    return rs


# ---------------------------------------------------------------------------
# Assumption A


def bulk_stability_scan(stencil: Stencil, n_half: int, sign: int = -1) -> dict:
    """Minimum of ``det(sign * h(xi)) / Lambda_0^{2d}(xi)`` over ``xi != 0``.

    ``stencil`` is the force stencil at ``eps = 1/(2 n_half)``.
    """
    eps = 1.0 / (2 * n_half)
    d = stencil.dim
    k1 = np.fft.fftfreq(2 * n_half, d=1.0 / (2 * n_half))
    k = np.stack(np.meshgrid(*([k1] * d), indexing="ij"), axis=-1).reshape(-1, d)
    k = k[np.any(k != 0, axis=1)]
    h = stencil.symbol(k, eps)
    herm = float(np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2)))))
    dets = np.linalg.det(sign * h)
    lam = lambda0_sq(2.0 * np.pi * k, eps)
    ratio = dets.real / lam**d
    i = int(np.argmin(ratio))
    return {
        "n_half": n_half,
        "min_ratio": float(ratio[i]),
        "argmin_k": [int(v) for v in k[i]],
        "max_imag_det": float(np.max(np.abs(dets.imag))),
        "hermiticity_residual": herm,
        "pass": bool(ratio[i] > 0.0),
    }


# ---------------------------------------------------------------------------
# Assumption B


def _block_roots(block: Stencil, zeta, tol_annulus: float) -> RootSet:
    return roots_classified(char_poly(block, zeta), tol_annulus)


def assumption_b_check(folded: FoldedSystem, M: int = 256, tol_annulus: float = 1e-8) -> dict:
    """Decaying-root counts of both folded blocks at ``theta_i = 2 pi i / M``."""
    if M < 8:
        raise ValueError("M must be at least 8")
    cb, ab = folded.continuum_block(), folded.atomistic_block()
    rows = []
    unresolved = False
    ok = True
    for i in range(1, M):
        zeta = np.exp(2j * np.pi * i / M)
        rc = _block_roots(cb, zeta, tol_annulus)
        ra = _block_roots(ab, zeta, tol_annulus)
        un = rc.unresolved or ra.unresolved
        unresolved |= un
        ok &= rc.n_inside + ra.n_inside == folded.q
        rows.append((2 * np.pi * i / M, rc.n_inside, ra.n_inside, un))
    counts = sorted({(r[1], r[2]) for r in rows})
    return {
        "q": folded.q,
        "M": M,
        "counts": [list(c) for c in counts],
        "per_theta": rows,
        "unresolved": bool(unresolved),
        "pass": bool(ok and not unresolved),
        "verdict": "unresolved" if unresolved else ("pass" if ok else "fail"),
    }


# ---------------------------------------------------------------------------
# mode I


@dataclass
class BoundaryMatrix:
    zeta: complex
    A: np.ndarray
    basis_meta: list = field(default_factory=list)
    unresolved: bool = False
    det_value: complex | None = None

    @property
    def square(self) -> bool:
        return self.A.shape[0] == self.A.shape[1]

    def det(self) -> complex:
        if not self.square:
            raise ValueError(f"boundary matrix is {self.A.shape}, not square")
        if self.det_value is not None:
            return self.det_value
        return complex(np.linalg.det(self.A))


def _null_space(M, rtol: float = 1e-8, scale: float | None = None):
    """Null vectors of ``M``; ``scale`` sets the size below which singular values count as zero."""
    _, s, vh = np.linalg.svd(M)
    if scale is None:
        scale = s[0] if s.size and s[0] > 0 else 1.0
    k = int(np.sum(s <= rtol * scale))
    return vh[len(s) - k :].conj().T if k else np.zeros((M.shape[1], 0))


def _poly_scale(C, z0) -> float:
    r = max(abs(z0), 1.0)
    return sum(np.linalg.norm(Ck, 2) * r**k for k, Ck in enumerate(C))


def _merge_semisimple(C, roots, rtol: float = 1e-6, reach: float = 1e-3):
    """Merge split copies of a root whose null space exceeds its multiplicity.

    Determinant roots of a block like ``p(z) I`` are squared and scatter by
    about the square root of machine precision, so the copies arrive as
    nearby simple roots sharing one two-dimensional null space.
    """
    pending = list(roots)
    out = []
    while pending:
        r = pending.pop(0)
        z, mult = r.z, r.multiplicity
        while pending:
            g = _null_space(_peval(C, z), rtol, _poly_scale(C, z)).shape[1]
            if g <= mult:
                break
            j = int(np.argmin([abs(p.z - z) for p in pending]))
            if abs(pending[j].z - z) > reach * max(1.0, abs(z)):
                break
            other = pending.pop(j)
            z = (mult * z + other.multiplicity * other.z) / (mult + other.multiplicity)
            mult += other.multiplicity
        out.append(Root(z, mult, r.cls))
    return out


def _decaying_columns(C, Bp, decaying, label: str, var_scale=None):
    """Boundary columns for a block's decaying modes.

    ``C`` is the block's matrix polynomial, ``Bp`` the boundary rows
    restricted to the block's columns, both ascending in the variable.
    Simple roots use an adjugate column, clusters with a full null space
    use constant null vectors, and otherwise confluent (Taylor) columns of
    ``B(z) a(z)`` generate the Jordan chain.
    """
    m = C.shape[1]
    cols, meta = [], []
    if m > 1:
        decaying = _merge_semisimple(C, decaying)
    for root in decaying:
        z0, mult = root.z, root.multiplicity
        L0 = _peval(C, z0)
        # measure singularity against the polynomial's size on the closed unit
        # disk, since a scalar block vanishes entirely at its roots
        rtol = 1e-8 if mult == 1 else 1e-6
        ns = _null_space(L0, rtol, _poly_scale(C, z0)) if m > 1 else np.ones((1, 1))
        if mult > 1 and m > 1 and ns.shape[1] >= mult:
            for v in ns.T[:mult]:
                cols.append(_peval(Bp, z0) @ v)
                meta.append((label, z0, 0))
            continue
        if m == 1:
            a = np.ones((1, 1), dtype=complex)
        else:
            a0 = _adjugate_column(C, 0)
            a1 = _adjugate_column(C, 1)
            n0 = np.linalg.norm(_peval(a0, z0))
            n1 = np.linalg.norm(_peval(a1, z0))
            a = a0 if n0 >= 1e-8 * max(n0, n1) and n0 > 0 else a1
            if max(n0, n1) == 0:
                raise ValueError(f"null space dimension mismatch at root {z0} of {label} block")
        g = _matvec_poly(Bp, a)
        for r in range(mult):
            cols.append(_peval(_pderiv(g, r), z0))
            meta.append((label, z0, r))
    return cols, meta


def mode1_matrix(folded: FoldedSystem, zeta, tol_annulus: float = 1e-8) -> BoundaryMatrix:
    """Boundary rows evaluated on the decaying solutions ``z^nu v``."""
    d = folded.d
    Bpoly = folded.boundary_poly(zeta)
    cols, meta = [], []
    unresolved = False
    for label, block, sl in (
        ("continuum", folded.continuum_block(), slice(0, d)),
        ("atomistic", folded.atomistic_block(), slice(d, 2 * d)),
    ):
        C, lo = matrix_poly(block, zeta)
        if lo != 0:
            C = np.concatenate([np.zeros((lo,) + C.shape[1:], dtype=complex), C])
        rs = roots_classified(CharPoly(complex(zeta), det_poly(C), 0), tol_annulus)
        unresolved |= rs.unresolved
        c, mt = _decaying_columns(C, Bpoly[:, :, sl], rs.decaying(), label)
        cols += c
        meta += mt
    A = np.array(cols, dtype=complex).T if cols else np.zeros((folded.q, 0), dtype=complex)
    return BoundaryMatrix(zeta=complex(zeta), A=A, basis_meta=meta, unresolved=unresolved)


def _series_diagnostics(theta, absdet, M: int) -> dict:
    """Symmetry, monotonicity and continuity of ``|det A|`` on a uniform scan."""
    n = len(absdet)
    rev = absdet[::-1]
    scale = np.maximum(np.abs(absdet), np.abs(rev))
    finite = np.isfinite(absdet) & np.isfinite(rev) & (scale > 0)
    asym = float(np.max(np.abs(absdet - rev)[finite] / scale[finite])) if finite.any() else 0.0
    deriv = M * np.diff(absdet)
    half = theta[1:] <= np.pi + 1e-12
    increasing = bool(np.all(deriv[half] > 0))
    ratios = absdet[1:] / absdet[:-1]
    interior = slice(max(1, n // 20), n - 1 - max(1, n // 20))
    r_int = ratios[interior]
    r_int = r_int[np.isfinite(r_int) & (r_int > 0)]
    jump = float(np.max(np.maximum(r_int, 1.0 / r_int))) if r_int.size else 1.0
    return {
        "max_asymmetry": asym,
        "increasing_on_half": increasing,
        "derivative": deriv,
        "max_interior_ratio": jump,
        "continuity_ok": bool(jump < 10.0),
    }


def _refine_dips(build, theta, absdet, dip_rtol: float) -> list:
    """Minimize ``|det A|`` around each interior local minimum of the samples.

    A dip is reported when the refined minimum falls below ``dip_rtol``
    times the larger neighbouring sample, the signature of a zero between
    grid points.
    """
    from scipy.optimize import minimize_scalar

    dips = []
    for j in range(1, len(absdet) - 1):
        a, b, c = absdet[j - 1], absdet[j], absdet[j + 1]
        if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(c)) or not (b <= a and b <= c):
            continue
        res = minimize_scalar(
            lambda t: abs(build(np.exp(1j * t)).det()),
            bounds=(theta[j - 1], theta[j + 1]),
            method="bounded",
            options={"xatol": 1e-12 * (theta[j + 1] - theta[j - 1])},
        )
        val = min(float(res.fun), b)
        if val < dip_rtol * max(a, c):
            dips.append({"theta": float(res.x), "abs_det": val})
    return dips


def mode1_scan(
    source,
    M: int = 1000,
    det_threshold: float = 0.0,
    tol_annulus: float = 1e-8,
    dip_rtol: float = 1e-8,
) -> dict:
    """Scan ``|det A(zeta_i)|`` at ``theta_i = 2 pi i / M``, ``i = 1..M-1``.

    Parameters
    ----------
    source : FoldedSystem or callable
        Folded system (general boundary matrix) or a function
        ``zeta -> BoundaryMatrix`` such as :func:`example2_mode1_matrix`.
    det_threshold : float
        Every sample must exceed this value.
    dip_rtol : float
        Interior local minima are refined; one that drops below ``dip_rtol``
        times its neighbours counts as a zero of ``det A`` and fails the scan.

    Notes
    -----
    ``det A`` vanishes at ``zeta = 1`` by construction, so the samples next
    to ``theta = 0`` are small whenever the check passes; monotonicity and
    symmetry are reported as diagnostics only.
    """
    if M < 100:
        raise ValueError("M must be at least 100")
    build = (lambda z: mode1_matrix(source, z, tol_annulus)) if isinstance(source, FoldedSystem) else source
    theta = 2.0 * np.pi * np.arange(1, M) / M
    absdet = np.empty(M - 1)
    unresolved = False
    mismatch = False
    for i, t in enumerate(theta):
        bm = build(np.exp(1j * t))
        unresolved |= bm.unresolved
        if not bm.square:
            mismatch = True
            absdet[i] = np.nan
            continue
        absdet[i] = abs(bm.det())
    diag = _series_diagnostics(theta, absdet, M)
    i_min = int(np.nanargmin(absdet)) if not np.all(np.isnan(absdet)) else 0
    min_det = float(absdet[i_min])
    dips = [] if mismatch else _refine_dips(build, theta, absdet, dip_rtol)
    ok = (not mismatch) and min_det > det_threshold and not dips
    verdict = "unresolved" if unresolved else ("pass" if ok else "fail")
    return {
        "M": M,
        "theta": theta,
        "abs_det": absdet,
        "min_abs_det": min_det,
        "argmin_theta": float(theta[i_min]),
        "det_threshold": det_threshold,
        "dimension_mismatch": mismatch,
        "dips": dips,
        **diag,
        "unresolved": bool(unresolved),
        "pass": bool(ok and not unresolved),
        "verdict": verdict,
    }


# ---------------------------------------------------------------------------
# worked-example layouts (unfolded roots, boundary rows in displayed form)


def example_inside_roots(stencil: Stencil, zeta, tol_annulus: float = 1e-8) -> np.ndarray:
    """Decaying roots of an unfolded stencil's characteristic polynomial."""
    rs = roots_classified(char_poly(stencil, zeta), tol_annulus)
    return rs.values(INSIDE, AT_ZERO)


def example1_mode1_matrix(zeta, model=None) -> BoundaryMatrix:
    """Three-by-three matrix of the harmonic example.

    Rows ``(1, -1, -1)``, ``(z1, -z2, -z3)``, ``(1/z1, -1/z2, -1/z3)`` with
    ``z1`` the decaying continuum root and ``z2, z3`` the atomistic ones.
    """
    from .models import HarmonicTriangular

    model = model or HarmonicTriangular()
    zc = example_inside_roots(model.continuum_stencil(1.0).block(0, 0), zeta)
    za = example_inside_roots(model.atomistic_stencil(1.0).block(0, 0), zeta)
    z = np.concatenate([zc, za])
    sign = np.array([1.0] * len(zc) + [-1.0] * len(za))
    with np.errstate(divide="ignore", invalid="ignore"):
        A = np.array([sign * np.ones_like(z), sign * z, sign / z])
    return BoundaryMatrix(complex(zeta), A, [("root", complex(v), 0) for v in z])


def _lj_reduced(model):
    c = model.constants
    Mcb = model.continuum_stencil(1.0).scaled(1.0 / (2.0 * c.cb_modulus))
    Mat = model.atomistic_stencil(1.0).scaled(0.5)
    return Mcb, Mat


def _mp_poly(stencil: Stencil, zeta, scale):
    """Matrix polynomial entries as mpmath lists (ascending), and the lower extent."""
    import mpmath as mp

    lo, hi = stencil.extent(0)
    m = stencil.m
    C = [[[mp.mpc(0)] * (hi - lo + 1) for _ in range(m)] for _ in range(m)]
    for mu, v in stencil.coeffs.items():
        ph = zeta ** mu[1]
        for i in range(m):
            for j in range(m):
                if v[i, j] != 0.0:
                    C[i][j][mu[0] - lo] += mp.mpf(float(v[i, j])) * scale * ph
    return C, lo


def _mp_eval(c, z):
    acc = 0
    for a in reversed(c):
        acc = acc * z + a
    return acc


def _mp_conv(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _mp_inside_roots(C, tol_annulus: float, steps: int = 8):
    """Decaying roots of a 2x2 mpmath matrix polynomial, polished by Newton."""
    import mpmath as mp

    det = [x - y for x, y in zip(_mp_conv(C[0][0], C[1][1]), _mp_conv(C[0][1], C[1][0]))]
    ddet = [k * det[k] for k in range(1, len(det))]
    approx = np.roots(np.array([complex(x) for x in det[::-1]]))
    out = []
    for z0 in approx:
        z = mp.mpc(z0)
        for _ in range(steps):
            dz = _mp_eval(det, z) / _mp_eval(ddet, z)
            z -= dz
            if abs(dz) < mp.mpf(10) ** (-mp.mp.dps + 5) * max(1, abs(z)):
                break
        if abs(z) < 1 - tol_annulus:
            out.append(z)
    return out


def example2_mode1_matrix(zeta, model=None, precision: str = "double", dps: int = 40) -> BoundaryMatrix:
    """Six-by-six matrix of the Lennard-Jones example in displayed layout.

    Continuum columns carry ``-(M22, M12)`` times ``(1, z, 1/z)``;
    atomistic columns carry ``(M22, M12)`` times ``(1, 1/z, z)``.
    With ``precision="mp"`` roots are polished and the determinant is
    evaluated in ``dps``-digit arithmetic; ``A`` is then a rounded copy.
    """
    from .models import LJTriangular

    model = model or LJTriangular()
    Mcb, Mat = _lj_reduced(model)
    if precision == "mp":
        return _example2_mp(zeta, Mcb, Mat, dps)
    zc = example_inside_roots(Mcb, zeta)
    za = example_inside_roots(Mat, zeta)
    cols, meta = [], []
    for z in zc:
        M = Mcb.evaluate(np.array([z, zeta]))
        v = -np.array([M[1, 1], M[0, 1]])
        cols.append(np.concatenate([v, z * v, v / z]))
        meta.append(("continuum", complex(z), 0))
    for z in za:
        M = Mat.evaluate(np.array([z, zeta]))
        v = np.array([M[1, 1], M[0, 1]])
        cols.append(np.concatenate([v, v / z, z * v]))
        meta.append(("atomistic", complex(z), 0))
    return BoundaryMatrix(complex(zeta), np.array(cols).T, meta)


def _example2_mp(zeta, Mcb: Stencil, Mat: Stencil, dps: int) -> BoundaryMatrix:
    import mpmath as mp

    with mp.workdps(dps):
        zt = mp.mpc(zeta)
        cols, meta = [], []
        for label, st, sgn, powers in ((("continuum", Mcb, -1, (0, 1, -1))), ("atomistic", Mat, 1, (0, -1, 1))):
            C, lo = _mp_poly(st, zt, mp.mpf(1))
            for z in _mp_inside_roots(C, 1e-8):
                zl = z**lo
                m22 = _mp_eval(C[1][1], z) * zl
                m12 = _mp_eval(C[0][1], z) * zl
                col = []
                for pw in powers:
                    col += [sgn * m22 * z**pw, sgn * m12 * z**pw]
                cols.append(col)
                meta.append((label, complex(z), 0))
        A = mp.matrix(6, len(cols))
        for j, col in enumerate(cols):
            for i, v in enumerate(col):
                A[i, j] = v
        det = complex(mp.det(A)) if len(cols) == 6 else None
        An = np.array([[complex(A[i, j]) for j in range(len(cols))] for i in range(6)])
    return BoundaryMatrix(complex(zeta), An, meta, det_value=det)


def example2_mode3_matrix(roots, model=None) -> np.ndarray:
    """Last two displayed boundary conditions on atomistic modes at ``zeta = 1``.

    Shape ``(4, len(roots))``: rows ``z^-1 (M22, M12)`` then ``z (M22, M12)``.
    """
    from .models import LJTriangular

    model = model or LJTriangular()
    _, Mat = _lj_reduced(model)
    cols = []
    for z in roots:
        M = Mat.evaluate(np.array([z, 1.0]))
        v = np.array([M[1, 1], M[0, 1]])
        cols.append(np.concatenate([v / z, z * v]))
    return np.array(cols, dtype=complex).T


# ---------------------------------------------------------------------------
# mode II and the supplementary condition


def _quadratic_poly(Q, sign: float, theta: float) -> np.ndarray:
    """Long-wave symbol ``-1/2 Q[s, s]`` with ``s = (sign tau, theta)`` as a polynomial in ``tau``."""
    m = Q.shape[2]
    P = np.zeros((3, m, m), dtype=complex)
    P[2] = -0.5 * Q[0, 0]
    P[1] = -0.5 * sign * theta * (Q[0, 1] + Q[1, 0])
    P[0] = -0.5 * theta**2 * Q[1, 1]
    return P


def mode2_check(folded: FoldedSystem, thetas=(1.0, -1.0), rtol: float = 1e-8) -> dict:
    """Long-wave eigensolutions ``e^{i tau x} v`` with ``Im tau > 0``.

    Uses the closed-form long-wave limits of the unfolded stencils; the
    continuum block is reflected (``tau -> -tau``).  The first ``p``
    boundary rows tend to ``U_l - U_{d+l}`` and ``dU_l + dU_{d+l}``.
    """
    d, p = folded.d, folded.p
    Qc = folded.continuum.quadratic_limit()
    Qa = folded.atomistic.quadratic_limit()
    # B1 rows as polynomials in tau: row (i, l) -> (i tau)^i on l, -(-i tau)^i on d + l
    B1 = np.zeros((2, p, 2 * d), dtype=complex)
    for k in range(p):
        i, l = divmod(k, d)
        B1[i, k, l] += (1j) ** i
        B1[i, k, d + l] -= (-1j) ** i
    out = {"per_theta": [], "pass": True, "supplementary_violation": False}
    for theta in thetas:
        cols, roots_up = [], []
        count_ok = True
        for sign, Q, sl in ((-1.0, Qc, slice(0, d)), (1.0, Qa, slice(d, 2 * d))):
            P = _quadratic_poly(Q, sign, theta)
            rs = np.roots(det_poly(P)[::-1])
            up = rs[rs.imag > 0]
            count_ok &= len(up) == d
            roots_up.extend(up.tolist())
            clusters = [Root(z, mlt, INSIDE) for z, mlt in _cluster(up, 1e-6)]
            c, _ = _decaying_columns(P, B1[:, :, sl], clusters, "mode2")
            cols += c
        if not count_ok:
            out["supplementary_violation"] = True
            out["pass"] = False
            out["per_theta"].append({"theta": theta, "roots": roots_up, "pass": False})
            continue
        A = np.array(cols).T
        s = np.linalg.svd(A, compute_uv=False)
        ok = bool(s[-1] > rtol * s[0])
        out["pass"] &= ok
        out["per_theta"].append(
            {
                "theta": theta,
                "roots": roots_up,
                "det": complex(np.linalg.det(A)),
                "sigma_ratio": float(s[-1] / s[0]),
                "pass": ok,
            }
        )
    out["pass"] = bool(out["pass"])
    return out


def supplementary_check(Q, n_samples: int = 50, seed: int = 0, real_tol: float = 1e-10, pairs=None) -> dict:
    """Roots of ``det l(a + tau b)`` split evenly across the real axis.

    ``Q`` is a long-wave tensor ``(d, d, m, m)``; ``(a, b)`` are random real
    vector pairs unless ``pairs`` is given.  Nearly parallel pairs are skipped.
    """
    d, m = Q.shape[0], Q.shape[2]
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = [(rng.standard_normal(d), rng.standard_normal(d)) for _ in range(n_samples)]
    splits, skipped, unresolved = [], 0, False
    for a, b in pairs:
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        if d > 1 and abs(a[0] * b[1] - a[1] * b[0]) < 1e-8 * np.linalg.norm(a) * np.linalg.norm(b):
            skipped += 1
            continue
        P = np.zeros((3, m, m), dtype=complex)
        P[2] = -0.5 * np.einsum("a,b,abij->ij", b, b, Q)
        P[1] = -0.5 * (np.einsum("a,b,abij->ij", a, b, Q) + np.einsum("a,b,abij->ij", b, a, Q))
        P[0] = -0.5 * np.einsum("a,b,abij->ij", a, a, Q)
        r = np.roots(det_poly(P)[::-1])
        if np.any(np.abs(r.imag) < real_tol):
            unresolved = True
        splits.append((int(np.sum(r.imag > 0)), int(np.sum(r.imag < 0))))
    ok = all(s == (m, m) for s in splits) and not unresolved
    return {
        "samples": len(splits),
        "skipped": skipped,
        "splits": sorted(set(splits)),
        "expected": (m, m),
        "unresolved": unresolved,
        "pass": bool(ok),
    }


# ---------------------------------------------------------------------------
# mode III


def mode3_check(folded: FoldedSystem, tol: float = 1e-6, rtol: float = 1e-8) -> dict:
    """Decaying eigensolutions at ``zeta = 1`` against the trailing boundary rows.

    Roots at (or within ``tol`` of) the unit circle are discarded; the
    remaining decaying modes are tested against rows ``p .. q-1``.
    """
    d = folded.d
    Bpoly = folded.boundary_poly(1.0)[:, folded.p :, :]
    cols, retained = [], []
    for label, block, sl in (
        ("continuum", folded.continuum_block(), slice(0, d)),
        ("atomistic", folded.atomistic_block(), slice(d, 2 * d)),
    ):
        C, lo = matrix_poly(block, 1.0)
        if lo != 0:
            C = np.concatenate([np.zeros((lo,) + C.shape[1:], dtype=complex), C])
        rs = roots_classified(CharPoly(1.0, det_poly(C), 0), tol_annulus=tol)
        keep = [r for r in rs.decaying()]
        for r in keep:
            retained.extend([(label, r.z)] * r.multiplicity)
        c, _ = _decaying_columns(C, Bpoly[:, :, sl], keep, label)
        cols += c
    n_rows = folded.q - folded.p
    out = {
        "retained_roots": [z for _, z in retained],
        "retained_blocks": [lab for lab, _ in retained],
        "b2_rows": n_rows,
        "dimension_mismatch": len(cols) != n_rows,
    }
    if not cols:
        out.update(kernel_dim=0, sigma_ratio=None)
    else:
        A = np.array(cols).T
        s = np.linalg.svd(A, compute_uv=False)
        rank = int(np.sum(s > rtol * s[0]))
        out.update(kernel_dim=len(cols) - rank, sigma_ratio=float(s[-1] / s[0]), matrix=A)
    out["pass"] = bool(out["kernel_dim"] == 0)
    return out


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class StabilityReport:
    model: str
    assumption_a: list
    assumption_b: dict
    mode1: dict
    mode2: dict
    mode3: dict
    supplementary: dict
    examples: dict = field(default_factory=dict)

    @property
    def overall(self) -> str:
        # a definite failure outranks an unresolved sub-check
        subs = [self.assumption_b, self.mode1, self.mode2, self.mode3, self.supplementary]
        failed = not all(a["pass"] for a in self.assumption_a)
        failed |= any(not s["pass"] and not s.get("unresolved") for s in subs)
        if failed:
            return "fail"
        if any(s.get("unresolved") for s in subs):
            return "unresolved"
        return "pass"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["overall"] = self.overall
        return _jsonable(out)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def folded_for(model_or_pair, scalar="auto") -> FoldedSystem:
    """Reduced (``eps = 1``) folded system of a model or ``(atomistic, continuum)`` pair."""
    if isinstance(model_or_pair, tuple):
        at, co = model_or_pair
    else:
        at, co = model_or_pair.atomistic_stencil(1.0), model_or_pair.continuum_stencil(1.0)
    return fold(at, co, scalar=scalar)


def full_stability_report(
    model,
    n_list=(8, 16, 32),
    M: int = 1000,
    M_b: int = 256,
    tol_annulus: float = 1e-8,
    det_threshold: float = 0.0,
    layout: str = "auto",
    precision: str = "mp",
) -> StabilityReport:
    """Run every check on a model (or a stencil pair) and aggregate.

    ``layout`` selects the matrix used for the mode I verdict: ``"folded"``
    (general boundary rows), ``"example"`` (displayed layout of the named
    worked example) or ``"auto"`` (example layout for the Lennard-Jones
    model, folded otherwise). ``precision`` is passed to the example
    layout; ``"mp"`` keeps both ends of the scan accurate.
    """
    name = getattr(model, "name", "custom")
    folded = folded_for(model)
    if isinstance(model, tuple):
        a_checks = []
        for n in n_list:
            a_checks.append(bulk_stability_scan(model[0].scaled((2 * n) ** 2), n))
    else:
        a_checks = [bulk_stability_scan(model.atomistic_stencil(1.0 / (2 * n)), n) for n in n_list]
    b = assumption_b_check(folded, M_b, tol_annulus)

    examples = {}
    folded_scan = mode1_scan(folded, M, det_threshold, tol_annulus)
    if layout == "auto":
        layout = "example" if name == "lj" else "folded"
    if layout == "example" and name == "lj":
        ex_scan = mode1_scan(lambda z: example2_mode1_matrix(z, model, precision=precision), M, det_threshold, tol_annulus)
        mode1 = dict(ex_scan, layout="example")
        examples["mode1_folded_layout"] = _scan_summary(folded_scan)
    else:
        mode1 = dict(folded_scan, layout="folded")
    mode2 = mode2_check(folded)
    mode3 = mode3_check(folded)
    supp = supplementary_check(folded.continuum.quadratic_limit())
    if name == "lj":
        roots = [z for z, lab in zip(mode3["retained_roots"], mode3["retained_blocks"]) if lab == "atomistic"]
        lit = example2_mode3_matrix(roots, model)
        s = np.linalg.svd(lit, compute_uv=False) if lit.size else np.array([])
        examples["mode3_displayed_rows"] = {
            "shape": list(lit.shape),
            "rank": int(np.sum(s > 1e-8 * s[0])) if s.size else 0,
            "retained_count": len(roots),
            "expected_count": 4,
        }
    return StabilityReport(
        model=name,
        assumption_a=a_checks,
        assumption_b=b,
        mode1=mode1,
        mode2=mode2,
        mode3=mode3,
        supplementary=supp,
        examples=examples,
    )


def _scan_summary(scan: dict) -> dict:
    keep = ("min_abs_det", "argmin_theta", "max_asymmetry", "increasing_on_half", "verdict")
    return {k: scan[k] for k in keep}
