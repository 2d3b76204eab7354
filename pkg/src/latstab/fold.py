"""
Folding a two-region operator across a planar interface.

The interface is the line ``nu_1 = -1/2`` in index space: the continuum
equations hold for ``nu_1 < 0`` and the atomistic equations for
``nu_1 >= 0``.  Folding introduces the one-sided unknowns::

    U_c(nu) = u(hi_c - 1 - nu),    U_a(nu) = u(lo_a + nu),    nu >= 0

where ``(lo_c, hi_c)`` and ``(lo_a, hi_a)`` are the normal extents of the
continuum and atomistic stencils.  The two halves overlap on
``hi_c - lo_a`` columns, which yields the compatibility conditions::

    U_c(nu) = U_a(m - nu),   0 <= nu <= m,   m = hi_c - lo_a - 1

imposed at ``nu = 0`` through powers of one-sided differences.

Strip fields are arrays ``u[comp, ix, iy]`` that are finite in the normal
direction and periodic in the tangential direction; ``origin`` is the array
index holding ``nu_1 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .models import Stencil

__all__ = [
    "Extents",
    "FoldedSystem",
    "block_extents",
    "compute_extents",
    "fold",
    "scalar_reduce",
    "apply_folded",
    "fold_field",
    "fold_forcing",
    "unfold_field",
    "apply_strip",
    "two_region_residual",
]


@dataclass(frozen=True)
class Extents:
    """Normal extents ``(lo_c, hi_c)`` and ``(lo_a, hi_a)``."""

    lo_c: int
    hi_c: int
    lo_a: int
    hi_a: int

    def __post_init__(self):
        if not (self.lo_a <= self.lo_c <= 0 <= self.hi_c <= self.hi_a):
            raise ValueError(f"extents must satisfy lo_a <= lo_c <= 0 <= hi_c <= hi_a, got {self}")

    @property
    def overlap(self) -> int:
        """Number of shared columns, ``hi_c - lo_a``."""
        return self.hi_c - self.lo_a


def block_extents(stencil: Stencil, axis: int = 0) -> dict:
    """Extent of every nonzero ``(i, j)`` entry of a stencil."""
    out = {}
    for i in range(stencil.m):
        for j in range(stencil.m):
            vals = [mu[axis] for mu, c in stencil.coeffs.items() if c[i, j] != 0.0]
            if vals:
                out[(i, j)] = (min(vals), max(vals))
    return out


def _uniform_extent(stencil: Stencil, label: str) -> tuple[int, int]:
    ext = set(block_extents(stencil).values())
    if not ext:
        raise ValueError(f"{label} stencil is empty")
    if len(ext) > 1:
        raise ValueError(f"{label} stencil has non-uniform extents across components: {sorted(ext)}")
    return ext.pop()


def compute_extents(atomistic: Stencil, continuum: Stencil) -> Extents:
    lo_a, hi_a = _uniform_extent(atomistic, "atomistic")
    lo_c, hi_c = _uniform_extent(continuum, "continuum")
    return Extents(lo_c, hi_c, lo_a, hi_a)


def scalar_reduce(stencil: Stencil) -> Stencil:
    """The scalar stencil of a stencil whose coefficients are multiples of I."""
    if not stencil.is_scalar():
        raise ValueError("stencil is not a multiple of the identity")
    return stencil.block(0, 0)


@dataclass(frozen=True)
class FoldedSystem:
    """One-sided system ``L U = F`` on ``nu >= 0`` with boundary rows at ``nu = 0``.

    Attributes
    ----------
    d : int
        Components per side; the folded unknown has ``2d`` components.
    L : Stencil
        ``2d x 2d`` block-diagonal stencil with nonnegative normal offsets.
    B : dict
        Maps offsets to ``(q, 2d)`` coefficient rows.
    atomistic, continuum : Stencil
        The unfolded (possibly scalar-reduced) operators.
    """

    d: int
    extents: Extents
    L: Stencil
    B: dict
    eps: float = 1.0
    scalar: bool = False
    atomistic: Stencil | None = None
    continuum: Stencil | None = None

    @property
    def n(self) -> int:
        return 2 * self.d

    @property
    def p(self) -> int:
        return 2 * self.d

    @property
    def q(self) -> int:
        return self.d * self.extents.overlap

    @property
    def sigma(self) -> np.ndarray:
        return np.zeros(self.n, dtype=int)

    @property
    def tau(self) -> np.ndarray:
        return np.full(self.n, 2, dtype=int)

    @property
    def rho(self) -> np.ndarray:
        """Orders of the boundary rows, ``floor(k / d) - 2`` for 0-based ``k``."""
        return np.arange(self.q) // self.d - 2

    rho_bar = 0
    rho_star = 1

    @property
    def beta_plus(self) -> np.ndarray:
        e = self.extents
        return np.array([e.hi_c - e.lo_c] * self.d + [e.hi_a - e.lo_a] * self.d)

    def continuum_block(self) -> Stencil:
        return _sub_block(self.L, slice(0, self.d), self.d)

    def atomistic_block(self) -> Stencil:
        return _sub_block(self.L, slice(self.d, 2 * self.d), self.d)

    @property
    def reach(self) -> int:
        """Largest normal offset used by ``L`` or ``B``."""
        return max(max(mu[0] for mu in self.L.coeffs), max(mu[0] for mu in self.B))

    def boundary_symbol(self, z, zeta) -> np.ndarray:
        """``sum_off B[off] z^{off_0} zeta^{off_1}``, shape ``(q, 2d)``."""
        out = np.zeros((self.q, self.n), dtype=complex)
        for (a, b), c in self.B.items():
            out += c * (z**a) * (zeta**b)
        return out

    def boundary_poly(self, zeta) -> np.ndarray:
        """Boundary rows as polynomials in ``z``: shape ``(deg + 1, q, 2d)``, ascending."""
        deg = max(mu[0] for mu in self.B)
        out = np.zeros((deg + 1, self.q, self.n), dtype=complex)
        for (a, b), c in self.B.items():
            out[a] += c * zeta**b
        return out


def _sub_block(L: Stencil, sl: slice, d: int) -> Stencil:
    return Stencil({mu: c[sl, sl] for mu, c in L.coeffs.items()}, m=d)


def fold(
    atomistic: Stencil,
    continuum: Stencil,
    extents: Extents | None = None,
    eps: float = 1.0,
    scalar: bool | str = False,
) -> FoldedSystem:
    """Fold an atomistic / continuum stencil pair into a one-sided system.

    Parameters
    ----------
    atomistic, continuum : Stencil
        Operators governing ``nu_1 >= 0`` and ``nu_1 < 0``.
    extents : Extents, optional
        Computed from the stencils when omitted.
    eps : float
        Spacing used in the difference powers of the boundary rows.
    scalar : bool or "auto"
        Fold the scalar reduction of identity-proportional stencils.
        ``"auto"`` does so whenever both stencils qualify.
    """
    if scalar == "auto":
        scalar = atomistic.is_scalar() and continuum.is_scalar()
    if scalar:
        atomistic, continuum = scalar_reduce(atomistic), scalar_reduce(continuum)
    if extents is None:
        extents = compute_extents(atomistic, continuum)
    d = atomistic.m
    if continuum.m != d:
        raise ValueError("stencils must have the same component count")

    coeffs: dict = {}
    for mu, c in continuum.coeffs.items():
        key = (extents.hi_c - mu[0],) + tuple(mu[1:])
        blk = coeffs.setdefault(key, np.zeros((2 * d, 2 * d)))
        blk[:d, :d] += c
    for mu, c in atomistic.coeffs.items():
        key = (mu[0] - extents.lo_a,) + tuple(mu[1:])
        blk = coeffs.setdefault(key, np.zeros((2 * d, 2 * d)))
        blk[d:, d:] += c
    L = Stencil(coeffs, m=2 * d)

    m = extents.overlap - 1
    q = d * extents.overlap
    tail = (0,) * (atomistic.dim - 1)
    B: dict = {}
    for k in range(q):
        i, l = divmod(k, d)
        for j in range(i + 1):
            w = comb(i, j) * (-1) ** (i - j) / eps**i
            B.setdefault((j,) + tail, np.zeros((q, 2 * d)))[k, l] += w
            B.setdefault((m - j,) + tail, np.zeros((q, 2 * d)))[k, d + l] -= w
    B = {mu: c for mu, c in sorted(B.items()) if np.any(c != 0.0)}
    return FoldedSystem(
        d=d,
        extents=extents,
        L=L,
        B=B,
        eps=eps,
        scalar=bool(scalar),
        atomistic=atomistic,
        continuum=continuum,
    )


def _shift_window(U, ox: int, oy: int, rows: int) -> np.ndarray:
    return np.roll(U[:, ox : ox + rows], -oy, axis=2)


def apply_folded(sys: FoldedSystem, U) -> tuple[np.ndarray, np.ndarray]:
    """Apply ``L`` on every row the window supports and ``B`` at ``nu = 0``.

    Returns
    -------
    interior : ndarray, shape ``(2d, rows, ny)``
    boundary : ndarray, shape ``(q, ny)``
    """
    U = np.asarray(U)
    if U.shape[0] != sys.n:
        raise ValueError(f"folded field needs {sys.n} components")
    nx = U.shape[1]
    rows = nx - max(mu[0] for mu in sys.L.coeffs)
    if rows < 1 or nx <= max(mu[0] for mu in sys.B):
        raise ValueError("window too small for stencil reach")
    interior = np.zeros((sys.n, rows) + U.shape[2:], dtype=np.result_type(U, float))
    for (ox, oy), c in sys.L.coeffs.items():
        interior += np.einsum("ij,j...->i...", c, _shift_window(U, ox, oy, rows))
    boundary = np.zeros((sys.q,) + U.shape[2:], dtype=interior.dtype)
    for (ox, oy), c in sys.B.items():
        boundary += c @ np.roll(U[:, ox], -oy, axis=1)
    return interior, boundary


def fold_field(u, extents: Extents, origin: int, width: int) -> np.ndarray:
    """Folded field ``(U_c, U_a)`` on ``0 <= nu < width`` from a strip field."""
    u = np.asarray(u)
    nu = np.arange(width)
    ic = origin + extents.hi_c - 1 - nu
    ia = origin + extents.lo_a + nu
    if ic.min() < 0 or ia.max() >= u.shape[1]:
        raise ValueError("strip too narrow for the requested window")
    return np.concatenate([u[:, ic], u[:, ia]], axis=0)


def fold_forcing(f, origin: int, width: int) -> np.ndarray:
    """Folded right-hand side: ``F_c(nu) = f(-nu-1)``, ``F_a(nu) = f(nu)``."""
    f = np.asarray(f)
    nu = np.arange(width)
    return np.concatenate([f[:, origin - 1 - nu], f[:, origin + nu]], axis=0)


def unfold_field(U, extents: Extents) -> tuple[np.ndarray, int]:
    """Inverse of :func:`fold_field` for compatible fields.

    Returns the strip field on ``hi_c - width <= nu_1 < lo_a + width`` and
    its origin.  Continuum values are used for ``nu_1 < 0``, atomistic
    values for ``nu_1 >= 0``.
    """
    U = np.asarray(U)
    d = U.shape[0] // 2
    width = U.shape[1]
    start = extents.hi_c - width
    stop = extents.lo_a + width
    u = np.empty((d, stop - start) + U.shape[2:], dtype=U.dtype)
    for x in range(start, stop):
        if x < 0:
            u[:, x - start] = U[:d, extents.hi_c - 1 - x]
        else:
            u[:, x - start] = U[d:, x - extents.lo_a]
    return u, -start


def apply_strip(stencil: Stencil, u, rows) -> np.ndarray:
    """Apply a stencil on a strip field at the given array rows."""
    u = np.asarray(u)
    rows = np.asarray(rows)
    out = np.zeros((stencil.m, rows.size) + u.shape[2:], dtype=np.result_type(u, float))
    for (ox, oy), c in stencil.coeffs.items():
        if rows.min() + ox < 0 or rows.max() + ox >= u.shape[1]:
            raise ValueError("stencil reaches outside the strip")
        out += np.einsum("ij,j...->i...", c, np.roll(u[:, rows + ox], -oy, axis=2))
    return out


def two_region_residual(atomistic: Stencil, continuum: Stencil, u, origin: int, width: int):
    """Residuals of the unfolded two-region system.

    Returns ``(res_c, res_a)`` where ``res_c[:, nu]`` is the continuum
    operator at ``nu_1 = -nu - 1`` and ``res_a[:, nu]`` the atomistic
    operator at ``nu_1 = nu``, for ``0 <= nu < width``.
    """
    nu = np.arange(width)
    res_c = apply_strip(continuum, u, origin - 1 - nu)
    res_a = apply_strip(atomistic, u, origin + nu)
    return res_c, res_a
