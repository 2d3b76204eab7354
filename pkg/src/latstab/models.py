"""
Interaction models on the triangular lattice.

Three models are provided:

``HarmonicTriangular``
    unit springs to the first two neighbour shells, with a lumped continuum
    operator four times the nearest-neighbour Laplacian;
``LJTriangular``
    the linearized second-neighbour truncated Lennard-Jones model and its
    lumped Cauchy-Born operator;
``PairPotentialTriangular``
    a nonlinear pair model whose linearization at ``u = 0`` can be matched
    to ``LJTriangular`` (see :func:`lj_pair_potential`).

All forces follow the sign convention ``F = (1/eps) sum D^+ ...`` so that
the linearized symbols are negative semidefinite near ``xi = 0``.  Every
force stencil scales as ``1/eps^2``; ``stencil(eps=1)`` is the reduced,
scale-free operator used by the interface analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import Grid, project_zero_mean, translate, triangular_lattice

__all__ = [
    "NeighborShells",
    "TRIANGULAR_SHELLS",
    "LJConstants",
    "lj_constants",
    "Stencil",
    "HarmonicTriangular",
    "LJTriangular",
    "PairPotential",
    "PairPotentialTriangular",
    "lj_pair_potential",
    "get_model",
    "grid_eps",
    "continuum_mask",
    "force_atomistic",
    "force_continuum",
    "force_hybrid",
    "Linearization",
    "linearize",
    "symbol",
    "symbol_cb",
    "quadratic_form",
    "cell_average",
]

_TRI = triangular_lattice()


@dataclass(frozen=True)
class NeighborShells:
    """First and second neighbour offsets in lattice coordinates."""

    first: tuple[tuple[int, int], ...]
    second: tuple[tuple[int, int], ...]
    basis: np.ndarray = field(default_factory=lambda: _TRI.basis, repr=False, compare=False)

    def geometric(self, mu) -> np.ndarray:
        """Cartesian bond vector ``sum_j mu_j a_j`` (lattice units)."""
        return np.asarray(mu, dtype=float) @ self.basis

    @property
    def all(self):
        return self.first + self.second


TRIANGULAR_SHELLS = NeighborShells(
    first=((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)),
    second=((1, 1), (-1, 2), (-2, 1), (-1, -1), (1, -2), (2, -1)),
)


# ---------------------------------------------------------------------------
# Lennard-Jones constants


@dataclass(frozen=True)
class LJConstants:
    K: float
    kappa: tuple[float, float, float, float]
    sigma: float
    eps_lattice: float

    @property
    def cb_modulus(self) -> float:
        """``kappa_2 + 9 kappa_4``, the lumped Cauchy-Born coefficient."""
        return self.kappa[1] + 9.0 * self.kappa[3]


def _lj_g(r, K):
    return 12.0 * K * (-K * r**-14 + r**-8)


def _lj_h(r, K):
    return 12.0 * K * (14.0 * K * r**-14 - 8.0 * r**-8)


def lj_constants(sigma: float | None = None) -> LJConstants:
    """Constants of the truncated LJ model.

    ``sigma`` defaults to the value that makes the lattice spacing one.
    """
    K = (1.0 + 3.0**-3) / (1.0 + 3.0**-6)
    if sigma is None:
        sigma = (K / 2.0) ** (1.0 / 6.0)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    r3 = np.sqrt(3.0)
    kappa = (_lj_g(1.0, K), _lj_h(1.0, K), _lj_g(r3, K), _lj_h(r3, K))
    return LJConstants(
        K=K,
        kappa=tuple(float(k) for k in kappa),
        sigma=float(sigma),
        eps_lattice=float((2.0 / K) ** (1.0 / 6.0) * sigma),
    )


# ---------------------------------------------------------------------------
# Stencils


class Stencil:
    """Translation-invariant difference operator ``u -> sum_mu C_mu T^mu u``.

    Parameters
    ----------
    coeffs : dict
        Maps integer offsets (tuples) to ``m x m`` real matrices.  Exact zero
        matrices are dropped so the offset set stays minimal.
    """

    def __init__(self, coeffs: dict, m: int | None = None):
        clean = {}
        for mu, c in coeffs.items():
            c = np.atleast_2d(np.asarray(c, dtype=float))
            if np.any(c != 0.0):
                key = tuple(int(s) for s in mu)
                clean[key] = clean.get(key, 0.0) + c
        if not clean and m is None:
            raise ValueError("empty stencil needs an explicit component count")
        self.coeffs = dict(sorted(clean.items()))
        self.m = m if m is not None else next(iter(self.coeffs.values())).shape[0]
        self.dim = len(next(iter(self.coeffs))) if self.coeffs else 2

    def __repr__(self):
        return f"Stencil(m={self.m}, offsets={list(self.coeffs)})"

    @property
    def offsets(self):
        return list(self.coeffs)

    def __getitem__(self, mu):
        return self.coeffs.get(tuple(mu), np.zeros((self.m, self.m)))

    def scaled(self, c: float) -> "Stencil":
        return Stencil({mu: c * v for mu, v in self.coeffs.items()}, m=self.m)

    def __add__(self, other: "Stencil") -> "Stencil":
        out = {mu: v.copy() for mu, v in self.coeffs.items()}
        for mu, v in other.coeffs.items():
            out[mu] = out.get(mu, 0.0) + v
        return Stencil(out, m=self.m)

    def block(self, i: int, j: int) -> "Stencil":
        """Scalar stencil of entry ``(i, j)``."""
        return Stencil({mu: v[i, j] for mu, v in self.coeffs.items()}, m=1)

    def extent(self, axis: int = 0) -> tuple[int, int]:
        vals = [mu[axis] for mu in self.coeffs]
        return (min(vals), max(vals)) if vals else (0, 0)

    def row_sum(self) -> np.ndarray:
        """Sum of all coefficients, off-origin entries first (in offset order)."""
        origin = (0,) * self.dim
        total = np.zeros((self.m, self.m))
        for mu, c in self.coeffs.items():
            if mu != origin:
                total = total + c
        return total + self.coeffs.get(origin, 0.0)

    def is_scalar(self, tol: float = 0.0) -> bool:
        """True when every coefficient is a multiple of the identity."""
        eye = np.eye(self.m)
        return all(np.max(np.abs(v - v[0, 0] * eye)) <= tol for v in self.coeffs.values())

    def apply(self, u) -> np.ndarray:
        u = np.asarray(u)
        if u.shape[0] != self.m:
            raise ValueError(f"expected {self.m} components, got {u.shape[0]}")
        out = np.zeros(u.shape, dtype=np.result_type(u, float))
        for mu, c in self.coeffs.items():
            out += np.einsum("ij,j...->i...", c, translate(u, mu))
        return out

    def evaluate(self, z) -> np.ndarray:
        """Substitute ``T^mu -> prod_j z_j^mu_j``.

        ``z`` has last axis of length ``dim``; returns ``(..., m, m)``.
        """
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape[:-1] + (self.m, self.m), dtype=complex)
        # origin last, as in row_sum, so that z = 1 reproduces it exactly
        origin = (0,) * self.dim
        items = [(mu, c) for mu, c in self.coeffs.items() if mu != origin]
        if origin in self.coeffs:
            items.append((origin, self.coeffs[origin]))
        for mu, c in items:
            phase = np.ones(z.shape[:-1], dtype=complex)
            for j, s in enumerate(mu):
                phase = phase * z[..., j] ** s
            out += phase[..., None, None] * c
        return out

    def symbol(self, k, eps: float) -> np.ndarray:
        """``sum_mu C_mu exp(2 pi i eps mu . k)`` for reciprocal coefficients ``k``."""
        k = np.asarray(k, dtype=float)
        return self.evaluate(np.exp(2j * np.pi * eps * k))

    def quadratic_limit(self) -> np.ndarray:
        """Coefficients ``Q[a, b]`` of the long-wave limit.

        For a zero-row-sum centrosymmetric stencil,
        ``sum_mu C_mu e^{i mu.t} = -1/2 sum_ab Q[a,b] t_a t_b + O(|t|^4)``,
        with ``Q[a, b] = sum_mu C_mu mu_a mu_b``.  Shape ``(d, d, m, m)``.
        """
        d = self.dim
        Q = np.zeros((d, d, self.m, self.m))
        for mu, c in self.coeffs.items():
            Q += np.multiply.outer(np.outer(mu, mu), c)
        return Q


def _scalar_stencil_from_shells(weights: dict, eps: float) -> Stencil:
    # accumulate the scaled entries in insertion order so that the row sum
    # cancels bit for bit
    coeffs = {mu: w / eps**2 for mu, w in weights.items()}
    total = np.zeros((2, 2))
    for mu in sorted(coeffs):
        total = total + coeffs[mu]
    coeffs[(0, 0)] = -total
    return Stencil(coeffs)


# ---------------------------------------------------------------------------
# Models


class _LinearModel:
    """Shared plumbing for models with linear force laws."""

    name = "linear"
    shells = TRIANGULAR_SHELLS
    dim = 2
    lattice = _TRI

    def atomistic_stencil(self, eps: float = 1.0) -> Stencil:
        raise NotImplementedError

    def continuum_stencil(self, eps: float = 1.0) -> Stencil:
        raise NotImplementedError

    def force_atomistic(self, u) -> np.ndarray:
        return self.atomistic_stencil(grid_eps(u)).apply(u)

    def force_continuum(self, u) -> np.ndarray:
        return self.continuum_stencil(grid_eps(u)).apply(u)


class HarmonicTriangular(_LinearModel):
    """Unit springs to both shells; lumped continuum ``(4/eps) sum_NN D^+``."""

    name = "harmonic"

    def atomistic_stencil(self, eps: float = 1.0) -> Stencil:
        return _scalar_stencil_from_shells({mu: np.eye(2) for mu in self.shells.all}, eps)

    def continuum_stencil(self, eps: float = 1.0) -> Stencil:
        return _scalar_stencil_from_shells({mu: 4.0 * np.eye(2) for mu in self.shells.first}, eps)


class LJTriangular(_LinearModel):
    """Linearized truncated Lennard-Jones model.

    Bond ``mu`` contributes ``(2/eps^2)(k_a I + k_b v v^T)`` with ``v`` the
    (unnormalized) Cartesian bond vector, ``(k_a, k_b) = (kappa_1, kappa_2)``
    on the first shell and ``(kappa_3, kappa_4)`` on the second.
    """

    name = "lj"

    def __init__(self, sigma: float | None = None):
        self.constants = lj_constants(sigma)

    def atomistic_stencil(self, eps: float = 1.0) -> Stencil:
        k1, k2, k3, k4 = self.constants.kappa
        w = {}
        for mu in self.shells.first:
            v = self.shells.geometric(mu)
            w[mu] = 2.0 * (k1 * np.eye(2) + k2 * np.outer(v, v))
        for mu in self.shells.second:
            v = self.shells.geometric(mu)
            w[mu] = 2.0 * (k3 * np.eye(2) + k4 * np.outer(v, v))
        return _scalar_stencil_from_shells(w, eps)

    def continuum_stencil(self, eps: float = 1.0) -> Stencil:
        c = 2.0 * self.constants.cb_modulus
        w = {}
        for mu in self.shells.first:
            v = self.shells.geometric(mu)
            w[mu] = c * np.outer(v, v)
        return _scalar_stencil_from_shells(w, eps)


@dataclass(frozen=True)
class PairPotential:
    """Radial pair energy with its first two derivatives."""

    phi: Callable
    dphi: Callable
    ddphi: Callable


class PairPotentialTriangular(_LinearModel):
    """Nonlinear pair interactions on the first two shells.

    The force at ``x`` is ``(1/eps) sum_mu phi_mu'(|b|) b/|b|`` with bond
    ``b = v_mu + D^+_mu u``; it is minus the gradient of
    ``E(u) = 1/2 sum_x sum_mu phi_mu(|b_mu(x)|)``.

    The continuum operator is the lumped nearest-neighbour stencil carrying
    the same long-wave limit as the linearized atomistic stencil.
    """

    name = "pair"

    def __init__(self, first: PairPotential, second: PairPotential | None = None):
        self.potentials = (first, second)

    def _shell_potentials(self):
        for shell, pot in zip((self.shells.first, self.shells.second), self.potentials):
            if pot is None:
                continue
            for mu in shell:
                yield mu, pot

    @staticmethod
    def _stiffness_coeffs(pot: PairPotential, r):
        """``(a, b)`` with bond stiffness ``a I + b bhat bhat^T``."""
        a = pot.dphi(r) / r
        return a, pot.ddphi(r) - a

    def bonds(self, u) -> dict:
        """Deformed bond vectors ``b_mu(x)``, each shape ``(2, ...)``."""
        u = np.asarray(u, dtype=float)
        eps = grid_eps(u)
        out = {}
        for mu, _ in self._shell_potentials():
            v = self.shells.geometric(mu).reshape((2,) + (1,) * (u.ndim - 1))
            out[mu] = v + (translate(u, mu) - u) / eps
        return out

    def energy(self, u) -> float:
        bonds = self.bonds(u)
        e = 0.0
        for mu, pot in self._shell_potentials():
            e += 0.5 * float(np.sum(pot.phi(np.linalg.norm(bonds[mu], axis=0))))
        return e

    def force_atomistic(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        eps = grid_eps(u)
        bonds = self.bonds(u)
        f = np.zeros_like(u)
        for mu, pot in self._shell_potentials():
            b = bonds[mu]
            r = np.linalg.norm(b, axis=0)
            f += pot.dphi(r) / r * b
        return f / eps

    def bond_stiffness(self, u) -> dict:
        """Per-bond tangent ``dF(x)/du(x+mu) * eps^2``, each ``(2, 2, ...)``."""
        bonds = self.bonds(u)
        out = {}
        for mu, pot in self._shell_potentials():
            b = bonds[mu]
            r = np.linalg.norm(b, axis=0)
            a, c = self._stiffness_coeffs(pot, r)
            bh = b / r
            out[mu] = a * np.eye(2).reshape((2, 2) + (1,) * (b.ndim - 1)) + c * np.einsum(
                "i...,j...->ij...", bh, bh
            )
        return out

    def atomistic_stencil(self, eps: float = 1.0) -> Stencil:
        w = {}
        for mu, pot in self._shell_potentials():
            v = self.shells.geometric(mu)
            r = np.linalg.norm(v)
            a, c = self._stiffness_coeffs(pot, r)
            w[mu] = a * np.eye(2) + c * np.outer(v, v) / r**2
        return _scalar_stencil_from_shells(w, eps)

    def continuum_stencil(self, eps: float = 1.0) -> Stencil:
        # hexagonal symmetry makes both shells' fourth-order bond tensors
        # isotropic, so the long-wave limit folds onto the first shell with
        # second-shell weights 3 (identity part) and 9 (bond part)
        iso, aniso = 0.0, 0.0
        for shell_weight, pot, mu0 in (
            (1.0, self.potentials[0], self.shells.first[0]),
            (3.0, self.potentials[1], self.shells.second[0]),
        ):
            if pot is None:
                continue
            r = np.linalg.norm(self.shells.geometric(mu0))
            a, c = self._stiffness_coeffs(pot, r)
            iso += shell_weight * a
            aniso += shell_weight**2 * c / r**2
        scale = max(abs(iso), abs(aniso), 1.0)
        if abs(iso) < 1e-12 * scale:
            iso = 0.0
        w = {}
        for mu in self.shells.first:
            v = self.shells.geometric(mu)
            w[mu] = iso * np.eye(2) + aniso * np.outer(v, v)
        return _scalar_stencil_from_shells(w, eps)


def lj_pair_potential(sigma: float | None = None) -> PairPotentialTriangular:
    """Nonlinear pair model whose linearization equals :class:`LJTriangular`.

    Both shells use ``phi(r) = 2K (K r^-12 - 2 r^-6)``, which gives
    ``phi'/r = 2 g`` and ``phi'' - phi'/r = 2 h``.  Because the second-shell
    bond term of the linear model carries ``|v|^2 = 3``, the second shell
    also gets ``2 kappa_4 (r - sqrt 3)^2`` to lift its longitudinal
    stiffness from ``2 kappa_4`` to ``6 kappa_4``.
    """
    c = lj_constants(sigma)
    K, k4 = c.K, c.kappa[3]
    r3 = np.sqrt(3.0)

    def phi(r):
        return 2.0 * K * (K * r**-12 - 2.0 * r**-6)

    def dphi(r):
        return 24.0 * K * (-K * r**-13 + r**-7)

    def ddphi(r):
        return 24.0 * K * (13.0 * K * r**-14 - 7.0 * r**-8)

    first = PairPotential(phi, dphi, ddphi)
    second = PairPotential(
        lambda r: phi(r) + 2.0 * k4 * (r - r3) ** 2,
        lambda r: dphi(r) + 4.0 * k4 * (r - r3),
        lambda r: ddphi(r) + 4.0 * k4,
    )
    model = PairPotentialTriangular(first, second)
    model.constants = c
    return model


def get_model(name: str, **params):
    name = name.lower()
    if name == "harmonic":
        return HarmonicTriangular()
    if name == "lj":
        return LJTriangular(params.get("sigma"))
    if name in ("pair", "lj_pair"):
        return lj_pair_potential(params.get("sigma"))
    raise ValueError(f"unknown model {name!r}")


# ---------------------------------------------------------------------------
# Forces and linearization


def grid_eps(u) -> float:
    """Grid spacing implied by a lattice function's shape."""
    u = np.asarray(u)
    n = u.shape[1]
    if n % 2 or any(s != n for s in u.shape[1:]):
        raise ValueError("lattice function must have shape (m, 2N, ..., 2N)")
    return 1.0 / n


def continuum_mask(shape) -> np.ndarray:
    """Indicator of the continuum half ``0 <= nu_1 < N`` (integer comparison)."""
    n1 = shape[0]
    mask = np.zeros(shape, dtype=bool)
    mask[: n1 // 2] = True
    return mask


def _check_components(model, u):
    u = np.asarray(u)
    if u.shape[0] != model.dim:
        raise ValueError(f"component mismatch: model has {model.dim}, field has {u.shape[0]}")
    return u


def force_atomistic(model, u) -> np.ndarray:
    return model.force_atomistic(_check_components(model, u))


def force_continuum(model, u) -> np.ndarray:
    return model.force_continuum(_check_components(model, u))


def force_hybrid(model, u, region=None) -> np.ndarray:
    """Pointwise selection between continuum and atomistic forces.

    ``region`` is a boolean array over the grid, True where the continuum
    force applies; ``None`` means the half ``nu_1 < N``.
    """
    u = _check_components(model, u)
    mask = continuum_mask(u.shape[1:]) if region is None else np.asarray(region, dtype=bool)
    return np.where(mask, model.force_continuum(u), model.force_atomistic(u))


@dataclass
class Linearization:
    atomistic: Stencil
    continuum: Stencil
    region: np.ndarray | None = None

    def stencil_at(self, nu) -> Stencil:
        """Stencil that governs the row at index ``nu``."""
        if self.region is None:
            return self.atomistic
        return self.continuum if self.region[tuple(nu)] else self.atomistic

    def symbol_at(self, nu, k, eps: float) -> np.ndarray:
        return self.stencil_at(nu).symbol(k, eps)


def linearize(model, eps: float = 1.0, region=None) -> Linearization:
    """Linearized stencils at ``u = 0``."""
    return Linearization(model.atomistic_stencil(eps), model.continuum_stencil(eps), region)


def symbol(stencil: Stencil, k, eps: float) -> np.ndarray:
    return stencil.symbol(k, eps)


def quadratic_form(stencil: Stencil) -> np.ndarray:
    """Long-wave coefficients of a reduced stencil, see :meth:`Stencil.quadratic_limit`."""
    return stencil.quadratic_limit()


def symbol_cb(model, k) -> np.ndarray:
    """Continuum elasticity symbol at reciprocal coefficients ``k``.

    Closed form of ``lim_{eps->0} h_eps``: with pairings ``t = 2 pi k``,
    ``h_CB = -1/2 sum_ab Q[a, b] t_a t_b`` where ``Q`` is the long-wave
    tensor of the reduced continuum stencil.
    """
    Q = model.continuum_stencil(1.0).quadratic_limit()
    t = 2.0 * np.pi * np.asarray(k, dtype=float)
    return -0.5 * np.einsum("...a,...b,abij->...ij", t, t, Q).astype(complex)


def cell_average(f, grid: Grid, order: int = 4) -> np.ndarray:
    """Average ``f`` over each lattice cell, then project to zero mean.

    Parameters
    ----------
    f : callable
        Takes fractional lattice coordinates of shape ``(d, ...)`` (period
        one in each) and returns values of shape ``(m, ...)``.
    grid : Grid
    order : int
        Gauss-Legendre points per direction.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    base = grid.fractional()
    total = None
    for idx in np.ndindex(*(order,) * grid.dim):
        shift = np.array([nodes[i] for i in idx]).reshape((grid.dim,) + (1,) * grid.dim)
        w = np.prod([weights[i] for i in idx])
        val = w * np.asarray(f(base + grid.eps * shift), dtype=float)
        total = val if total is None else total + val
    return project_zero_mean(total)
