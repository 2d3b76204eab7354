"""
Bravais lattices, periodic grids and lattice functions.

Lattice functions are plain numpy arrays with the component axis first,
``u.shape == (m, 2N, ..., 2N)``.  Index ``nu`` addresses the point
``x_nu = eps * sum_j nu_j a_j`` and every array is understood as the
periodic extension of its values.

Reciprocal points are stored by their integer coefficients ``k`` against
the reciprocal basis, ``-N <= k_j < N``.  The pairing of a translation
``eps * mu`` with ``xi = sum_j k_j b_j`` is then ``2 pi eps mu . k`` exactly,
which is how every symbol in this package is evaluated.

Fourier convention::

    u_hat(xi) = (eps / 2 pi)^d  sum_x exp(-i xi . x) u(x)
    u(x)      = (2 pi)^d sum_xi exp(i x . xi) u_hat(xi)

so that ``eps^d sum_x |u|^2 == (2 pi)^(2d) sum_xi |u_hat|^2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Lattice",
    "Grid",
    "make_lattice",
    "square_lattice",
    "triangular_lattice",
    "translate",
    "forward_diff",
    "backward_diff",
    "multi_diff",
    "dft",
    "idft",
    "norm_hk",
    "norm_hk_spectral",
    "norm_winf",
    "norm_linf",
    "lambda_sq",
    "lambda0_sq",
    "project_zero_mean",
    "multi_indices",
]


@dataclass(frozen=True, eq=False)
class Lattice:
    """Bravais lattice with basis rows ``basis[j] = a_j``."""

    basis: np.ndarray
    reciprocal: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def to_cartesian(self, coeffs):
        """Map lattice coefficients (last axis d) to Cartesian vectors."""
        return np.asarray(coeffs, dtype=float) @ self.basis

    def reciprocal_vector(self, k):
        """Cartesian wave vector ``sum_j k_j b_j``."""
        return np.asarray(k, dtype=float) @ self.reciprocal


def make_lattice(basis) -> Lattice:
    basis = np.array(basis, dtype=float)
    if basis.ndim != 2 or basis.shape[0] != basis.shape[1] or not 1 <= basis.shape[0] <= 3:
        raise ValueError("basis must be d vectors in R^d with d in {1, 2, 3}")
    if abs(np.linalg.det(basis)) <= 1e-12:
        raise ValueError("degenerate lattice")
    # a_j . b_k = 2 pi delta_jk  <=>  B = 2 pi A^{-T}
    reciprocal = 2.0 * np.pi * np.linalg.inv(basis).T
    return Lattice(basis=basis, reciprocal=reciprocal)


def square_lattice() -> Lattice:
    return make_lattice([[1.0, 0.0], [0.0, 1.0]])


def triangular_lattice() -> Lattice:
    return make_lattice([[1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])


@dataclass(frozen=True, eq=False)
class Grid:
    """Periodic grid Omega_eps with ``2N`` points per lattice direction."""

    lattice: Lattice
    n_half: int

    def __post_init__(self):
        if int(self.n_half) != self.n_half or self.n_half < 1:
            raise ValueError("n_half must be a positive integer")

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @property
    def eps(self) -> float:
        return 1.0 / (2 * self.n_half)

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.n_half,) * self.dim

    @property
    def size(self) -> int:
        return (2 * self.n_half) ** self.dim

    @cached_property
    def indices(self) -> np.ndarray:
        """Integer index ``nu`` of every point, shape ``(d, 2N, ..., 2N)``."""
        return np.stack(np.meshgrid(*[np.arange(n) for n in self.shape], indexing="ij"))

    def fractional(self) -> np.ndarray:
        """Lattice coordinates ``eps * nu`` (in ``[0, 1)^d``), shape ``(d, ...)``."""
        return self.indices * self.eps

    def points(self) -> np.ndarray:
        """Cartesian coordinates, shape ``(d, 2N, ..., 2N)``."""
        return np.tensordot(self.lattice.basis.T, self.fractional(), axes=1)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer reciprocal coordinates ``k`` in spectral storage order.

        Spectral arrays are stored in ``numpy.fft`` order, so entry ``i``
        along an axis corresponds to ``k = i`` for ``i < N`` and ``k = i - 2N``
        otherwise.  Shape ``(d, 2N, ..., 2N)``.
        """
        k1 = np.fft.fftfreq(2 * self.n_half, d=1.0 / (2 * self.n_half)).round().astype(int)
        return np.stack(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    def pairings(self) -> np.ndarray:
        """``xi_j = a_j . xi = 2 pi k_j`` for every reciprocal point."""
        return 2.0 * np.pi * self.wavenumbers

    def plane_wave(self, k, component: int = 0, m: int | None = None) -> np.ndarray:
        """``e_component * exp(i x . xi)`` sampled on the grid."""
        m = self.dim if m is None else m
        k = np.asarray(k).reshape((self.dim,) + (1,) * self.dim)
        phase = np.exp(2j * np.pi * self.eps * np.sum(k * self.indices, axis=0))
        u = np.zeros((m,) + self.shape, dtype=complex)
        u[component] = phase
        return u


def translate(u, mu) -> np.ndarray:
    """``(T^mu u)(nu) = u(nu + mu)`` with periodic wrap."""
    u = np.asarray(u)
    mu = tuple(int(s) for s in mu)
    axes = tuple(range(u.ndim - len(mu), u.ndim))
    return np.roll(u, shift=tuple(-s for s in mu), axis=axes)


def forward_diff(u, mu, eps: float) -> np.ndarray:
    return (translate(u, mu) - u) / eps


def backward_diff(u, mu, eps: float) -> np.ndarray:
    return (u - translate(u, tuple(-s for s in mu))) / eps


def _unit(d: int, j: int) -> tuple[int, ...]:
    e = [0] * d
    e[j] = 1
    return tuple(e)


def multi_diff(u, alpha, eps: float) -> np.ndarray:
    """``D^alpha u = prod_j (D^+_{e_j})^{alpha_j} u`` along index directions."""
    d = len(alpha)
    out = np.asarray(u)
    for j, a in enumerate(alpha):
        for _ in range(int(a)):
            out = forward_diff(out, _unit(d, j), eps)
    return out


def multi_indices(d: int, k: int):
    """All multi-indices ``alpha >= 0`` in ``Z^d`` with ``|alpha| <= k``."""
    return [a for a in itertools.product(range(k + 1), repeat=d) if sum(a) <= k]


def dft(u, eps: float) -> np.ndarray:
    """Discrete Fourier transform with the ``(eps / 2 pi)^d`` normalization."""
    u = np.asarray(u)
    d = u.ndim - 1
    axes = tuple(range(1, u.ndim))
    return (eps / (2.0 * np.pi)) ** d * np.fft.fftn(u, axes=axes)


def idft(s, eps: float) -> np.ndarray:
    """Exact inverse of :func:`dft`.

    Equals ``(2 pi)^d sum_xi exp(i x . xi) s(xi)``; the factor ``(2 pi)^d``
    is what makes it invert the forward normalization.
    """
    s = np.asarray(s)
    d = s.ndim - 1
    axes = tuple(range(1, s.ndim))
    return (2.0 * np.pi / eps) ** d * np.fft.ifftn(s, axes=axes)


def norm_hk(u, k: int, eps: float) -> float:
    """Discrete ``H^k`` norm ``(sum_{|alpha|<=k} eps^d sum_x |D^alpha u|^2)^(1/2)``."""
    u = np.asarray(u)
    d = u.ndim - 1
    total = 0.0
    for alpha in multi_indices(d, k):
        total += eps**d * np.sum(np.abs(multi_diff(u, alpha, eps)) ** 2)
    return float(np.sqrt(total))


def norm_hk_spectral(u, k: int, eps: float) -> float:
    """Same norm as :func:`norm_hk`, evaluated on the Fourier side."""
    u = np.asarray(u)
    d = u.ndim - 1
    n = u.shape[1] // 2
    u_hat = dft(u, eps)
    k1 = np.fft.fftfreq(2 * n, d=1.0 / (2 * n))
    kk = np.meshgrid(*([k1] * d), indexing="ij")
    lam_j = [4.0 / eps**2 * np.sin(np.pi * eps * kj) ** 2 for kj in kk]
    weight = np.zeros_like(lam_j[0])
    for alpha in multi_indices(d, k):
        term = np.ones_like(weight)
        for j, a in enumerate(alpha):
            term = term * lam_j[j] ** a
        weight += term
    total = (2.0 * np.pi) ** (2 * d) * np.sum(weight * np.sum(np.abs(u_hat) ** 2, axis=0))
    return float(np.sqrt(total))


def _pointwise_abs(v) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(v) ** 2, axis=0))


def norm_linf(u) -> float:
    return float(np.max(_pointwise_abs(np.asarray(u))))


def norm_winf(u, k: int, eps: float) -> float:
    """``sum_{|alpha|<=k} max_x |D^alpha u(x)|``."""
    u = np.asarray(u)
    d = u.ndim - 1
    return float(sum(norm_linf(multi_diff(u, alpha, eps)) for alpha in multi_indices(d, k)))


def lambda0_sq(xi, eps: float):
    """``sum_j 4/eps^2 sin^2(eps xi_j / 2)`` for pairings ``xi_j`` (last axis)."""
    xi = np.asarray(xi, dtype=float)
    return np.sum(4.0 / eps**2 * np.sin(eps * xi / 2.0) ** 2, axis=-1)


def lambda_sq(xi, eps: float):
    """``Lambda_eps^2(xi) = 1 + Lambda_{0,eps}^2(xi)``."""
    return 1.0 + lambda0_sq(xi, eps)


def project_zero_mean(u) -> np.ndarray:
    """``u - eps^d sum_x u`` per component (``eps^d`` times point count is 1)."""
    u = np.asarray(u)
    axes = tuple(range(1, u.ndim))
    return u - u.mean(axis=axes, keepdims=True)
