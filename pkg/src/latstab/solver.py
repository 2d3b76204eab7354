"""
Equilibrium solves and convergence studies.

The equilibrium equation is ``Pi(-F[u]) = f`` for a zero-mean load ``f``
and zero-mean displacement ``u``, where ``F`` is the atomistic, continuum
or hybrid force and ``Pi`` subtracts the mean.  With the sign convention of
:mod:`latstab.models` the linear operator ``-H`` is positive semidefinite,
its kernel being the constant fields.

Linear systems are assembled as sparse matrices over the flattened field
``u.reshape(-1)`` (component-major).  Two solution paths are offered:

``direct``
    sparse LU of the bordered matrix ``[[-H, C], [C^T, 0]]`` with ``C`` the
    constant fields; this enforces ``sum u = 0`` and absorbs the mean of
    ``-H u`` into the multiplier, which is exactly ``Pi(-H u) = f``;
``gmres``
    restarted GMRES on the mean-free subspace, preconditioned by the exact
    inverse of the atomistic symbol applied with the FFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import Grid, dft, idft, norm_hk, project_zero_mean, triangular_lattice
from .models import PairPotentialTriangular, Stencil, cell_average, continuum_mask

__all__ = [
    "EquilibriumProblem",
    "EquilibriumSolution",
    "NewtonDivergence",
    "ConvergenceTable",
    "stencil_matrix",
    "assemble_linear_system",
    "solve_equilibrium",
    "h2_error",
    "fourier_load",
    "convergence_study",
]

SCHEMES = ("atomistic", "continuum", "hybrid")


@dataclass
class EquilibriumProblem:
    """Zero-mean load on a grid together with a model and a scheme.

    ``region`` overrides the continuum indicator used by the hybrid scheme
    (default: ``nu_1 < N``).
    """

    model: object
    grid: Grid
    load: np.ndarray
    scheme: str = "atomistic"
    nonlinear: bool = False
    region: np.ndarray | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        self.load = np.asarray(self.load, dtype=float)
        if self.load.shape != (self.model.dim,) + self.grid.shape:
            raise ValueError("load shape does not match model components and grid")

    @property
    def mask(self) -> np.ndarray:
        if self.scheme == "atomistic":
            return np.zeros(self.grid.shape, dtype=bool)
        if self.scheme == "continuum":
            return np.ones(self.grid.shape, dtype=bool)
        return continuum_mask(self.grid.shape) if self.region is None else np.asarray(self.region, bool)


@dataclass
class EquilibriumSolution:
    u: np.ndarray
    residual_norm: float
    iterations: int
    solver_meta: dict = field(default_factory=dict)


class NewtonDivergence(RuntimeError):
    """Newton iteration did not converge; ``last`` holds the final iterate."""

    def __init__(self, msg, last):
        super().__init__(msg)
        self.last = last


# ---------------------------------------------------------------------------
# assembly


def _flat_index(shape, m):
    return np.arange(m * int(np.prod(shape))).reshape((m,) + tuple(shape))


def stencil_matrix(stencil: Stencil, shape, rows=None) -> sp.csr_matrix:
    """Sparse periodic matrix of a stencil, optionally restricted to some rows.

    ``rows`` is a boolean mask over the grid; rows outside it are empty.
    """
    m = stencil.m
    idx = _flat_index(shape, m)
    sel = np.ones(shape, dtype=bool) if rows is None else np.asarray(rows, dtype=bool)
    I, J, V = [], [], []
    for mu, c in stencil.coeffs.items():
        shifted = np.roll(idx, shift=tuple(-s for s in mu), axis=tuple(range(1, idx.ndim)))
        for i in range(m):
            for j in range(m):
                if c[i, j] == 0.0:
                    continue
                I.append(idx[i][sel])
                J.append(shifted[j][sel])
                V.append(np.full(int(sel.sum()), c[i, j]))
    n = idx.size
    if not I:
        return sp.csr_matrix((n, n))
    return sp.csr_matrix((np.concatenate(V), (np.concatenate(I), np.concatenate(J))), shape=(n, n))


def assemble_linear_system(problem: EquilibriumProblem) -> sp.csr_matrix:
    """Sparse matrix of the linearized force ``H`` of the chosen scheme.

    Rows inside the continuum region come from the continuum stencil and
    the others from the atomistic stencil, so the hybrid matrix is in
    general nonsymmetric.  The projection is applied by the solvers.
    """
    eps = problem.grid.eps
    shape = problem.grid.shape
    mask = problem.mask
    H = stencil_matrix(problem.model.atomistic_stencil(eps), shape, ~mask)
    if mask.any():
        H = H + stencil_matrix(problem.model.continuum_stencil(eps), shape, mask)
    return H.tocsr()


def _constants(m, size):
    C = np.zeros((m * size, m))
    for i in range(m):
        C[i * size : (i + 1) * size, i] = 1.0 / np.sqrt(size)
    return C


def _bordered_solve(A: sp.spmatrix, rhs: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    n = A.shape[0]
    C = sp.csr_matrix(_constants(m, n // m))
    K = sp.bmat([[A, C], [C.T, None]], format="csc")
    sol = spla.spsolve(K, np.concatenate([rhs, np.zeros(m)]))
    if not np.all(np.isfinite(sol)):
        raise np.linalg.LinAlgError("singular bordered system")
    return sol[:n], sol[n:]


def _spectral_preconditioner(problem: EquilibriumProblem):
    """Exact inverse of ``-H_at`` on mean-free fields via the FFT."""
    grid = problem.grid
    m = problem.model.dim
    st = problem.model.atomistic_stencil(grid.eps)
    k = np.moveaxis(grid.wavenumbers, 0, -1)
    h = -st.symbol(k, grid.eps)
    zero = np.all(grid.wavenumbers == 0, axis=0)
    h[zero] = np.eye(m)
    hinv = np.linalg.inv(h)
    hinv[zero] = 0.0
    shape = (m,) + grid.shape

    def apply(r):
        s = dft(r.reshape(shape), grid.eps)
        s = np.einsum("...ij,j...->i...", hinv, s)
        return np.real(idft(s, grid.eps)).reshape(-1)

    return apply


def _gmres_solve(A, rhs, problem, tol, max_iter):
    m = problem.model.dim
    shape = (m,) + problem.grid.shape

    def proj(v):
        return project_zero_mean(v.reshape(shape)).reshape(-1)

    n = A.shape[0]
    op = spla.LinearOperator((n, n), matvec=lambda v: proj(A @ proj(v)), dtype=float)
    pre = _spectral_preconditioner(problem)
    prec = spla.LinearOperator((n, n), matvec=lambda v: proj(pre(proj(v))), dtype=float)
    count = {"n": 0}

    def cb(_):
        count["n"] += 1

    x, info = spla.gmres(
        op, proj(rhs), rtol=tol, atol=0.0, restart=50, maxiter=max_iter, M=prec,
        callback=cb, callback_type="pr_norm",
    )
    if info != 0:
        raise RuntimeError(f"GMRES did not converge (info={info})")
    return proj(x), count["n"]


def _residual_norm(r, grid: Grid) -> float:
    return norm_hk(r.reshape((-1,) + grid.shape), 0, grid.eps)


# ---------------------------------------------------------------------------
# nonlinear forces and tangents


def _nonlinear_force(problem: EquilibriumProblem, u) -> np.ndarray:
    model = problem.model
    mask = problem.mask
    f_at = model.force_atomistic(u)
    if not mask.any():
        return f_at
    return np.where(mask, model.force_continuum(u), f_at)


def _tangent_matrix(problem: EquilibriumProblem, u) -> sp.csr_matrix:
    """Sparse Jacobian of the (hybrid) pair force at ``u``."""
    model = problem.model
    grid = problem.grid
    m = model.dim
    shape = grid.shape
    idx = _flat_index(shape, m)
    sel = ~problem.mask
    I, J, V = [], [], []
    for mu, Kmu in model.bond_stiffness(u).items():
        shifted = np.roll(idx, shift=tuple(-s for s in mu), axis=(1, 2))
        Kmu = Kmu / grid.eps**2
        for i in range(m):
            for j in range(m):
                vals = Kmu[i, j][sel]
                I += [idx[i][sel], idx[i][sel]]
                J += [shifted[j][sel], idx[j][sel]]
                V += [vals, -vals]
    n = idx.size
    T = sp.csr_matrix((np.concatenate(V), (np.concatenate(I), np.concatenate(J))), shape=(n, n))
    if problem.mask.any():
        T = T + stencil_matrix(model.continuum_stencil(grid.eps), shape, problem.mask)
    return T


def _newton(problem: EquilibriumProblem, tol: float, max_iter: int) -> EquilibriumSolution:
    grid = problem.grid
    m = problem.model.dim
    f = problem.load.reshape(-1)
    u = np.zeros((m,) + grid.shape)
    history = []
    for it in range(max_iter + 1):
        r = project_zero_mean(-_nonlinear_force(problem, u)).reshape(-1) - f
        rn = _residual_norm(r, grid)
        history.append(rn)
        if not np.isfinite(rn):
            break
        if rn <= tol:
            return EquilibriumSolution(u, rn, it, {"method": "newton", "history": history})
        J = -_tangent_matrix(problem, u)
        du, _ = _bordered_solve(J, -r, m)
        u = project_zero_mean(u + du.reshape(u.shape))
    raise NewtonDivergence(f"Newton did not converge in {max_iter} iterations (residual {history[-1]:.3e})", u)


# ---------------------------------------------------------------------------
# public solve


def solve_equilibrium(
    problem: EquilibriumProblem,
    tol: float = 1e-10,
    method: str = "direct",
    max_iter: int = 200,
) -> EquilibriumSolution:
    """Solve ``Pi(-F[u]) = f`` for zero-mean ``u``.

    Parameters
    ----------
    tol : float
        Residual tolerance in the discrete ``L2`` norm; for ``gmres`` it is
        relative to the load.
    method : {"direct", "gmres"}
        Linear solver (ignored for the nonlinear Newton path, whose steps use
        the direct bordered solve).
    """
    grid = problem.grid
    m = problem.model.dim
    f = problem.load
    if abs(f.mean(axis=tuple(range(1, f.ndim)))).max() > 1e-12 * max(1.0, np.abs(f).max()):
        raise ValueError("load must have zero mean")
    if problem.nonlinear:
        if not isinstance(problem.model, PairPotentialTriangular):
            raise ValueError("nonlinear solves need a pair-potential model")
        return _newton(problem, tol, max_iter)
    A = -assemble_linear_system(problem)
    rhs = f.reshape(-1)
    if method == "direct":
        x, lam = _bordered_solve(A, rhs, m)
        iters, meta = 1, {"method": "direct", "multiplier": lam.tolist()}
    elif method == "gmres":
        x, iters = _gmres_solve(A, rhs, problem, tol, max_iter)
        meta = {"method": "gmres"}
    else:
        raise ValueError(f"unknown method {method!r}")
    u = project_zero_mean(x.reshape((m,) + grid.shape))
    r = project_zero_mean((A @ u.reshape(-1)).reshape(u.shape)) - f
    rn = norm_hk(r, 0, grid.eps)
    bound = tol * max(1.0, norm_hk(f, 0, grid.eps)) if method == "gmres" else max(tol, 1e-8 * norm_hk(f, 0, grid.eps))
    if rn > bound:
        raise RuntimeError(f"solver residual {rn:.3e} above tolerance {bound:.3e}")
    return EquilibriumSolution(u, rn, iters, meta)


# ---------------------------------------------------------------------------
# errors and convergence


def h2_error(u1, u2, eps: float | None = None) -> tuple[float, float, float]:
    """``(L2, H1, H2)`` discrete norms of ``u1 - u2`` (raw difference)."""
    u1, u2 = np.asarray(u1), np.asarray(u2)
    if u1.shape != u2.shape:
        raise ValueError("grid mismatch")
    eps = 1.0 / u1.shape[1] if eps is None else eps
    e = u1 - u2
    return norm_hk(e, 0, eps), norm_hk(e, 1, eps), norm_hk(e, 2, eps)


def fourier_load(modes, dim: int = 2):
    """Load handle ``f_c(t) = sum a sin(2 pi k . t + phase)`` on fractional coordinates.

    ``modes`` is a sequence of ``(component, k, amplitude[, phase])``.
    """
    modes = [tuple(md) + (0.0,) * (4 - len(md)) for md in modes]

    def f(t):
        out = np.zeros((dim,) + t.shape[1:])
        for comp, k, amp, phase in modes:
            arg = 2.0 * np.pi * np.tensordot(np.asarray(k, dtype=float), t, axes=1) + phase
            out[int(comp)] += amp * np.sin(arg)
        return out

    return f


@dataclass
class ConvergenceTable:
    rows: list
    fitted_order: float

    @property
    def ratios(self) -> list:
        e = [r["e_h2"] for r in self.rows]
        return [e[i] / e[i + 1] for i in range(len(e) - 1)]


def _fit_order(eps, err) -> float:
    if len(eps) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(eps), np.log(err), 1)
    return float(slope)


def convergence_study(
    model,
    load,
    N_list=(8, 16, 32, 64),
    nonlinear: bool = False,
    tol: float = 1e-10,
    method: str = "direct",
    max_iter: int = 200,
) -> ConvergenceTable:
    """Hybrid against atomistic solutions under ``eps`` refinement.

    ``N_list`` holds the half-widths ``N`` (``eps = 1/(2N)``); ``load`` is a
    handle for :func:`latstab.models.cell_average`.
    """
    N_list = list(N_list)
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be strictly increasing")
    for n in N_list:
        if n < 8 or n & (n - 1):
            raise ValueError("each N must be a power of two >= 8")
    lat = getattr(model, "lattice", triangular_lattice())
    rows = []
    for n in N_list:
        grid = Grid(lat, n)
        f = cell_average(load, grid)
        sols = {}
        for scheme in ("atomistic", "hybrid"):
            prob = EquilibriumProblem(model, grid, f, scheme=scheme, nonlinear=nonlinear)
            sols[scheme] = solve_equilibrium(prob, tol=tol, method=method, max_iter=max_iter).u
        l2, h1, h2 = h2_error(sols["hybrid"], sols["atomistic"], grid.eps)
        rows.append({"N": n, "eps": grid.eps, "e_l2": l2, "e_h1": h1, "e_h2": h2})
    order = _fit_order([r["eps"] for r in rows], [r["e_h2"] for r in rows])
    return ConvergenceTable(rows=rows, fitted_order=order)
