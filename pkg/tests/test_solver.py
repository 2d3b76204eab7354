import numpy as np
import pytest

from latstab.lattice import Grid, norm_hk, norm_linf, project_zero_mean, triangular_lattice
from latstab.models import HarmonicTriangular, LJTriangular, cell_average, continuum_mask, lj_pair_potential
from latstab.solver import (
    EquilibriumProblem,
    NewtonDivergence,
    assemble_linear_system,
    convergence_study,
    fourier_load,
    h2_error,
    solve_equilibrium,
    stencil_matrix,
)

HARM = HarmonicTriangular()
LJ = LJTriangular()
LAT = triangular_lattice()


def mode_load(grid, k, comp=0, m=2, amp=1.0):
    """Real part of ``amp e_comp exp(i x . xi)`` sampled on the grid."""
    return amp * np.real(grid.plane_wave(k, comp, m))


def smooth_load(grid):
    f = fourier_load([(0, (1, 0), 1.0), (1, (1, 1), 0.5, 0.3)])
    return cell_average(f, grid)


# ---------------------------------------------------------------- assembly


@pytest.mark.parametrize("model", [HARM, LJ], ids=lambda m: m.name)
def test_operator_annihilates_constants(model):
    grid = Grid(LAT, 8)
    for scheme in ("atomistic", "continuum", "hybrid"):
        H = assemble_linear_system(EquilibriumProblem(model, grid, np.zeros((2,) + grid.shape), scheme))
        for c in ([1.0, 0.0], [0.0, 1.0]):
            u = np.repeat(np.asarray(c), grid.size)
            assert np.max(np.abs(H @ u)) <= 1e-12 * abs(H).max()


def test_atomistic_operator_on_plane_waves():
    grid = Grid(LAT, 8)
    H = assemble_linear_system(EquilibriumProblem(LJ, grid, np.zeros((2,) + grid.shape)))
    st = LJ.atomistic_stencil(grid.eps)
    for k in [(1, 0), (0, 3), (2, -1), (5, 4), (-3, 7)]:
        for comp in (0, 1):
            u = grid.plane_wave(k, comp)
            Hu = (H @ u.reshape(-1)).reshape(u.shape)
            expected = st.symbol(np.asarray(k), grid.eps)[:, comp].reshape(2, 1, 1) * u[comp]
            np.testing.assert_allclose(Hu, expected, atol=1e-9 * abs(H).max())


def test_hybrid_rows_equal_continuum_rows():
    grid = Grid(LAT, 8)
    prob = EquilibriumProblem(LJ, grid, np.zeros((2,) + grid.shape), "hybrid")
    H = assemble_linear_system(prob).toarray()
    Hc = stencil_matrix(LJ.continuum_stencil(grid.eps), grid.shape).toarray()
    Ha = stencil_matrix(LJ.atomistic_stencil(grid.eps), grid.shape).toarray()
    rows = np.tile(continuum_mask(grid.shape).reshape(-1), 2)
    assert np.array_equal(H[rows], Hc[rows])
    assert np.array_equal(H[~rows], Ha[~rows])


# ---------------------------------------------------------------- solves


def test_zero_load_gives_zero():
    grid = Grid(LAT, 8)
    for model in (HARM, LJ):
        sol = solve_equilibrium(EquilibriumProblem(model, grid, np.zeros((2,) + grid.shape), "hybrid"))
        assert np.max(np.abs(sol.u)) < 1e-14


@pytest.mark.parametrize("model", [HARM, LJ], ids=lambda m: m.name)
def test_spectral_inverse_oracle(model):
    grid = Grid(LAT, 8)
    k = np.array([1, 2])
    f = mode_load(grid, k, comp=0)
    sol = solve_equilibrium(EquilibriumProblem(model, grid, f), tol=1e-12)
    h = model.atomistic_stencil(grid.eps).symbol(k, grid.eps)
    v = np.linalg.solve(-h, np.array([1.0, 0.0]))
    wave = grid.plane_wave(k, 0)[0]
    expected = np.real(v.reshape(2, 1, 1) * wave)
    np.testing.assert_allclose(sol.u, expected, atol=1e-10 * np.max(np.abs(expected)))


def test_hybrid_without_continuum_equals_atomistic():
    grid = Grid(LAT, 8)
    f = smooth_load(grid)
    for model in (HARM, LJ):
        u_at = solve_equilibrium(EquilibriumProblem(model, grid, f, "atomistic")).u
        region = np.zeros(grid.shape, dtype=bool)
        u_h = solve_equilibrium(EquilibriumProblem(model, grid, f, "hybrid", region=region)).u
        assert np.max(np.abs(u_h - u_at)) <= 1e-12 * max(1.0, np.max(np.abs(u_at)))


@pytest.mark.parametrize("method", ["direct", "gmres"])
def test_residual_reverified_by_stencils(method):
    grid = Grid(LAT, 8)
    f = smooth_load(grid)
    sol = solve_equilibrium(EquilibriumProblem(LJ, grid, f, "hybrid"), tol=1e-11, method=method)
    assert abs(sol.u.mean(axis=(1, 2))).max() < 1e-10
    # independent route: apply the stencils pointwise and select by region
    mask = continuum_mask(grid.shape)
    F = np.where(mask, LJ.continuum_stencil(grid.eps).apply(sol.u), LJ.atomistic_stencil(grid.eps).apply(sol.u))
    r = project_zero_mean(-F) - f
    assert norm_hk(r, 0, grid.eps) <= 1e-9 * norm_hk(f, 0, grid.eps)


def test_gmres_matches_direct():
    grid = Grid(LAT, 16)
    f = smooth_load(grid)
    for model in (HARM, LJ):
        prob = EquilibriumProblem(model, grid, f, "hybrid")
        u_d = solve_equilibrium(prob, method="direct").u
        sol = solve_equilibrium(prob, tol=1e-12, method="gmres")
        assert sol.solver_meta["method"] == "gmres" and sol.iterations >= 1
        assert np.max(np.abs(sol.u - u_d)) <= 1e-8 * np.max(np.abs(u_d))


def test_hybrid_obeys_atomistic_equation_in_atomistic_region():
    grid = Grid(LAT, 8)
    f = smooth_load(grid)
    sol = solve_equilibrium(EquilibriumProblem(HARM, grid, f, "hybrid"))
    mask = continuum_mask(grid.shape)
    Fa = HARM.atomistic_stencil(grid.eps).apply(sol.u)
    gap = (-Fa - f)[:, ~mask]
    # the projection adds one constant per component everywhere
    spread = gap - gap.mean(axis=1, keepdims=True)
    assert np.max(np.abs(spread)) <= 1e-9 * np.max(np.abs(f))


def test_load_must_be_zero_mean():
    grid = Grid(LAT, 8)
    f = np.ones((2,) + grid.shape)
    with pytest.raises(ValueError, match="zero mean"):
        solve_equilibrium(EquilibriumProblem(HARM, grid, f))


def test_problem_validation():
    grid = Grid(LAT, 8)
    with pytest.raises(ValueError):
        EquilibriumProblem(HARM, grid, np.zeros((2,) + grid.shape), scheme="bogus")
    with pytest.raises(ValueError):
        EquilibriumProblem(HARM, grid, np.zeros((1,) + grid.shape))
    with pytest.raises(ValueError):
        solve_equilibrium(EquilibriumProblem(HARM, grid, np.zeros((2,) + grid.shape)), method="cg")
    with pytest.raises(ValueError, match="pair-potential"):
        solve_equilibrium(EquilibriumProblem(HARM, grid, np.zeros((2,) + grid.shape), nonlinear=True))


# ---------------------------------------------------------------- nonlinear


def test_newton_small_load_close_to_linear():
    pair = lj_pair_potential()
    grid = Grid(LAT, 8)
    f = 1e-3 * smooth_load(grid)
    sol = solve_equilibrium(EquilibriumProblem(pair, grid, f, "hybrid", nonlinear=True), tol=1e-10)
    assert sol.residual_norm <= 1e-10
    assert sol.solver_meta["method"] == "newton"
    u_lin = solve_equilibrium(EquilibriumProblem(pair, grid, f, "hybrid")).u
    diff = np.max(np.abs(sol.u - u_lin))
    # quadratic in the load: the gap is far below the displacement itself
    assert diff <= 1e-2 * np.max(np.abs(u_lin))
    # halving the load quarters the gap
    sol2 = solve_equilibrium(EquilibriumProblem(pair, grid, 0.5 * f, "hybrid", nonlinear=True), tol=1e-12)
    u_lin2 = solve_equilibrium(EquilibriumProblem(pair, grid, 0.5 * f, "hybrid")).u
    ratio = diff / np.max(np.abs(sol2.u - u_lin2))
    assert 3.0 < ratio < 5.0


def test_newton_divergence_carries_iterate():
    pair = lj_pair_potential()
    grid = Grid(LAT, 8)
    f = 1e-2 * smooth_load(grid)
    with pytest.raises(NewtonDivergence) as info:
        solve_equilibrium(EquilibriumProblem(pair, grid, f, nonlinear=True), tol=1e-14, max_iter=1)
    assert info.value.last.shape == (2,) + grid.shape


# ---------------------------------------------------------------- consistency and convergence


def test_force_consistency_second_order():
    def u_smooth(t):
        return np.stack([np.sin(2 * np.pi * t[0]) * np.cos(2 * np.pi * t[1]), np.cos(2 * np.pi * (t[0] + t[1]))])

    for model in (HARM, LJ):
        errs = []
        for n in (8, 16, 32):
            grid = Grid(LAT, n)
            u = u_smooth(grid.fractional())
            diff = model.atomistic_stencil(grid.eps).apply(u) - model.continuum_stencil(grid.eps).apply(u)
            errs.append(norm_linf(project_zero_mean(diff)))
        for a, b in zip(errs, errs[1:]):
            assert 3.0 <= a / b <= 5.0


def test_h2_error_cases():
    grid = Grid(LAT, 8)
    eps = grid.eps
    u = smooth_load(grid)
    assert h2_error(u, u) == (0.0, 0.0, 0.0)
    l2, h1, h2 = h2_error(u, u + 0.25)
    assert abs(l2 - 0.25 * np.sqrt(2)) < 1e-14 and abs(h1 - l2) < 1e-14 and abs(h2 - l2) < 1e-14
    k = np.array([2, 3])
    e = mode_load(grid, k, comp=0)
    lam = 4.0 / eps**2 * np.sin(np.pi * eps * k) ** 2
    l2_ref = np.sqrt(0.5)
    h1_ref = np.sqrt(0.5 * (1 + lam.sum()))
    h2_ref = np.sqrt(0.5 * (1 + lam.sum() + lam[0] ** 2 + lam[0] * lam[1] + lam[1] ** 2))
    np.testing.assert_allclose(h2_error(e, 0 * e), (l2_ref, h1_ref, h2_ref), rtol=1e-12)
    with pytest.raises(ValueError, match="grid mismatch"):
        h2_error(u, u[:, :4])


@pytest.mark.parametrize("model", [HARM, LJ], ids=lambda m: m.name)
def test_convergence_small(model):
    table = convergence_study(model, fourier_load([(0, (1, 0), 1.0), (1, (0, 1), 0.5)]), (8, 16, 32))
    assert [r["N"] for r in table.rows] == [8, 16, 32]
    for r in table.rows:
        assert r["e_l2"] <= r["e_h1"] <= r["e_h2"]
    assert table.fitted_order >= 1.8
    assert all(3.2 <= q <= 4.8 for q in table.ratios)


def test_convergence_validation():
    load = fourier_load([(0, (1, 0), 1.0)])
    with pytest.raises(ValueError):
        convergence_study(HARM, load, (16, 8))
    with pytest.raises(ValueError):
        convergence_study(HARM, load, (8, 12))
    table = convergence_study(HARM, load, (8,))
    assert np.isnan(table.fitted_order)
