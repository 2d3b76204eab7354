"""Acceptance suite: one test per criterion, each recording a pass/fail line.

Run ``pytest tests/test_acceptance.py -v -s`` to see the lines as they are
produced; they are also collected in the terminal summary.
"""

import time

import numpy as np
import pytest

from latstab.fold import apply_folded, fold, fold_field, two_region_residual
from latstab.lattice import dft
from latstab.models import HarmonicTriangular, LJTriangular, lj_constants, lj_pair_potential, symbol_cb
from latstab.solver import convergence_study, fourier_load
from latstab.stability import (
    assumption_b_check,
    bulk_stability_scan,
    char_poly,
    example2_mode1_matrix,
    example2_mode3_matrix,
    example_inside_roots,
    folded_for,
    mode1_scan,
    mode2_check,
    mode3_check,
    roots_classified,
    supplementary_check,
)

HARM = HarmonicTriangular()
LJ = LJTriangular()

# target values
LJ_MIN_ABS_DET = 0.006976899435726176
LJ_MODE3_ROOTS = [-0.0042, 0.0293, 0.8945 - 0.0969j, 0.8945 + 0.0969j]

# ten wavevectors (integer coordinates on the reciprocal basis)
SYMBOL_K = [(1, 0), (0, 1), (1, 1), (2, -1), (1, 2), (3, 0), (-2, 3), (2, 2), (4, 1), (1, -3)]


def closed_form_z1(theta):
    c = np.cos(theta)
    return 2 * np.cos(theta / 2) / (3 - c + np.sqrt((7 - c) * (1 - c))) * np.exp(0.5j * theta)


def fd_jacobian_stencil(model, n=4, h=1e-6):
    """Central-difference ``dF(x)/du(x+mu)`` at ``u = 0`` from single-site probes."""
    shape = (2, 2 * n, 2 * n)
    p = (n, n)
    out = {}
    for beta in range(2):
        e = np.zeros(shape)
        e[(beta,) + p] = h
        dF = (model.force_atomistic(e) - model.force_atomistic(-e)) / (2 * h)
        for mu in model.atomistic_stencil(1.0).offsets:
            x = tuple((p[j] - mu[j]) % (2 * n) for j in range(2))
            out.setdefault(mu, np.zeros((2, 2)))[:, beta] = dF[(slice(None),) + x]
    return out


# ---------------------------------------------------------------- 1


def test_criterion_01_lj_determinant_minimum(acceptance):
    t0 = time.perf_counter()
    scan = mode1_scan(lambda z: example2_mode1_matrix(z, LJ, precision="double"), M=1000)
    elapsed = time.perf_counter() - t0
    got = scan["min_abs_det"]
    rel = abs(got - LJ_MIN_ABS_DET) / LJ_MIN_ABS_DET
    ok = rel <= 1e-6 and elapsed < 30.0
    acceptance(
        1,
        ok,
        f"min|det A| = {got:.6e} at theta = {scan['argmin_theta']:.6f}, target {LJ_MIN_ABS_DET:.6e}, "
        f"rel err {rel:.3e}, {elapsed:.1f} s",
    )
    assert ok


# ---------------------------------------------------------------- 2


def test_criterion_02_harmonic_mode3(acceptance):
    res = mode3_check(folded_for(HARM))
    roots = np.array(res["retained_roots"])
    target = 2 * np.sqrt(2) - 3
    err = np.min(np.abs(roots - target)) if roots.size else np.inf
    ok = roots.size == 1 and err <= 1e-12 and res["kernel_dim"] == 0
    acceptance(2, ok, f"retained roots {np.round(roots.real, 15).tolist()}, |z - (2sqrt2-3)| = {err:.1e}, kernel dim {res['kernel_dim']}")
    assert ok


# ---------------------------------------------------------------- 3


def test_criterion_03_lj_mode3(acceptance):
    res = mode3_check(folded_for(LJ))
    retained = np.array([z for z, b in zip(res["retained_roots"], res["retained_blocks"]) if b == "atomistic"])
    # every atomistic root at zeta = 1 strictly inside the disk, before any are set aside
    every = roots_classified(char_poly(LJ.atomistic_stencil(1.0), 1.0), tol_annulus=1e-6).values()
    candidates = np.concatenate([retained, every[np.abs(every) < 1.0]])
    dist = [float(np.min(np.abs(candidates - z))) for z in LJ_MODE3_ROOTS]
    matched = [d <= 5e-4 for d in dist]
    A = example2_mode3_matrix(retained, LJ)
    s = np.linalg.svd(A, compute_uv=False) if A.size else np.array([])
    square = A.shape == (4, 4)
    rank = int(np.sum(s > 1e-8 * s[0])) if s.size else 0
    trivial = square and rank == 4
    ok = all(matched) and trivial
    acceptance(
        3,
        ok,
        f"retained {len(retained)} roots {np.round(retained, 6).tolist()}; distance to targets "
        f"{[f'{d:.1e}' for d in dist]}; boundary system shape {A.shape} rank {rank}, square with trivial kernel {bool(trivial)}",
    )
    assert ok


# ---------------------------------------------------------------- 4


def test_criterion_04_assumption_b_counts(acceptance):
    harm = assumption_b_check(folded_for(HARM), M=256)
    harm_vec = assumption_b_check(folded_for(HARM, scalar=False), M=256)
    lj = assumption_b_check(folded_for(LJ), M=256)
    totals_h = {nc + na for _, nc, na, _ in harm["per_theta"]}
    totals_hv = {nc + na for _, nc, na, _ in harm_vec["per_theta"]}
    totals_lj = {nc + na for _, nc, na, _ in lj["per_theta"]}
    ok = (
        totals_h == {3}
        and totals_hv == {6}
        and totals_lj == {6}
        and all(r["pass"] for r in (harm, harm_vec, lj))
        and len(lj["per_theta"]) == 255
    )
    acceptance(
        4,
        ok,
        f"harmonic per component {sorted(totals_h)} (counts {harm['counts']}), "
        f"harmonic vector {sorted(totals_hv)}, lj total {sorted(totals_lj)} (counts {lj['counts']})",
    )
    assert ok


# ---------------------------------------------------------------- 5


def test_criterion_05_convergence(acceptance):
    load = fourier_load([(0, (1, 0), 1.0), (1, (1, 1), 0.5, 0.3)])
    t0 = time.perf_counter()
    tables = {m.name: convergence_study(m, load, (8, 16, 32, 64)) for m in (HARM, LJ)}
    elapsed = time.perf_counter() - t0
    ok = elapsed < 300.0
    parts = []
    for name, t in tables.items():
        ok &= t.fitted_order >= 1.8 and all(3.2 <= q <= 4.8 for q in t.ratios)
        parts.append(f"{name} order {t.fitted_order:.3f} ratios {[round(q, 3) for q in t.ratios]}")
    acceptance(5, ok, "; ".join(parts) + f"; {elapsed:.1f} s")
    assert ok


# ---------------------------------------------------------------- 6


def test_criterion_06_symbol_consistency(acceptance):
    ok = True
    worst = [np.inf, -np.inf]
    for model in (HARM, LJ):
        for k in SYMBOL_K:
            errs = []
            for n in (16, 32, 64):
                eps = 1 / (2 * n)
                errs.append(np.linalg.norm(model.atomistic_stencil(eps).symbol(k, eps) - symbol_cb(model, k), 2))
            ratios = np.array(errs[:-1]) / np.array(errs[1:])
            worst = [min(worst[0], ratios.min()), max(worst[1], ratios.max())]
            ok &= bool(np.all((ratios >= 3.5) & (ratios <= 4.5)))
    acceptance(6, ok, f"10 wavevectors x 2 models, N = 16/32/64: ratios in [{worst[0]:.4f}, {worst[1]:.4f}]")
    assert ok


# ---------------------------------------------------------------- 7


def test_criterion_07_closed_form_and_distinct_roots(acceptance):
    thetas = 2 * np.pi * np.arange(1, 101) / 101
    # identity-proportional stencils: one scalar component carries the roots
    co, at = HARM.continuum_stencil(1.0).block(0, 0), HARM.atomistic_stencil(1.0).block(0, 0)
    max_err, min_gap = 0.0, np.inf
    for t in thetas:
        zeta = np.exp(1j * t)
        zc = example_inside_roots(co, zeta)
        za = example_inside_roots(at, zeta)
        assert len(zc) == 1 and len(za) == 2
        max_err = max(max_err, abs(zc[0] - closed_form_z1(t)))
        z = np.concatenate([zc, za])
        gaps = [abs(z[i] - z[j]) for i in range(3) for j in range(i + 1, 3)]
        min_gap = min(min_gap, min(gaps))
    ok = max_err <= 1e-10 and min_gap > 1e-8
    acceptance(7, ok, f"100 samples: max |z1 - closed form| = {max_err:.2e}, min pairwise gap = {min_gap:.3e}")
    assert ok


# ---------------------------------------------------------------- 8


def test_criterion_08_folding_equivalence(acceptance):
    rng = np.random.default_rng(2024)
    eps = 1 / 16
    worst_res = 0.0
    for model in (HARM, LJ):
        sys = fold(model.atomistic_stencil(eps), model.continuum_stencil(eps), eps=eps, scalar=False)
        for _ in range(10):
            u = rng.standard_normal((sys.d, 24, 16))
            U = fold_field(u, sys.extents, 12, 8)
            interior, boundary = apply_folded(sys, U)
            res_c, res_a = two_region_residual(sys.atomistic, sys.continuum, u, 12, interior.shape[1])
            scale = np.abs(np.concatenate([res_c, res_a])).max()
            gap = max(np.abs(interior[: sys.d] - res_c).max(), np.abs(interior[sys.d :] - res_a).max())
            worst_res = max(worst_res, gap / scale)
            worst_res = max(worst_res, np.abs(boundary).max() / (np.abs(U).max() / eps ** (sys.q // sys.d)))
    worst_det = 0.0
    for model in (HARM, LJ):
        sys = folded_for(model, scalar=False)
        e, d = sys.extents, sys.d
        for _ in range(10):
            z = np.exp(1j * rng.uniform(0, 2 * np.pi)) * rng.uniform(0.5, 1.5)
            zeta = np.exp(1j * rng.uniform(0, 2 * np.pi))
            lhs = np.linalg.det(sys.L.evaluate(np.array([z, zeta])))
            # the continuum half enters reflected, z -> 1/z
            hc = np.linalg.det(sys.continuum.evaluate(np.array([1 / z, zeta])))
            ha = np.linalg.det(sys.atomistic.evaluate(np.array([z, zeta])))
            rhs = z ** (d * e.hi_c) * hc * z ** (-d * e.lo_a) * ha
            worst_det = max(worst_det, abs(lhs - rhs) / abs(rhs))
    ok = worst_res <= 1e-13 and worst_det <= 1e-9
    acceptance(8, ok, f"residual mismatch {worst_res:.1e} (rel), determinant factorization {worst_det:.1e} (rel)")
    assert ok


# ---------------------------------------------------------------- 9


def test_criterion_09_invariants(acceptance):
    rng = np.random.default_rng(7)
    notes = []
    # Parseval
    pars = 0.0
    for n in (4, 8, 16):
        eps = 1 / (2 * n)
        u = rng.standard_normal((2, 2 * n, 2 * n)) + 1j * rng.standard_normal((2, 2 * n, 2 * n))
        lhs = eps**2 * np.sum(np.abs(u) ** 2)
        rhs = (2 * np.pi) ** 4 * np.sum(np.abs(dft(u, eps)) ** 2)
        pars = max(pars, abs(lhs - rhs) / lhs)
    ok = pars <= 1e-10
    notes.append(f"Parseval {pars:.1e}")
    # Hermiticity
    herm = 0.0
    for model in (HARM, LJ):
        for n in (8, 16, 32):
            eps = 1 / (2 * n)
            for st in (model.atomistic_stencil(eps), model.continuum_stencil(eps)):
                for k in rng.integers(-n, n, size=(20, 2)):
                    h = st.symbol(k, eps)
                    herm = max(herm, np.abs(h - h.conj().T).max() / max(1.0, np.abs(h).max()))
    ok &= herm <= 1e-12
    notes.append(f"Hermiticity {herm:.1e}")
    # zero row sums
    pair = lj_pair_potential()
    exact = True
    for model in (HARM, LJ, pair):
        for eps in (1.0, 1 / 16, 1 / 64):
            for st in (model.atomistic_stencil(eps), model.continuum_stencil(eps)):
                exact &= not np.any(st.row_sum())
    ok &= exact
    notes.append(f"row sums exact {exact}")
    # linearization against finite differences of the pair forces
    fd = fd_jacobian_stencil(pair)
    jac = 0.0
    for target in (pair.atomistic_stencil(1 / 8), LJ.atomistic_stencil(1 / 8)):
        scale = np.abs(target[(0, 0)]).max()
        for mu, c in fd.items():
            jac = max(jac, np.abs(c - target[mu]).max() / max(np.abs(target[mu]).max(), 1e-3 * scale))
    ok &= jac <= 1e-5
    notes.append(f"FD Jacobian {jac:.1e}")
    # Assumption A
    mins = {}
    for model in (HARM, LJ):
        for n in (8, 16, 32):
            res = bulk_stability_scan(model.atomistic_stencil(1 / (2 * n)), n)
            ok &= res["pass"]
            mins[model.name] = min(mins.get(model.name, np.inf), res["min_ratio"])
    notes.append("Assumption A min ratio " + ", ".join(f"{k} {v:.4g}" for k, v in mins.items()))
    acceptance(9, bool(ok), "; ".join(notes))
    assert ok


# ---------------------------------------------------------------- 10


def test_criterion_10_bound_and_mode2(acceptance):
    c = lj_constants()
    K = c.K
    r3 = np.sqrt(3.0)
    # second derivatives of the truncated potential, written out directly
    kappa2 = 12 * K * (14 * K - 8)
    kappa4 = 12 * K * (14 * K * r3**-14 - 8 * r3**-8)
    lhs = kappa2 + 9 * kappa4
    assert lhs == pytest.approx(c.cb_modulus, rel=1e-13)
    margin = lhs - 60 * K
    m2 = mode2_check(folded_for(LJ))
    supp = supplementary_check(LJ.continuum_stencil(1.0).quadratic_limit())
    ok = margin > 0 and m2["pass"] and supp["pass"]
    acceptance(
        10,
        ok,
        f"kappa2 + 9 kappa4 = {lhs:.6f} >= 60K = {60 * K:.6f}, margin {margin:.6f}; "
        f"mode II {'pass' if m2['pass'] else 'fail'}, root split {supp['splits']}",
    )
    assert ok
