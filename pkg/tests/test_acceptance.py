"""Acceptance suite: one pass/fail line per criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see the criterion lines.
"""

import filecmp
import math

import numpy as np
import pytest

import conefreq as cf
from conefreq.blowup import classify_blowup, rescale_solution
from conefreq.coefficients import epsilon_profile
from conefreq.config import RunConfig
from conefreq.frequency import compute_trace, doubling_constants, estimate_gamma, fit_monotonicity_constant
from conefreq.inequalities import randomized_suite
from conefreq.pipeline import run_pipeline
from conefreq.spectral import cap_axisymmetric_spectrum
from tests.conftest import R_GRID


def _report(num: int, label: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"criterion {num:2d} [{status}] {label}: {detail}")
    assert passed, f"criterion {num} ({label}): {detail}"


@pytest.fixture(scope="module")
def half_runs(mesh_h, const_coeffs):
    basis = cf.arc_spectrum(math.pi, 6)
    out = {}
    for k in (1, 2, 3):
        fld = cf.solve(mesh_h, const_coeffs, f"eigen:{k}", tol=1e-10)
        trace = compute_trace(fld, const_coeffs, R_GRID)
        estimate_gamma(trace)
        res = classify_blowup(fld, const_coeffs, [0.4, 0.2, 0.1], basis,
                              gamma_hat=trace.gamma_hat)
        out[k] = (trace, res)
    return out


@pytest.fixture(scope="module")
def quarter_runs(trace_eigen2_q, trace_eigen3_q, field_eigen2_q, field_eigen3_q,
                 mesh_q, const_coeffs):
    basis = cf.arc_spectrum(math.pi / 2, 6)
    out = {}
    f1 = cf.solve(mesh_q, const_coeffs, "eigen:1", tol=1e-10)
    t1 = compute_trace(f1, const_coeffs, R_GRID)
    estimate_gamma(t1)
    out[1] = (t1, classify_blowup(f1, const_coeffs, [0.4, 0.2, 0.1], basis,
                                  gamma_hat=t1.gamma_hat))
    out[2] = (trace_eigen2_q, classify_blowup(field_eigen2_q, const_coeffs,
                                              [0.4, 0.2, 0.1], basis,
                                              gamma_hat=trace_eigen2_q.gamma_hat))
    out[3] = (trace_eigen3_q, classify_blowup(field_eigen3_q, const_coeffs,
                                              [0.4, 0.2, 0.1], basis,
                                              gamma_hat=trace_eigen3_q.gamma_hat))
    return out


def test_criterion_1_frequency_constancy(trace_eigen2_q, field_eigen2_q_fine,
                                         const_coeffs):
    err_h = float(np.max(np.abs(trace_eigen2_q.N - 2.0)))
    trace_fine = compute_trace(field_eigen2_q_fine, const_coeffs, R_GRID)
    err_fine = float(np.max(np.abs(trace_fine.N - 2.0)))
    _report(1, "homogeneous-harmonic frequency constancy",
            err_h <= 2e-2 and err_fine <= 1e-2,
            f"max|N-2| = {err_h:.2e} at h=0.02 (tol 2e-2), "
            f"{err_fine:.2e} at h=0.01 (tol 1e-2)")


def test_criterion_2_gamma_lambda_classification(quarter_runs, half_runs):
    details = []
    ok = True
    for omega_label, runs, omega in (("pi/2", quarter_runs, math.pi / 2),
                                     ("pi", half_runs, math.pi)):
        basis = cf.arc_spectrum(omega, 6)
        for k in (1, 2, 3):
            trace, res = runs[k]
            gerr = abs(trace.gamma_hat - math.sqrt(float(basis.eigenvalues[k - 1])))
            ok &= gerr <= 5e-2 and res.dominant_mode == k and res.dominant_power >= 0.99
            details.append(f"{omega_label},k={k}: gamma_err={gerr:.1e} "
                           f"k0={res.dominant_mode} pow={res.dominant_power:.4f}")
    _report(2, "gamma-lambda classification", ok, "; ".join(details))


def test_criterion_3_radial_identity(quarter_runs, half_runs, trace_power_q):
    worst_const = max(float(np.max(runs[k][0].dnuova_residual[1:-1]))
                      for runs in (quarter_runs, half_runs) for k in (1, 2, 3))
    worst_power = float(np.max(trace_power_q.dnuova_residual[1:-1]))
    _report(3, "identity D = r H'/2 with weight correction",
            worst_const <= 2e-2 and worst_power <= 5e-2,
            f"constant-weight max residual {worst_const:.2e} (tol 2e-2), "
            f"power-weight {worst_power:.2e} (tol 5e-2)")


def test_criterion_4_doubling(trace_eigen2_q, trace_eigen3_q):
    ok = True
    details = []
    for trace, label in ((trace_eigen2_q, "eigen:2"), (trace_eigen3_q, "eigen:3")):
        table = doubling_constants(trace, 2.0)
        target = 2.0 ** (2.0 * trace.gamma_hat)
        dev = float(np.max(np.abs(table[:, 2] - target) / target))
        ok &= dev <= 0.05
        details.append(f"{label}: max dev {dev:.3f}")
    _report(4, "doubling ratios track 2^(2 gamma)", ok, "; ".join(details))


def test_criterion_5_monotonicity_with_remainder(trace_power_q, power_coeffs,
                                                 trace_linneu_q, linneu_coeffs):
    ok = True
    details = []
    for trace, coeffs, label in ((trace_power_q, power_coeffs, "power_weight d=0.5"),
                                 (trace_linneu_q, linneu_coeffs, "linear_neumann k=0.1")):
        c1 = fit_monotonicity_constant(trace, coeffs)
        # independent reconstruction of the corrected weight
        delta = coeffs.delta
        eps = epsilon_profile(coeffs, trace.r, trace.opening)
        h_of_r = np.maximum(trace.r**delta, eps) / trace.r
        tail = np.concatenate([
            np.cumsum((0.5 * (h_of_r[1:] + h_of_r[:-1]) * np.diff(trace.r))[::-1])[::-1],
            [0.0]])
        w = (2.0 + trace.N) * np.exp(-c1 * tail)
        nondecreasing = bool(np.all(np.diff(w) >= -1e-10 * np.max(w)))
        positive = bool(np.all(trace.N + 1.0 > 0.0))
        ok &= np.isfinite(c1) and c1 < 1e3 and nondecreasing and positive
        details.append(f"{label}: C1={c1:.4g} nondecreasing={nondecreasing} "
                       f"min(N+1)={float(np.min(trace.N + 1)):.3f}")
    _report(5, "monotonicity restored by a finite remainder constant", ok,
            "; ".join(details))


def test_criterion_6_hemisphere_spectrum():
    basis = cap_axisymmetric_spectrum(math.pi / 2, 3, 2000)
    errs = np.abs(basis.eigenvalues - np.array([0.0, 6.0, 20.0]))
    exact = cf.gamma_from_eigenvalue(3, 6.0) == 2.0
    _report(6, "hemisphere cap spectrum and exponent formula",
            bool(np.max(errs) <= 1e-3 and exact),
            f"eigenvalue errors {np.array2string(errs, precision=2)} (tol 1e-3), "
            f"gamma(3,6)={cf.gamma_from_eigenvalue(3, 6.0)}")


def test_criterion_7_inequality_suite(quarter, const_coeffs):
    mesh = cf.generate_mesh(quarter, 0.06, 0.96, 1e-3)
    mesh_fine = cf.generate_mesh(quarter, 0.03, 0.96, 1e-3)
    rep = randomized_suite(mesh, const_coeffs, 100, 42)
    rep_fine = randomized_suite(mesh_fine, const_coeffs, 100, 42)
    drift = abs(rep_fine.max_trace_C - rep.max_trace_C) / rep.max_trace_C
    _report(7, "randomized Poincare/trace suite",
            rep.min_poincare_margin >= -1e-10 and rep_fine.min_poincare_margin >= -1e-10
            and drift <= 0.20,
            f"min margin {rep.min_poincare_margin:.3e}, trace-constant drift "
            f"{drift:.3f} under refinement (tol 0.20)")


def test_criterion_8_scaling_identity(field_eigen2_q, const_coeffs, trace_eigen2_q):
    worst = 0.0
    counts = []
    for lam in (0.4, 0.2):
        scaled, co_l = rescale_solution(field_eigen2_q, const_coeffs, lam)
        keep = (R_GRID / lam >= 0.05) & (R_GRID / lam <= 0.8)
        grid = np.unique(np.concatenate([R_GRID[keep] / lam, np.geomspace(0.05, 0.8, 8)]))
        trace_l = compute_trace(scaled, co_l, grid)
        n_l = np.array([trace_l.N[np.argmin(np.abs(trace_l.r - r))]
                        for r in R_GRID[keep] / lam])
        worst = max(worst, float(np.max(np.abs(n_l - trace_eigen2_q.N[keep]))))
        counts.append(int(keep.sum()))
    _report(8, "rescaled frequency matches the original at matched radii",
            worst <= 2e-2, f"max |N_lam(r) - N(lam r)| = {worst:.2e} over "
            f"{counts} radii (tol 2e-2)")


def test_criterion_9_lateral_normals(quarter, halfplane, mesh_q, mesh_h,
                                     mesh_q_coarse, mesh_q_fine):
    meshes = [mesh_q, mesh_h, mesh_q_coarse, mesh_q_fine,
              cf.generate_mesh(cf.build_domain(2, 3 * math.pi / 4), 0.05, 0.9, 1e-3),
              cf.generate_mesh(cf.build_domain(2, 1.9 * math.pi), 0.1, 0.7, 5e-3)]
    worst = max(cf.check_normal_orthogonality(m) for m in meshes)
    _report(9, "lateral normals orthogonal to position", worst <= 1e-12,
            f"max |nu.x|/|x| = {worst:.2e} over {len(meshes)} meshes (tol 1e-12)")


def test_criterion_10_determinism(tmp_path):
    cfg = RunConfig(target_h=0.05, ineq_count=5, figures=True, seed=42)
    run_pipeline(cfg, out_dir=tmp_path / "a")
    run_pipeline(cfg, out_dir=tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    mismatched = [n for n in names
                  if not filecmp.cmp(tmp_path / "a" / n, tmp_path / "b" / n, shallow=False)]
    _report(10, "byte-identical report bundles for identical config and seed",
            not mismatched, f"{len(names)} artifacts compared, mismatches: {mismatched}")
