"""Configuration-driven pipeline tying the modules into one reproducible run.

Stages execute in a fixed order (validate, mesh, solve, freq, spectrum,
blowup, ineq) with shared artifacts; each stage appends pass/fail checks
and the exit status is zero only when every enabled check passes.  Check
failures never abort later stages: a stress preset that violates the
ellipticity bound still runs the frequency stage and reports its fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import reports
from .blowup import classify_blowup
from .coefficients import make_preset, validate_hypotheses
from .config import RunConfig
from .errors import ConefreqError
from .frequency import (compute_trace, doubling_constants, estimate_gamma,
                        fit_monotonicity_constant, vanishing_order_test)
from .geometry import build_domain, check_normal_orthogonality, export_mesh, generate_mesh
from .inequalities import randomized_suite
from .quadrature import ball_quadrature
from .solver import export_solution, iteration_log, solve
from .spectral import arc_spectrum, cap_axisymmetric_spectrum, export_spectrum

NORMAL_TOL = 1e-12
AREA_TOL = 1e-8
MARGIN_TOL = -1e-10
NORMALIZATION_TOL = 1e-6
GAMMA_MATCH_TOL = 5e-2


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class PipelineResult:
    status: int
    checks: list[Check]
    summary: dict[str, str]
    out_dir: Path


@dataclass
class _State:
    domain: object = None
    mesh: object = None
    coeffs: object = None
    field_: object = None
    trace: object = None
    basis: object = None
    checks: list[Check] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def check(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append(Check(name, bool(passed), detail))


def _identity_tolerance(cfg: RunConfig, weighted: bool) -> float:
    base = 5e-2 if weighted else 2e-2
    return base * max(cfg.target_h / 0.02, 1.0)


def _stage_validate(cfg: RunConfig, st: _State, out: Path) -> None:
    report = validate_hypotheses(st.coeffs, st.mesh, cfg.r_grid())
    reports.write_kv(out / "hypotheses.txt", report.to_kv())
    reports.write_csv(out / "epsilon_profile.csv", ["r", "eps"],
                      zip(report.epsilon_radii, report.epsilon_values))
    for name, rec in report.records.items():
        st.check(f"hypothesis.{name}", rec.satisfied,
                 f"worst_margin={rec.worst_margin:.4g}")
    st.summary["hypotheses_all_satisfied"] = str(report.all_satisfied).lower()
    st.summary["epsilon_L1_integral"] = repr(report.L1_integral)


def _stage_mesh(cfg: RunConfig, st: _State, out: Path) -> None:
    export_mesh(st.mesh, out / "mesh.txt")
    ortho = check_normal_orthogonality(st.mesh)
    st.check("mesh.lateral_normal_orthogonality", ortho <= NORMAL_TOL, f"max={ortho:.3e}")
    r_probe = 0.5 * (cfg.r_lo + cfg.r_hi)
    bq = ball_quadrature(st.mesh, r_probe)
    omega = st.domain.opening
    area_err = abs(bq.weights.sum() - omega * r_probe**2 / 2) / (omega * r_probe**2 / 2)
    arc_err = abs(bq.arc_weights.sum() - omega * r_probe) / (omega * r_probe)
    st.check("mesh.ball_area_identity", area_err <= AREA_TOL, f"rel_err={area_err:.3e}")
    st.check("mesh.arc_measure_identity", arc_err <= AREA_TOL, f"rel_err={arc_err:.3e}")
    st.summary["mesh_nodes"] = str(st.mesh.n_nodes)
    st.summary["mesh_elements"] = str(st.mesh.n_elements)


def _stage_solve(cfg: RunConfig, st: _State, out: Path) -> None:
    st.field_ = solve(st.mesh, st.coeffs, cfg.outer_data,
                      tol=cfg.solver_tol, max_iter=cfg.solver_max_iter)
    export_solution(st.field_, out / "solution.txt")
    log = iteration_log(st.field_)
    reports.write_kv(out / "solve_log.txt", log)
    st.check("solve.converged", st.field_.converged,
             f"picard_steps={st.field_.picard_steps}")
    st.check("solve.algebraic_residual", st.field_.algebraic_residual <= 1e-12,
             f"residual={st.field_.algebraic_residual:.3e}")
    st.summary.update({f"solve.{k}": v for k, v in log.items()})


def _stage_freq(cfg: RunConfig, st: _State, out: Path) -> None:
    st.trace = compute_trace(st.field_, st.coeffs, cfg.r_grid(), threads=cfg.threads)
    reports.export_trace(st.trace, out / "trace.csv")
    if cfg.figures:
        reports.plot_boundary_mass(st.trace, out / "fig_H.svg")
    gamma = estimate_gamma(st.trace)
    c1 = fit_monotonicity_constant(st.trace, st.coeffs)
    doubling = doubling_constants(st.trace, cfg.doubling_ratio)
    vanish = vanishing_order_test(st.trace)
    reports.export_doubling(st.trace, out / "doubling.csv")
    if cfg.figures:
        reports.plot_frequency(st.trace, out / "fig_N.svg")

    weighted = bool(np.any(np.abs(st.coeffs.grad_a(np.array([[0.3, 0.2]]))) > 0))
    tol = _identity_tolerance(cfg, weighted)
    interior = st.trace.dnuova_residual[1:-1]
    st.check("freq.radial_identity", float(np.max(interior)) <= tol,
             f"max_interior_residual={float(np.max(interior)):.3e} tol={tol:.3e}")
    st.check("freq.positivity", bool(np.all(st.trace.N + 1.0 > 0)),
             f"min(N+1)={float(np.min(st.trace.N + 1.0)):.4g}")
    st.check("freq.gamma_nonnegative", gamma >= -0.05, f"gamma_hat={gamma:.5f}")
    st.check("freq.monotonicity_constant", c1 < 1e3, f"C1_fit={c1:.4g}")
    st.summary["gamma_hat"] = repr(gamma)
    st.summary["gamma_richardson"] = repr(st.trace.gamma_richardson)
    st.summary["C1_fit"] = repr(c1)
    st.summary["doubling_max_ratio"] = repr(float(doubling[:, 2].max()))
    st.summary["vanishing_certified_order"] = str(vanish.certified_order)


def _stage_spectrum(cfg: RunConfig, st: _State, out: Path) -> None:
    if cfg.dimension == 2:
        st.basis = arc_spectrum(cfg.opening, cfg.spectral_k_max)
    else:
        st.basis = cap_axisymmetric_spectrum(cfg.opening, cfg.spectral_k_max,
                                             cfg.spectral_grid_n)
    export_spectrum(st.basis, out / "spectrum.csv")
    if cfg.figures:
        reports.plot_spectrum(st.basis, out / "fig_spectrum.svg")
    lams = st.basis.eigenvalues
    st.check("spectrum.ground_mode", abs(float(lams[0])) <= 1e-9,
             f"lambda_1={float(lams[0]):.3e}")
    st.check("spectrum.nondecreasing", bool(np.all(np.diff(lams) >= -1e-12)),
             "eigenvalues sorted")
    st.summary["spectrum_k_max"] = str(len(lams))


def _stage_blowup(cfg: RunConfig, st: _State, out: Path) -> None:
    if st.basis is None:
        st.basis = arc_spectrum(cfg.opening, max(cfg.spectral_k_max, 6))
    gamma_hat = st.trace.gamma_hat if st.trace is not None else None
    result = classify_blowup(st.field_, st.coeffs, cfg.lambdas, st.basis,
                             gamma_hat=gamma_hat)
    reports.export_blowup(result, out / "blowup.csv")
    summary = reports.blowup_summary(result)
    reports.write_kv(out / "blowup_summary.txt", summary)
    if cfg.figures:
        reports.plot_blowup(result, out / "fig_blowup.svg")
    norm_err = float(result.normalization_errors.max())
    st.check("blowup.normalization", norm_err <= NORMALIZATION_TOL,
             f"max_err={norm_err:.3e}")
    bessel = float((result.coefficients[-1] ** 2).sum())
    st.check("blowup.bessel", bessel <= 1.0 + 1e-6, f"sum_sq={bessel:.8f}")
    st.check("blowup.gamma_match", result.gamma_check <= GAMMA_MATCH_TOL,
             f"|gamma_hat - gamma_k0|={result.gamma_check:.4g}")
    st.summary.update({f"blowup.{k}": v for k, v in summary.items()})


def _stage_ineq(cfg: RunConfig, st: _State, out: Path) -> None:
    report = randomized_suite(st.mesh, st.coeffs, cfg.ineq_count, cfg.seed)
    reports.export_suite(report, out / "inequalities.csv")
    st.check("ineq.poincare_sign", report.min_poincare_margin >= MARGIN_TOL,
             f"min_margin={report.min_poincare_margin:.4e}")
    if report.min_sharp_margin != math.inf:
        st.check("ineq.poincare_sharp_sign", report.min_sharp_margin >= MARGIN_TOL,
                 f"min_margin={report.min_sharp_margin:.4e}")
    st.summary["ineq_min_poincare_margin"] = repr(report.min_poincare_margin)
    st.summary["ineq_max_trace_C"] = repr(report.max_trace_C)


_STAGE_FNS = {
    "validate": _stage_validate,
    "mesh": _stage_mesh,
    "solve": _stage_solve,
    "freq": _stage_freq,
    "spectrum": _stage_spectrum,
    "blowup": _stage_blowup,
    "ineq": _stage_ineq,
}

_STAGE_NEEDS_FIELD = {"freq", "blowup"}


def run_pipeline(cfg: RunConfig, out_dir: str | Path | None = None,
                 threads: int | None = None, seed: int | None = None) -> PipelineResult:
    """Execute the enabled stages, write the report bundle, collect checks."""
    cfg.validate()
    if threads is not None:
        cfg.threads = threads
    if seed is not None:
        cfg.seed = seed
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    st = _State()
    st.domain = build_domain(cfg.dimension, cfg.opening)
    st.coeffs = make_preset(cfg.preset, cfg.preset_params)
    if cfg.dimension == 2:
        st.mesh = generate_mesh(st.domain, cfg.target_h, cfg.grading_ratio, cfg.r_min)

    enabled = [s for s in ("validate", "mesh", "solve", "freq", "spectrum", "blowup", "ineq")
               if s in cfg.stages]
    needs_solve = any(s in _STAGE_NEEDS_FIELD for s in enabled)
    if needs_solve and "solve" not in enabled:
        enabled.insert(0, "solve")

    for name in enabled:
        if name in _STAGE_NEEDS_FIELD and st.field_ is None:
            st.check(f"{name}.completed", False, "no solved field (solve stage failed)")
            continue
        try:
            _STAGE_FNS[name](cfg, st, out)
        except ConefreqError as exc:
            st.check(f"{name}.completed", False, f"{type(exc).__name__}: {exc}")

    if st.trace is not None and "blowup" in enabled:
        gk = st.summary.get("blowup.gamma_dominant")
        gh = st.summary.get("gamma_hat")
        if gk is not None and gh is not None:
            st.summary["gamma_discrepancy"] = repr(abs(float(gh) - float(gk)))

    failures = [c for c in st.checks if not c.passed]
    st.summary["checks_total"] = str(len(st.checks))
    st.summary["checks_failed"] = str(len(failures))
    reports.write_kv(out / "summary.txt", st.summary)
    reports.write_csv(out / "checks.csv", ["check", "passed", "detail"],
                      ((c.name, str(c.passed).lower(), c.detail) for c in st.checks))
    return PipelineResult(status=0 if not failures else 1, checks=st.checks,
                          summary=st.summary, out_dir=out)
