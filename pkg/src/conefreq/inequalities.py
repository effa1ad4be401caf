"""Weighted Poincare and trace inequality margins on solved or random fields.

The ball form of the Poincare inequality,

    c int_{B_r} a u^2 / |x|^mu
      <= r^(1-mu) int_{arc} a u^2 + (2 r^(2-mu) / (n-mu)) int_{B_r} a |grad u|^2,

holds for every H^1 function once c < (n-mu)/2 and the weight drift is
small, so its margin is a sign check.  The trace inequality constant is
non-constructive; the suite calibrates the smallest constant over a corpus
of rough random fields and requires refinement stability instead of a
specific value.  The corpus is nodal white noise on a fixed coarse
generator mesh, interpolated onto the evaluation mesh: rough enough to
stress the bounds far harder than smooth solutions do, yet a fixed set of
functions, so the calibrated constant converges under mesh refinement.
Only P1 fields are probed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientSet
from .errors import QuadratureRangeError
from .geometry import Mesh, _barycentric, generate_mesh
from .quadrature import ball_quadrature, lateral_rule
from .solver import SolutionField

N_DIM = 2


@dataclass
class InequalityMargin:
    name: str
    params: dict
    lhs: float
    rhs: float
    margin: float
    fitted_C: float | None = None


class _RadiusWorkspace:
    """Quadrature arrays at one radius, reusable across many fields."""

    def __init__(self, mesh: Mesh, coeffs: CoefficientSet, r: float):
        self.r = r
        bq = ball_quadrature(mesh, r)
        self.w = bq.weights
        self.a = coeffs.a(bq.points)
        self.rho = np.hypot(bq.points[:, 0], bq.points[:, 1])
        self.tri = mesh.elements[bq.element_index]
        self.bary = _barycentric(mesh, bq.element_index, bq.points)
        self.grads = mesh.grads[bq.element_index]
        self.aw = bq.arc_weights
        self.a_arc = coeffs.a(bq.arc_points)
        self.tri_arc = mesh.elements[bq.arc_elements]
        self.bary_arc = _barycentric(mesh, bq.arc_elements, bq.arc_points)
        lp, lw, le = lateral_rule(mesh, r)
        self.lw = lw
        self.a_lat = coeffs.a(lp)
        self.rho_lat = np.hypot(lp[:, 0], lp[:, 1])
        self.tri_lat = mesh.elements[le]
        self.bary_lat = _barycentric(mesh, le, lp)
        ga = coeffs.grad_a(bq.points)
        self.drift = np.einsum("ij,ij->i", ga, bq.points)

    def pieces(self, values: np.ndarray):
        u = np.einsum("qk,qk->q", self.bary, values[self.tri])
        gx = np.einsum("qk,qkd->qd", values[self.tri], self.grads)
        grad_sq = np.einsum("qd,qd->q", gx, gx)
        u_arc = np.einsum("qk,qk->q", self.bary_arc, values[self.tri_arc])
        u_lat = np.einsum("qk,qk->q", self.bary_lat, values[self.tri_lat])
        return u, grad_sq, u_arc, u_lat


def _poincare_from_pieces(ws: _RadiusWorkspace, pieces, mu: float, c: float) -> InequalityMargin:
    u, grad_sq, u_arc, _ = pieces
    lhs = c * float(np.sum(ws.w * ws.a * u**2 * ws.rho**(-mu)))
    rhs = ws.r**(1.0 - mu) * float(np.sum(ws.aw * ws.a_arc * u_arc**2)) \
        + 2.0 * ws.r**(2.0 - mu) / (N_DIM - mu) * float(np.sum(ws.w * ws.a * grad_sq))
    return InequalityMargin("poincare_ball", {"mu": mu, "r": ws.r, "c": c},
                            lhs, rhs, rhs - lhs)


def _poincare_sharp_from_pieces(ws: _RadiusWorkspace, pieces, mu: float) -> InequalityMargin:
    u, grad_sq, u_arc, _ = pieces
    lhs = float(np.sum(ws.w * (0.5 * (N_DIM - mu) * ws.a + ws.drift) * u**2 * ws.rho**(-mu)))
    rhs = ws.r**(1.0 - mu) * float(np.sum(ws.aw * ws.a_arc * u_arc**2)) \
        + 2.0 / (N_DIM - mu) * float(np.sum(ws.w * ws.a * grad_sq * ws.rho**(2.0 - mu)))
    return InequalityMargin("poincare_sharp", {"mu": mu, "r": ws.r}, lhs, rhs, rhs - lhs)


def _trace_from_pieces(ws: _RadiusWorkspace, pieces, gamma_exp: float,
                       trace_C: float | None) -> InequalityMargin:
    u, grad_sq, _, u_lat = pieces
    lhs = float(np.sum(ws.lw * ws.a_lat * u_lat**2 * ws.rho_lat**(-gamma_exp)))
    grad_term = ws.r**(1.0 - gamma_exp) * float(np.sum(ws.w * ws.a * grad_sq))
    hardy_term = float(np.sum(ws.w * ws.a * u**2 * ws.rho**(-gamma_exp - 1.0)))
    components = grad_term + hardy_term
    fitted = lhs / components if components > 0 else 0.0
    c_used = fitted if trace_C is None else trace_C
    rhs = c_used * components
    return InequalityMargin("trace_ball", {"gamma_exp": gamma_exp, "r": ws.r, "C": c_used},
                            lhs, rhs, rhs - lhs, fitted_C=fitted)


def poincare_margin(fld: SolutionField, coeffs: CoefficientSet, mu: float,
                    r: float, c: float) -> InequalityMargin:
    """Margin of the ball Poincare inequality at (mu, r, c)."""
    if mu >= 2.0:
        raise QuadratureRangeError(f"mu must be below 2, got {mu}")
    if not 0.0 < c < (N_DIM - mu) / 2.0:
        raise QuadratureRangeError(f"c={c} outside (0, {(N_DIM - mu) / 2})")
    ws = _RadiusWorkspace(fld.mesh, coeffs, r)
    return _poincare_from_pieces(ws, ws.pieces(fld.nodal_values), mu, c)


def poincare_sharp_margin(fld: SolutionField, coeffs: CoefficientSet, mu: float,
                          r: float) -> InequalityMargin:
    """Sharper form with the weight drift on the left and the
    |x|^(2-mu)-weighted gradient on the right."""
    if mu >= 2.0:
        raise QuadratureRangeError(f"mu must be below 2, got {mu}")
    ws = _RadiusWorkspace(fld.mesh, coeffs, r)
    return _poincare_sharp_from_pieces(ws, ws.pieces(fld.nodal_values), mu)


def trace_margin(fld: SolutionField, coeffs: CoefficientSet, gamma_exp: float,
                 r: float, trace_C: float | None = None) -> InequalityMargin:
    """Weighted lateral trace mass against its gradient and Hardy components.

    With trace_C unset the margin is evaluated at the field's own fitted
    constant (hence zero); pass the corpus-calibrated constant to test a
    fresh field.
    """
    if gamma_exp >= 1.0:
        raise QuadratureRangeError(f"gamma_exp must be below 1, got {gamma_exp}")
    ws = _RadiusWorkspace(fld.mesh, coeffs, r)
    return _trace_from_pieces(ws, ws.pieces(fld.nodal_values), gamma_exp, trace_C)


POINCARE_MU_GRID = (0.0, 0.5, 1.0, 1.5)
POINCARE_R_GRID = (0.25, 0.5, 1.0)
TRACE_GAMMA_GRID = (0.0, 0.5)
TRACE_R_GRID = (0.5, 1.0)
GENERATOR_H = 0.12


@dataclass
class SuiteReport:
    margins: list[InequalityMargin] = field(default_factory=list)
    min_poincare_margin: float = math.inf
    min_sharp_margin: float = math.inf
    max_trace_C: float = 0.0


def random_corpus(mesh: Mesh, count: int, seed: int,
                  generator_h: float = GENERATOR_H) -> np.ndarray:
    """Nodal values of the seeded rough corpus on the given mesh.

    White noise is drawn on a coarse generator mesh of the same domain and
    interpolated, so the corpus is a fixed set of functions regardless of
    the evaluation resolution; the generator is split per field index.
    """
    gen = generate_mesh(mesh.domain, generator_h, mesh.grading_ratio, mesh.r_min)
    idx_e, bary = gen.locate(mesh.nodes)
    tri = gen.elements[idx_e]
    fields = np.empty((count, mesh.n_nodes))
    for idx in range(count):
        rng = np.random.default_rng([seed, idx])
        gvals = rng.uniform(-1.0, 1.0, gen.n_nodes)
        fields[idx] = np.einsum("qk,qk->q", bary, gvals[tri])
    return fields


def randomized_suite(mesh: Mesh, coeffs: CoefficientSet, count: int,
                     seed: int) -> SuiteReport:
    """Margins over the seeded rough corpus on a fixed parameter grid.

    The admissible Poincare constant is taken at 90% of (n-mu)/2 with an
    extra 1% safety factor; deterministic for a fixed seed.
    """
    if count < 1:
        raise QuadratureRangeError(f"count must be at least 1, got {count}")
    report = SuiteReport()
    corpus = random_corpus(mesh, count, seed)
    check_sharp = bool(np.any(np.abs(coeffs.grad_a(np.array([[0.3, 0.2]]))) > 0))
    radii = sorted(set(POINCARE_R_GRID) | set(TRACE_R_GRID))
    workspaces = {r: _RadiusWorkspace(mesh, coeffs, r) for r in radii}
    for idx in range(count):
        values = corpus[idx]
        pieces = {r: workspaces[r].pieces(values) for r in radii}
        for mu in POINCARE_MU_GRID:
            c = 0.9 * ((N_DIM - mu) / 2.0) * 0.99
            for r in POINCARE_R_GRID:
                m = _poincare_from_pieces(workspaces[r], pieces[r], mu, c)
                m.params["field_index"] = idx
                report.margins.append(m)
                report.min_poincare_margin = min(report.min_poincare_margin, m.margin)
                if check_sharp:
                    ms = _poincare_sharp_from_pieces(workspaces[r], pieces[r], mu)
                    ms.params["field_index"] = idx
                    report.margins.append(ms)
                    report.min_sharp_margin = min(report.min_sharp_margin, ms.margin)
        for ge in TRACE_GAMMA_GRID:
            for r in TRACE_R_GRID:
                m = _trace_from_pieces(workspaces[r], pieces[r], ge, None)
                m.params["field_index"] = idx
                report.margins.append(m)
                report.max_trace_C = max(report.max_trace_C, m.fitted_C)
    return report
