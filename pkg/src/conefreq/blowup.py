"""Rescaled solution families and classification of their angular limits.

u_lam(x) = u(lam x) / sqrt(H(lam)) lives on the unit sector again, with the
weight and forcings rescaled accordingly.  At probe radius 1 the rescaled
trace equals the original trace at radius lam, so the angular profile is
sampled there with the same arc rule that defines H; the profile weighted
by sqrt(a) then integrates to exactly 1 by construction.  Projections onto
the cap eigenbasis name the dominant mode and check its homogeneity
exponent against the frequency limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet, make_preset
from .errors import DegenerateSolutionError, ModeAmbiguityError, QuadratureRangeError
from .frequency import compute_H
from .geometry import sector_angle
from .quadrature import arc_rule, p1_at
from .solver import SolutionField, assemble_stiffness
from .spectral import SpectralBasis


def rescale_coefficients(coeffs: CoefficientSet, lam: float, h_lam: float) -> CoefficientSet:
    """Coefficient set seen by the rescaled solution u(lam x)/sqrt(H(lam))."""
    s = math.sqrt(h_lam)

    def a(pts):
        return coeffs.a(np.atleast_2d(pts) * lam)

    def grad_a(pts):
        return lam * coeffs.grad_a(np.atleast_2d(pts) * lam)

    def f(pts, t):
        return (lam / s) * coeffs.f(np.atleast_2d(pts) * lam, s * np.asarray(t))

    def ft(pts, t):
        return lam * coeffs.ft(np.atleast_2d(pts) * lam, s * np.asarray(t))

    def gradx_f(pts, t):
        return (lam**2 / s) * coeffs.gradx_f(np.atleast_2d(pts) * lam, s * np.asarray(t))

    def f_primitive(pts, t):
        return (lam / h_lam) * coeffs.f_primitive(np.atleast_2d(pts) * lam, s * np.asarray(t))

    def g(pts, t):
        return (lam**2 / s) * coeffs.g(np.atleast_2d(pts) * lam, s * np.asarray(t))

    consts = dict(coeffs.constants)
    consts["C"] = consts.get("C", 0.0) * lam ** consts.get("delta", 1.0)
    return CoefficientSet(preset_id=f"rescaled({lam:g}):{coeffs.preset_id}",
                          params=dict(coeffs.params), a=a, grad_a=grad_a, f=f, ft=ft,
                          gradx_f=gradx_f, f_primitive=f_primitive, g=g, constants=consts)


def rescale_solution(field: SolutionField, coeffs: CoefficientSet,
                     lam: float) -> tuple[SolutionField, CoefficientSet]:
    """Build u(lam x)/sqrt(H(lam)) on a mesh of the same grading.

    The mesh generator is deterministic, so the fresh mesh coincides with
    the source mesh and is reused; values are P1 point evaluations at lam x.
    """
    mesh = field.mesh
    if not mesh.r_min / 0.8 - 1e-12 <= lam <= 0.5 + 1e-12:
        raise QuadratureRangeError(
            f"rescaling factor {lam} outside [{mesh.r_min / 0.8}, 0.5]")
    h_lam = compute_H(field, coeffs, lam)
    if not h_lam > 0.0:
        raise DegenerateSolutionError(f"H({lam}) is not positive; cannot rescale")
    values = field.evaluate(mesh.nodes * lam) / math.sqrt(h_lam)
    out = SolutionField.from_nodal(mesh, values, label=f"rescaled({lam:g}):{field.outer_label}")
    return out, rescale_coefficients(coeffs, lam, h_lam)


@dataclass
class BlowupResult:
    """Spectral content of the rescaled family along a decreasing scale list."""

    lambdas: np.ndarray
    coefficients: np.ndarray        # (n_lambda, k_max) projections onto the basis
    normalization_errors: np.ndarray
    dominant_mode: int
    dominant_power: float           # squared coefficient at the smallest scale
    subdominant_energy: np.ndarray  # per lambda, 1 - dominant squared coefficient
    gamma_hat: float
    gamma_dominant: float
    gamma_check: float
    harmonic_residual: float


def classify_blowup(field: SolutionField, coeffs: CoefficientSet, lam_list,
                    basis: SpectralBasis, gamma_hat: float | None = None) -> BlowupResult:
    """Project the rescaled angular profiles onto the cap eigenbasis.

    Profiles are read at probe radius 1 of the rescaled field, i.e. at
    radius lam of the original one, weighted by sqrt(a); the dominant mode
    is taken at the smallest scale.  Two top projections within 1% of each
    other are reported as an ambiguity instead of being resolved.
    """
    lam_list = np.asarray(sorted(lam_list, reverse=True), dtype=float)
    if len(lam_list) < 3:
        raise QuadratureRangeError("need at least 3 rescaling factors")
    k_max = len(basis.eigenvalues)
    if k_max < 6:
        raise QuadratureRangeError("spectral basis must cover at least 6 modes")
    mesh = field.mesh

    coeff_rows = []
    norm_errors = []
    for lam in lam_list:
        pts, w, theta, elems = arc_rule(mesh, lam)
        u = p1_at(mesh, field.nodal_values, elems, pts)
        a = coeffs.a(pts)
        h_lam = float(np.sum(w * a * u**2)) / lam
        if not h_lam > 0.0:
            raise DegenerateSolutionError(f"H({lam}) is not positive")
        # angular measure on the unit arc: w/lam turns arc length into dtheta
        profile = np.sqrt(a) * u / math.sqrt(h_lam)
        wt = w / lam
        norm_errors.append(abs(float(np.sum(wt * profile**2)) - 1.0))
        coeff_rows.append([float(np.sum(wt * profile * basis.psi(k, theta)))
                           for k in range(1, k_max + 1)])
    coeff_rows = np.array(coeff_rows)
    norm_errors = np.array(norm_errors)

    sq = coeff_rows[-1] ** 2
    order = np.argsort(sq)[::-1]
    if sq[order[1]] > 0.99 * sq[order[0]]:
        raise ModeAmbiguityError(
            f"modes {order[0] + 1} and {order[1] + 1} carry projections within 1%; "
            "eigenvalue multiplicity or a mixed limit along subsequences")
    k0 = int(order[0]) + 1
    subdominant = 1.0 - coeff_rows[:, k0 - 1] ** 2

    if gamma_hat is None:
        # slope surrogate from the boundary mass at the two smallest scales
        h_a = compute_H(field, coeffs, float(lam_list[-1]))
        h_b = compute_H(field, coeffs, float(lam_list[-2]))
        gamma_hat = 0.5 * math.log(h_b / h_a) / math.log(lam_list[-2] / lam_list[-1])
    gamma_dom = float(basis.gammas[k0 - 1])

    return BlowupResult(
        lambdas=lam_list,
        coefficients=coeff_rows,
        normalization_errors=norm_errors,
        dominant_mode=k0,
        dominant_power=float(sq[order[0]]),
        subdominant_energy=subdominant,
        gamma_hat=float(gamma_hat),
        gamma_dominant=gamma_dom,
        gamma_check=abs(float(gamma_hat) - gamma_dom),
        harmonic_residual=harmonic_profile_residual(mesh, basis, k0),
    )


def harmonic_profile_residual(mesh, basis: SpectralBasis, k: int) -> float:
    """Discrete weak-Laplace residual of |x|^gamma_k psi_k over free nodes.

    Vanishes with refinement when the reconstruction solves the unweighted
    problem with zero lateral flux.
    """
    gam = float(basis.gammas[k - 1])
    theta = sector_angle(mesh.domain.opening, mesh.nodes)
    rho = mesh.node_radii
    values = np.where(rho > 0, rho**gam, 0.0 if gam > 0 else 1.0) * basis.psi(k, theta)
    kmat = assemble_stiffness(mesh, make_preset("constant"))
    res = kmat @ values
    free = np.setdiff1d(np.arange(mesh.n_nodes), mesh.outer_node_ids)
    scale = np.abs(kmat) @ np.abs(values)
    num = float(np.linalg.norm(res[free]))
    den = max(float(np.linalg.norm(scale[free])), 1e-300)
    return num / den
