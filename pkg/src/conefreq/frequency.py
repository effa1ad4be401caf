"""Frequency-function traces: boundary mass, corrected energy, identities.

Per radius r the trace records

    H(r) = r^(1-n) int_{arc}  a u^2
    E(r) = r^(2-n) int_{ball} a |grad u|^2
    D(r) = E(r) - r^(2-n) int_{rays} f(.,u) u + r^(2-n) int_{ball} g(.,u) u
    N(r) = D(r) / H(r)

with n = 2 throughout.  H' is differenced in log-log coordinates, which is
exact for pure powers and therefore well suited to the geometric radius
grids this module expects; the identity D = r H'/2 - (1/2) int_{arc}
(grad a . nu) u^2 and the arc-flux identity int_{arc} a u du/dnu = D then
serve as independent cross-checks on the assembled quantities.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet, epsilon_profile
from .errors import DegenerateSolutionError, GammaEstimateError, MonotonicityFitError, QuadratureRangeError
from .quadrature import arc_rule, ball_quadrature, lateral_rule, p1_at
from .solver import SolutionField


@dataclass
class FrequencyTrace:
    """Sampled radii with the per-radius quantities and fitted summaries."""

    r: np.ndarray
    H: np.ndarray
    D: np.ndarray
    E: np.ndarray
    N: np.ndarray
    Hprime: np.ndarray
    dnuova_residual: np.ndarray
    flux_residual: np.ndarray
    opening: float
    mesh_h: float
    gamma_hat: float | None = None
    gamma_richardson: float | None = None
    c1_fit: float | None = None
    doubling: np.ndarray | None = None  # rows (r, R, H(Rr)/H(r))


def _rel_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    if scale < 1e-12:
        return 0.0
    return abs(a - b) / scale


def compute_H(field: SolutionField, coeffs: CoefficientSet, r: float) -> float:
    """Scaled boundary mass r^(1-n) int_{arc} a u^2 via the arc rule."""
    mesh = field.mesh
    pts, w, _, elems = arc_rule(mesh, r)
    u = p1_at(mesh, field.nodal_values, elems, pts)
    return float(np.sum(w * coeffs.a(pts) * u**2)) / r


def compute_D_E(field: SolutionField, coeffs: CoefficientSet, r: float) -> tuple[float, float]:
    """Corrected and uncorrected scaled energies over the clipped ball."""
    bq = ball_quadrature(field.mesh, r)
    return _d_e_from_ball(field, coeffs, bq)


def _d_e_from_ball(field: SolutionField, coeffs: CoefficientSet, bq) -> tuple[float, float]:
    mesh = field.mesh
    grads = field.element_gradients[bq.element_index]
    a = coeffs.a(bq.points)
    e_val = float(np.sum(bq.weights * a * np.einsum("ij,ij->i", grads, grads)))

    lp, lw, le = lateral_rule(mesh, bq.r)
    if len(lw):
        u_lat = p1_at(mesh, field.nodal_values, le, lp)
        f_term = float(np.sum(lw * coeffs.f(lp, u_lat) * u_lat))
    else:
        f_term = 0.0
    u_vol = p1_at(mesh, field.nodal_values, bq.element_index, bq.points)
    g_term = float(np.sum(bq.weights * coeffs.g(bq.points, u_vol) * u_vol))
    return e_val - f_term + g_term, e_val


def _per_radius(field: SolutionField, coeffs: CoefficientSet, r: float):
    mesh = field.mesh
    bq = ball_quadrature(mesh, r)
    a_arc = coeffs.a(bq.arc_points)
    u_arc = p1_at(mesh, field.nodal_values, bq.arc_elements, bq.arc_points)
    h_val = float(np.sum(bq.arc_weights * a_arc * u_arc**2)) / r
    d_val, e_val = _d_e_from_ball(field, coeffs, bq)

    grads_arc = field.element_gradients[bq.arc_elements]
    du_dnu = np.einsum("ij,ij->i", grads_arc, bq.arc_points) / r
    flux = float(np.sum(bq.arc_weights * a_arc * u_arc * du_dnu))

    ga = coeffs.grad_a(bq.arc_points)
    grad_a_nu = np.einsum("ij,ij->i", ga, bq.arc_points) / r
    correction = 0.5 * float(np.sum(bq.arc_weights * grad_a_nu * u_arc**2))
    return h_val, d_val, e_val, flux, correction


def compute_trace(field: SolutionField, coeffs: CoefficientSet, r_grid: np.ndarray,
                  threads: int = 1) -> FrequencyTrace:
    """Evaluate H, D, E, N and the identity residuals on the radius grid."""
    r_grid = np.sort(np.asarray(r_grid, dtype=float))
    mesh = field.mesh
    if len(r_grid) < 8:
        raise QuadratureRangeError(f"radius grid needs at least 8 points, got {len(r_grid)}")
    if r_grid[0] < mesh.r_min * (1.0 - 1e-12) or r_grid[-1] > 0.8 + 1e-12:
        raise QuadratureRangeError(
            f"radius grid [{r_grid[0]}, {r_grid[-1]}] outside [{mesh.r_min}, 0.8]")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda r: _per_radius(field, coeffs, r), r_grid))
    else:
        rows = [_per_radius(field, coeffs, r) for r in r_grid]

    h = np.array([row[0] for row in rows])
    d = np.array([row[1] for row in rows])
    e = np.array([row[2] for row in rows])
    flux = np.array([row[3] for row in rows])
    corr = np.array([row[4] for row in rows])
    if np.any(h <= 0.0) or not np.all(np.isfinite(h)):
        bad = float(r_grid[int(np.argmin(h))])
        raise DegenerateSolutionError(
            f"boundary mass vanished at r={bad}: the field is trivial on that circle")

    n_of_r = d / h
    hprime = _log_derivative(r_grid, h)
    dnuova = np.array([_rel_gap(d[i], 0.5 * r_grid[i] * hprime[i] - corr[i])
                       for i in range(len(r_grid))])
    flux_res = np.array([_rel_gap(flux[i], d[i]) for i in range(len(r_grid))])
    return FrequencyTrace(r=r_grid, H=h, D=d, E=e, N=n_of_r, Hprime=hprime,
                          dnuova_residual=dnuova, flux_residual=flux_res,
                          opening=mesh.domain.opening, mesh_h=mesh.target_h)


def _log_derivative(r: np.ndarray, h: np.ndarray) -> np.ndarray:
    """H' from central differences of log H against log r (one-sided at ends)."""
    s = np.log(r)
    y = np.log(h)
    slope = np.empty_like(y)
    slope[1:-1] = (y[2:] - y[:-2]) / (s[2:] - s[:-2])
    slope[0] = (y[1] - y[0]) / (s[1] - s[0])
    slope[-1] = (y[-1] - y[-2]) / (s[-1] - s[-2])
    return slope * h / r


def estimate_gamma(trace: FrequencyTrace) -> float:
    """Limit estimate for N at the vertex from the smallest grid radii.

    Weighted average of N over the three smallest radii with weights 1/r;
    an Aitken extrapolation over the same points is recorded alongside but
    not used for pass/fail decisions.
    """
    n = trace.N[:3]
    r = trace.r[:3]
    if float(n.max() - n.min()) > 1.0:
        raise GammaEstimateError(
            f"N ranges over {float(n.max() - n.min()):.3f} on the smallest radii; "
            "estimate unreliable")
    w = 1.0 / r
    gamma = float(np.sum(w * n) / np.sum(w))
    d1 = n[1] - n[0]
    d2 = n[2] - 2.0 * n[1] + n[0]
    rich = gamma if abs(d2) < 1e-14 else float(n[0] - d1 * d1 / d2)
    if gamma < -0.05:
        raise GammaEstimateError(f"estimated limit {gamma:.4f} below -0.05")
    trace.gamma_hat = gamma
    trace.gamma_richardson = rich
    return gamma


def fit_monotonicity_constant(trace: FrequencyTrace, coeffs: CoefficientSet,
                              delta: float | None = None) -> float:
    """Smallest C1 >= 0 making (2+N) exp(-C1 int_r max(s^d, eps_s)/s ds)
    nondecreasing on the grid, located by bisection at resolution 1e-3."""
    if delta is None:
        delta = coeffs.delta
    r = trace.r
    eps = epsilon_profile(coeffs, r, trace.opening)
    h_of_r = np.maximum(r**delta, eps) / r
    # cumulative integral from each grid point up to the top radius
    seg = 0.5 * (h_of_r[1:] + h_of_r[:-1]) * np.diff(r)
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])

    base = 2.0 + trace.N
    if np.any(base <= 0.0):
        raise MonotonicityFitError("2 + N is not positive on the grid")

    def nondecreasing(c1: float) -> bool:
        w = base * np.exp(-c1 * tail)
        return bool(np.all(np.diff(w) >= -1e-12 * np.max(np.abs(w))))

    if nondecreasing(0.0):
        trace.c1_fit = 0.0
        return 0.0
    hi = 1.0
    while not nondecreasing(hi):
        hi *= 2.0
        if hi > 1e6:
            raise MonotonicityFitError(
                "no constant up to 1e6 restores monotonicity; discretization "
                "failure or hypothesis breach")
    lo = 0.0
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if nondecreasing(mid):
            hi = mid
        else:
            lo = mid
    trace.c1_fit = hi
    return hi


def interp_H(trace: FrequencyTrace, r: np.ndarray) -> np.ndarray:
    """Log-linear interpolation of H between grid points (H behaves like a power)."""
    return np.exp(np.interp(np.log(r), np.log(trace.r), np.log(trace.H)))


def doubling_constants(trace: FrequencyTrace, ratio: float = 2.0) -> np.ndarray:
    """Table of H(R r)/H(r) over all grid radii with R r inside the grid span."""
    if ratio <= 1.0:
        raise QuadratureRangeError(f"doubling ratio must exceed 1, got {ratio}")
    admissible = trace.r * ratio <= trace.r[-1] * (1.0 + 1e-12)
    rs = trace.r[admissible]
    if len(rs) == 0:
        raise QuadratureRangeError(
            f"no admissible radii for ratio {ratio} on grid "
            f"[{trace.r[0]}, {trace.r[-1]}]")
    ratios = interp_H(trace, rs * ratio) / interp_H(trace, rs)
    table = np.stack([rs, np.full_like(rs, ratio), ratios], axis=1)
    trace.doubling = table
    return table


@dataclass
class VanishingOrderReport:
    """Scaled boundary-mass suprema H(r)/r^(2k) near the vertex, per order k.

    certified_order is the integer closest to half the log-log slope of H
    over the smallest radii, i.e. the power actually carried by the field;
    below_threshold marks orders at which the scaled mass is still tiny,
    the regime that would force triviality if it held for every k.
    """

    orders: np.ndarray
    sup_scaled: np.ndarray
    below_threshold: np.ndarray
    certified_order: int
    slope_gamma: float


def vanishing_order_test(trace: FrequencyTrace, k_max: int = 6,
                         threshold: float = 1e-8) -> VanishingOrderReport:
    r = trace.r[:3]
    h = trace.H[:3]
    ks = np.arange(k_max + 1)
    sup_scaled = np.array([float(np.max(h / r ** (2.0 * k))) for k in ks])
    slope = float((math.log(trace.H[2]) - math.log(trace.H[0]))
                  / (math.log(trace.r[2]) - math.log(trace.r[0])))
    certified = max(0, round(slope / 2.0))
    return VanishingOrderReport(orders=ks, sup_scaled=sup_scaled,
                                below_threshold=sup_scaled < threshold,
                                certified_order=certified, slope_gamma=0.5 * slope)
