"""Coefficient presets and numerical validation of the structural bounds.

Presets supply the diffusion weight a(x), the boundary forcing f(x,t), and
the volume forcing g(x,t) together with exact analytic derivatives and the
t-primitive of f.  The validator measures, on sampled points, the smallest
constants for which the growth bounds hold, the radial drift profile
eps_r = sup_{B_r} |grad a . x| / a, and its weighted integrability over
[r_min, r1].  Growth constants are fitted rather than asserted because the
bounds only fix them up to an unspecified multiplicative constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import PresetError
from .geometry import Mesh
from .quadrature import lateral_rule, triangle_rule

T_GRID = (1.0, -1.0, 0.5, -0.5, 0.1, -0.1)

# floor on the best ellipticity constant before the two-sided bound is
# declared violated; unbounded weights drive it to zero as sampling tightens
ELLIPTICITY_FLOOR = 0.1


@dataclass
class CoefficientSet:
    """Weight, forcings, their derivatives, and structural constants.

    All callables are vectorized over point arrays of shape (N, 2); the
    t argument may be a scalar or an (N,) array.
    """

    preset_id: str
    params: dict
    a: Callable[[np.ndarray], np.ndarray]
    grad_a: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ft: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gradx_f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    f_primitive: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    constants: dict = field(default_factory=dict)

    @property
    def delta(self) -> float:
        return self.constants["delta"]


def _radii(pts: np.ndarray) -> np.ndarray:
    return np.hypot(pts[:, 0], pts[:, 1])


def _zeros(pts: np.ndarray, t=0.0) -> np.ndarray:
    return np.zeros(len(np.atleast_2d(pts)))


def _zeros_vec(pts: np.ndarray, t=0.0) -> np.ndarray:
    return np.zeros((len(np.atleast_2d(pts)), 2))


def _power_weight_pair(delta: float, amplitude: float):
    def a(pts):
        return 1.0 + amplitude * _radii(pts) ** delta

    def grad_a(pts):
        rho = _radii(pts)
        return (amplitude * delta * rho ** (delta - 2.0))[:, None] * pts

    return a, grad_a


def make_preset(preset_id: str, params: dict | None = None) -> CoefficientSet:
    """Construct one of the named coefficient families.

    constant        a = 1, no forcing.
    power_weight    a = 1 + amplitude*|x|^delta, no forcing.
    log_weight      a = log|x| * (cos(x2/|x|) - 2); unbounded at the vertex,
                    degenerate at |x|=1, meant to stress the ellipticity check.
    linear_neumann  f = kappa * a * |x|^(delta-1) * t on the rays.
    linear_volume   g = kappa * a * |x|^(delta-2) * t in the volume.
    combined        power weight plus both linear forcings.
    """
    params = dict(params or {})
    delta = float(params.get("delta", 1.0))
    if delta <= 0.0:
        raise PresetError(f"delta must be positive, got {delta}")

    if preset_id == "constant":
        return CoefficientSet(
            preset_id=preset_id, params=params,
            a=lambda pts: np.ones(len(np.atleast_2d(pts))),
            grad_a=_zeros_vec, f=_zeros, ft=_zeros, gradx_f=_zeros_vec,
            f_primitive=_zeros, g=_zeros,
            constants={"c": 1.0, "C": 0.0, "delta": delta})

    if preset_id == "power_weight":
        amplitude = float(params.get("amplitude", 1.0))
        a, grad_a = _power_weight_pair(delta, amplitude)
        return CoefficientSet(
            preset_id=preset_id, params=params,
            a=a, grad_a=grad_a, f=_zeros, ft=_zeros, gradx_f=_zeros_vec,
            f_primitive=_zeros, g=_zeros,
            constants={"c": 1.0 / (1.0 + amplitude), "C": amplitude * delta, "delta": delta})

    if preset_id == "log_weight":
        def a(pts):
            pts = np.atleast_2d(pts)
            rho = _radii(pts)
            s = pts[:, 1] / rho
            return np.log(rho) * (np.cos(s) - 2.0)

        def grad_a(pts):
            pts = np.atleast_2d(pts)
            rho = _radii(pts)
            s = pts[:, 1] / rho
            ctheta = np.cos(s) - 2.0
            grad_s = np.empty_like(pts)
            grad_s[:, 0] = -s * pts[:, 0] / rho**2
            grad_s[:, 1] = 1.0 / rho - s * pts[:, 1] / rho**2
            return (ctheta / rho**2)[:, None] * pts \
                - (np.log(rho) * np.sin(s))[:, None] * grad_s

        return CoefficientSet(
            preset_id=preset_id, params=params,
            a=a, grad_a=grad_a, f=_zeros, ft=_zeros, gradx_f=_zeros_vec,
            f_primitive=_zeros, g=_zeros,
            constants={"c": 0.0, "C": 3.0, "delta": delta})

    if preset_id in ("linear_neumann", "linear_volume", "combined"):
        if preset_id == "combined":
            amplitude = float(params.get("amplitude", 1.0))
            kappa = float(params.get("kappa", 0.0))
            kappa_f = float(params.get("kappa_f", kappa))
            kappa_g = float(params.get("kappa_g", kappa))
            a, grad_a = _power_weight_pair(delta, amplitude)
        else:
            amplitude = 0.0
            kappa = float(params.get("kappa", 0.1))
            kappa_f = kappa if preset_id == "linear_neumann" else 0.0
            kappa_g = kappa if preset_id == "linear_volume" else 0.0
            a, grad_a = _power_weight_pair(delta, 0.0)

        def f(pts, t):
            pts = np.atleast_2d(pts)
            return kappa_f * a(pts) * _radii(pts) ** (delta - 1.0) * t

        def ft(pts, t=0.0):
            pts = np.atleast_2d(pts)
            return kappa_f * a(pts) * _radii(pts) ** (delta - 1.0) * np.ones_like(
                np.broadcast_to(t, (len(pts),)).astype(float))

        def gradx_f(pts, t):
            pts = np.atleast_2d(pts)
            rho = _radii(pts)
            core = grad_a(pts) * (rho ** (delta - 1.0))[:, None] \
                + (a(pts) * (delta - 1.0) * rho ** (delta - 3.0))[:, None] * pts
            tt = np.broadcast_to(t, (len(pts),)).astype(float)
            return kappa_f * core * tt[:, None]

        def f_primitive(pts, t):
            pts = np.atleast_2d(pts)
            tt = np.broadcast_to(t, (len(pts),)).astype(float)
            return 0.5 * kappa_f * a(pts) * _radii(pts) ** (delta - 1.0) * tt**2

        def g(pts, t):
            pts = np.atleast_2d(pts)
            return kappa_g * a(pts) * _radii(pts) ** (delta - 2.0) * t

        cbig = max(abs(kappa_f) * max(1.0, abs(delta - 1.0) + amplitude * delta),
                   abs(kappa_g), amplitude * delta)
        return CoefficientSet(
            preset_id=preset_id, params=params,
            a=a, grad_a=grad_a, f=f, ft=ft, gradx_f=gradx_f,
            f_primitive=f_primitive, g=g,
            constants={"c": 1.0 / (1.0 + amplitude), "C": cbig, "delta": delta})

    raise PresetError(f"unknown preset '{preset_id}'")


@dataclass
class HypothesisRecord:
    name: str
    satisfied: bool
    worst_margin: float
    worst_point: tuple[float, float] | None
    fitted_C: float | None = None


@dataclass
class HypothesisReport:
    records: dict[str, HypothesisRecord]
    epsilon_radii: np.ndarray
    epsilon_values: np.ndarray
    L1_integral: float

    @property
    def all_satisfied(self) -> bool:
        return all(rec.satisfied for rec in self.records.values())

    def to_kv(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for name, rec in self.records.items():
            out[f"{name}.satisfied"] = str(rec.satisfied).lower()
            out[f"{name}.worst_margin"] = repr(rec.worst_margin)
            if rec.worst_point is not None:
                out[f"{name}.worst_point"] = f"{rec.worst_point[0]!r} {rec.worst_point[1]!r}"
            if rec.fitted_C is not None:
                out[f"{name}.fitted_C"] = repr(rec.fitted_C)
        out["L1_integral"] = repr(self.L1_integral)
        return out


def _drift_ratio(coeffs: CoefficientSet, pts: np.ndarray) -> np.ndarray:
    a = coeffs.a(pts)
    ga = coeffs.grad_a(pts)
    dot = np.abs(np.einsum("ij,ij->i", ga, pts))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0, dot / a, np.inf)


def _dense_samples(opening: float, r_hi: float, n_rad: int = 1200, n_ang: int = 9):
    rho = np.geomspace(1e-6, r_hi, n_rad)
    theta = np.linspace(0.0, opening, n_ang)
    pr, pt = np.meshgrid(rho, theta, indexing="ij")
    pts = np.stack([(pr * np.cos(pt)).ravel(), (pr * np.sin(pt)).ravel()], axis=1)
    return pts, np.repeat(rho, n_ang)


def epsilon_profile(coeffs: CoefficientSet, r_values: np.ndarray, opening: float) -> np.ndarray:
    """sup over B_r of |grad a . x| / a by dense radial sampling, per radius.

    The returned profile is nondecreasing by construction (running maximum
    over growing balls).
    """
    r_values = np.asarray(r_values, dtype=float)
    pts, rho = _dense_samples(opening, float(r_values.max()))
    ratio = _drift_ratio(coeffs, pts)
    order = np.argsort(rho, kind="stable")
    rho_sorted = rho[order]
    running = np.maximum.accumulate(ratio[order])
    idx = np.searchsorted(rho_sorted, r_values * (1.0 + 1e-12), side="right") - 1
    return np.where(idx >= 0, running[np.maximum(idx, 0)], 0.0)


def validate_hypotheses(coeffs: CoefficientSet, mesh: Mesh,
                        r_grid: np.ndarray) -> HypothesisReport:
    """Check the structural bounds at quadrature points inside B_{max r_grid}.

    Growth bounds with a free constant report the smallest constant that
    makes them hold on the sample; the two-sided ellipticity bound and the
    drift conditions carry pass/fail flags.  Failures are reported, never
    raised.
    """
    r_grid = np.sort(np.asarray(r_grid, dtype=float))
    r1 = float(r_grid[-1])
    delta = coeffs.delta

    inside = mesh.elem_max_radius <= r1 * (1.0 + 1e-12)
    pts, _ = triangle_rule(mesh.nodes[mesh.elements[inside]])
    pts = pts.reshape(-1, 2)
    lat_pts, _, _ = lateral_rule(mesh, r1)
    pts = np.concatenate([pts, lat_pts])
    rho = _radii(pts)

    a = coeffs.a(pts)
    ga = coeffs.grad_a(pts)
    records: dict[str, HypothesisRecord] = {}

    # two-sided ellipticity c <= a <= 1/c
    if np.all(a > 0.0) and np.all(np.isfinite(a)):
        cand = np.minimum(a, 1.0 / a)
        k = int(np.argmin(cand))
        c_best = float(cand[k])
        records["ellipticity"] = HypothesisRecord(
            "ellipticity", c_best >= ELLIPTICITY_FLOOR, c_best,
            (float(pts[k, 0]), float(pts[k, 1])))
    else:
        k = int(np.argmin(a))
        records["ellipticity"] = HypothesisRecord(
            "ellipticity", False, float(min(a.min(), 0.0)),
            (float(pts[k, 0]), float(pts[k, 1])))

    # radial drift |grad a . x| <= eps_r a with eps_r -> 0
    eps = epsilon_profile(coeffs, r_grid, mesh.domain.opening)
    decays = eps[-1] <= 1e-12 or eps[0] <= 0.5 * eps[-1] + 1e-12
    ratio = _drift_ratio(coeffs, pts)
    k = int(np.argmax(ratio))
    records["radial_drift"] = HypothesisRecord(
        "radial_drift", bool(decays), float(eps[0]),
        (float(pts[k, 0]), float(pts[k, 1])))

    # |grad a| <= C a / |x|
    with np.errstate(divide="ignore", invalid="ignore"):
        tange = np.hypot(ga[:, 0], ga[:, 1]) * rho / np.where(a > 0, a, np.inf)
    k = int(np.argmax(tange))
    cfit = float(tange[k])
    records["gradient_growth"] = HypothesisRecord(
        "gradient_growth", bool(np.isfinite(cfit) and cfit < 1e6), cfit,
        (float(pts[k, 0]), float(pts[k, 1])), fitted_C=cfit)

    def growth_record(name, values_fn, scale):
        worst = 0.0
        wpt = None
        for t in T_GRID:
            vals = np.abs(values_fn(pts, t)) / (scale * abs(t))
            k = int(np.argmax(vals))
            if vals[k] > worst:
                worst = float(vals[k])
                wpt = (float(pts[k, 0]), float(pts[k, 1]))
        ok = bool(np.isfinite(worst) and worst < 1e6)
        records[name] = HypothesisRecord(name, ok, worst, wpt, fitted_C=worst)

    safe_a = np.where(a > 0, a, np.inf)
    growth_record("neumann_growth", coeffs.f, safe_a * rho ** (delta - 1.0))
    growth_record("neumann_gradient_growth",
                  lambda p, t: np.hypot(*coeffs.gradx_f(p, t).T),
                  safe_a * rho ** (delta - 2.0))
    growth_record("volume_growth", coeffs.g, safe_a * rho ** (delta - 2.0))
    growth_record("ft_growth", lambda p, t: coeffs.ft(p, t), rho ** (delta - 1.0))

    # integrability of eps_r / r over [r_min, r1], trapezoid on a dense log grid
    dense_r = np.geomspace(mesh.r_min, r1, 400)
    dense_eps = epsilon_profile(coeffs, dense_r, mesh.domain.opening)
    l1 = float(np.trapezoid(dense_eps / dense_r, dense_r))
    records["drift_integrability"] = HypothesisRecord(
        "drift_integrability", bool(decays and np.isfinite(l1)), l1, None)

    return HypothesisReport(records=records, epsilon_radii=r_grid,
                            epsilon_values=eps, L1_integral=l1)
