"""P1 Galerkin solver for the weighted problem with lateral Neumann forcing.

The weak form tested against hat functions reads

    int a grad(u).grad(phi) = -int g(x,u) phi + int_rays f(x,u) phi,

with Dirichlet data on the outer arc closing the boundary-value problem.
The u-dependence of f and g is resolved by Picard iteration with the
forcings frozen at the previous iterate, damped by 0.5 whenever the
successive-change residual grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

from .coefficients import CoefficientSet
from .errors import AssemblyError, SolverDivergedError
from .geometry import Mesh, sector_angle
from .quadrature import _TRI5_B, gauss01, triangle_rule
from .spectral import arc_spectrum

ALGEBRAIC_TOL = 1e-12


@dataclass
class SolutionField:
    """Converged nodal field with per-element gradients and iteration log."""

    mesh: Mesh
    nodal_values: np.ndarray
    element_gradients: np.ndarray
    converged: bool = True
    picard_steps: int = 0
    final_residual: float = 0.0
    residual_history: list[float] = field(default_factory=list)
    algebraic_residual: float = 0.0
    outer_label: str = ""

    @classmethod
    def from_nodal(cls, mesh: Mesh, values: np.ndarray, label: str = "") -> "SolutionField":
        values = np.asarray(values, dtype=float)
        grads = np.einsum("mk,mkd->md", values[mesh.elements], mesh.grads)
        return cls(mesh=mesh, nodal_values=values, element_gradients=grads,
                   outer_label=label)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.nodal_values)))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.mesh.interpolate(self.nodal_values, points)


def recover_gradient(field: SolutionField) -> np.ndarray:
    """Piecewise-constant P1 gradients, one vector per element."""
    return np.einsum("mk,mkd->md", field.nodal_values[field.mesh.elements],
                     field.mesh.grads)


def boundary_trace(mesh: Mesh, outer_data) -> tuple[np.ndarray, str]:
    """Resolve an outer-arc data spec to nodal Dirichlet values.

    Accepted forms: "eigen:k", ("eigen", k), "mixed:k=c,k=c", {k: c}, a
    list of (k, c) pairs, or an (M, 2) table of (theta, value) samples.
    Eigen data uses the unit-mass normalized arc eigenfunctions.
    """
    omega = mesh.domain.opening
    theta = sector_angle(omega, mesh.nodes[mesh.outer_node_ids])

    def eigen_values(pairs):
        kmax = max(k for k, _ in pairs)
        basis = arc_spectrum(omega, kmax)
        vals = np.zeros_like(theta)
        for k, c in pairs:
            vals += c * basis.psi(k, theta)
        return vals

    if isinstance(outer_data, str):
        s = outer_data.strip()
        if s.startswith("eigen:"):
            k = int(s.split(":", 1)[1])
            return eigen_values([(k, 1.0)]), s
        if s.startswith("mixed:"):
            pairs = []
            for item in s.split(":", 1)[1].split(","):
                kk, cc = item.split("=")
                pairs.append((int(kk), float(cc)))
            return eigen_values(pairs), s
        raise AssemblyError(f"unrecognized outer data spec '{outer_data}'")
    if isinstance(outer_data, tuple) and len(outer_data) == 2 and outer_data[0] == "eigen":
        return eigen_values([(int(outer_data[1]), 1.0)]), f"eigen:{outer_data[1]}"
    if isinstance(outer_data, dict):
        pairs = sorted((int(k), float(c)) for k, c in outer_data.items())
        return eigen_values(pairs), "mixed:" + ",".join(f"{k}={c}" for k, c in pairs)
    if isinstance(outer_data, (list, tuple)) and outer_data and isinstance(outer_data[0], tuple):
        pairs = [(int(k), float(c)) for k, c in outer_data]
        return eigen_values(pairs), "mixed:" + ",".join(f"{k}={c}" for k, c in pairs)
    try:
        table = np.asarray(outer_data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise AssemblyError(f"unrecognized outer data spec: {exc}") from exc
    if table.ndim == 2 and table.shape[1] == 2:
        order = np.argsort(table[:, 0])
        return np.interp(theta, table[order, 0], table[order, 1]), "table"
    raise AssemblyError("unrecognized outer data spec")


def assemble_stiffness(mesh: Mesh, coeffs: CoefficientSet):
    pts, w = triangle_rule(mesh.nodes[mesh.elements])
    avals = coeffs.a(pts.reshape(-1, 2)).reshape(w.shape)
    int_a = (avals * w).sum(axis=1)
    k_local = np.einsum("mkd,mld->mkl", mesh.grads, mesh.grads) * int_a[:, None, None]
    rows = np.broadcast_to(mesh.elements[:, :, None], k_local.shape)
    cols = np.broadcast_to(mesh.elements[:, None, :], k_local.shape)
    n = mesh.n_nodes
    return coo_matrix((k_local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


class _RhsAssembler:
    """Per-iterate load vector with the forcings frozen at the given field."""

    def __init__(self, mesh: Mesh, coeffs: CoefficientSet):
        self.mesh = mesh
        self.coeffs = coeffs
        self.vol_pts, self.vol_w = triangle_rule(mesh.nodes[mesh.elements])
        g, w = gauss01(4)
        a = mesh.nodes[mesh.lateral_facets[:, 0]]
        b = mesh.nodes[mesh.lateral_facets[:, 1]]
        self.lat_pts = a[:, None, :] + g[None, :, None] * (b - a)[:, None, :]
        lengths = np.hypot(*(b - a).T)
        self.lat_w = lengths[:, None] * w[None, :]
        self.lat_phi = np.stack([1.0 - g, g], axis=0)  # (facet basis, gauss)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        mesh, coeffs = self.mesh, self.coeffs
        bvec = np.zeros(mesh.n_nodes)

        u_q = u[mesh.elements] @ _TRI5_B.T
        flat = self.vol_pts.reshape(-1, 2)
        gvals = coeffs.g(flat, u_q.reshape(-1)).reshape(u_q.shape)
        contrib = -np.einsum("mq,qk->mk", self.vol_w * gvals, _TRI5_B)
        np.add.at(bvec, mesh.elements, contrib)

        u_lat = u[mesh.lateral_facets]  # (F, 2)
        u_g = u_lat[:, 0, None] * self.lat_phi[None, 0] + u_lat[:, 1, None] * self.lat_phi[None, 1]
        fvals = coeffs.f(self.lat_pts.reshape(-1, 2), u_g.reshape(-1)).reshape(u_g.shape)
        wf = self.lat_w * fvals
        np.add.at(bvec, mesh.lateral_facets[:, 0], (wf * self.lat_phi[None, 0]).sum(axis=1))
        np.add.at(bvec, mesh.lateral_facets[:, 1], (wf * self.lat_phi[None, 1]).sum(axis=1))
        return bvec


def solve(mesh: Mesh, coeffs: CoefficientSet, outer_data, tol: float = 1e-10,
          max_iter: int = 25) -> SolutionField:
    """Picard-iterated P1 solve with outer-arc Dirichlet data."""
    if tol <= 0:
        raise AssemblyError(f"tolerance must be positive, got {tol}")
    dirichlet, label = boundary_trace(mesh, outer_data)
    kmat = assemble_stiffness(mesh, coeffs)
    outer = mesh.outer_node_ids
    free = np.setdiff1d(np.arange(mesh.n_nodes), outer)
    k_ff = kmat[free][:, free].tocsc()
    k_fd = kmat[free][:, outer]
    try:
        lu = splu(k_ff)
    except RuntimeError as exc:
        raise AssemblyError(f"stiffness factorization failed: {exc}") from exc
    rhs = _RhsAssembler(mesh, coeffs)
    lift = k_fd @ dirichlet

    u = np.zeros(mesh.n_nodes)
    u[outer] = dirichlet
    history: list[float] = []
    prev_change = np.inf
    converged = False
    rhs_f = None
    for _ in range(max_iter):
        rhs_f = rhs(u)[free] - lift
        u_new = u.copy()
        u_new[free] = lu.solve(rhs_f)
        scale = max(float(np.max(np.abs(u_new))), 1e-300)
        change = float(np.max(np.abs(u_new - u))) / scale
        if change > prev_change:
            u_new = 0.5 * (u_new + u)
            change = float(np.max(np.abs(u_new - u))) / scale
        history.append(change)
        prev_change = change
        u = u_new
        if change <= tol:
            converged = True
            break
    if not converged:
        raise SolverDivergedError(
            f"Picard iteration exceeded {max_iter} steps (last change {history[-1]:.3e})",
            history)

    # clean solve at the converged forcings so the field is exactly Galerkin
    rhs_f = rhs(u)[free] - lift
    u[free] = lu.solve(rhs_f)

    def algebraic_residual():
        res = k_ff @ u[free] - rhs_f
        denom = max(float(np.linalg.norm(rhs_f)), float(np.linalg.norm(k_ff @ u[free])), 1e-300)
        return res, float(np.linalg.norm(res)) / denom

    res, alg = algebraic_residual()
    if alg > ALGEBRAIC_TOL:
        u[free] -= lu.solve(res)  # one step of iterative refinement
        res, alg = algebraic_residual()
    if not np.isfinite(alg) or alg > ALGEBRAIC_TOL:
        raise AssemblyError(f"algebraic residual {alg:.3e} above contract {ALGEBRAIC_TOL}")

    out = SolutionField.from_nodal(mesh, u, label=label)
    out.converged = True
    out.picard_steps = len(history) + 1
    out.final_residual = history[-1]
    out.residual_history = history
    out.algebraic_residual = alg
    return out


def export_solution(field: SolutionField, path) -> None:
    """Nodal values, one record per line, aligned with the mesh export."""
    lines = [f"value {i} {v!r}" for i, v in enumerate(field.nodal_values)]
    Path(path).write_text("\n".join(lines) + "\n")


def iteration_log(field: SolutionField) -> dict[str, str]:
    return {
        "picard_steps": str(field.picard_steps),
        "final_residual": repr(field.final_residual),
        "algebraic_residual": repr(field.algebraic_residual),
        "converged": str(field.converged).lower(),
        "max_abs_u": repr(field.max_abs),
        "outer_data": field.outer_label,
    }
