import math

import numpy as np
import pytest

import conefreq as cf
from conefreq.errors import SolverDivergedError
from conefreq.solver import SolutionField, assemble_stiffness, boundary_trace
from tests.conftest import interpolant


def exact_mode2(mesh):
    # harmonic extension of the normalized second arc mode on the quarter sector
    amp = math.sqrt(4 / math.pi)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    return amp * (x * x - y * y)


def test_eigen2_solution_second_order(quarter, const_coeffs):
    errs = {}
    for h in (0.05, 0.025):
        mesh = cf.generate_mesh(quarter, h, 0.96, 1e-3)
        fld = cf.solve(mesh, const_coeffs, "eigen:2", tol=1e-10)
        errs[h] = float(np.max(np.abs(fld.nodal_values - exact_mode2(mesh))))
    assert errs[0.05] < 1e-3
    assert 2.5 < errs[0.05] / errs[0.025] < 8.0


def test_constant_data_gives_constant_solution(mesh_h, const_coeffs):
    fld = cf.solve(mesh_h, const_coeffs, "eigen:1", tol=1e-10)
    assert np.max(np.abs(fld.nodal_values - 1 / math.sqrt(math.pi))) < 5e-12
    grads = cf.recover_gradient(fld)
    # roundoff in the nodal constants is amplified by the graded element sizes
    assert np.max(np.abs(grads)) < 1e-9


def test_forced_solve_stays_close_to_unforced(mesh_q_coarse):
    base = cf.solve(mesh_q_coarse, cf.make_preset("constant"), "eigen:2", tol=1e-10)
    forced = cf.solve(mesh_q_coarse,
                      cf.make_preset("combined", {"delta": 1.0, "kappa": 0.05}),
                      "eigen:2", tol=1e-10)
    assert forced.picard_steps <= 10

    def energy(fld):
        g = fld.element_gradients
        return float(np.sum(fld.mesh.areas * np.einsum("md,md->m", g, g)))

    assert abs(energy(forced) - energy(base)) / energy(base) < 0.10


def test_energy_error_first_order(quarter, const_coeffs):
    # energy-norm error against the harmonic extension decays like h for
    # the smooth gamma=2 mode
    amp = math.sqrt(4 / math.pi)
    errs = []
    for h in (0.08, 0.04):
        mesh = cf.generate_mesh(quarter, h, 0.96, 1e-3)
        fld = cf.solve(mesh, const_coeffs, "eigen:2", tol=1e-10)
        from conefreq.quadrature import triangle_rule
        pts, w = triangle_rule(mesh.nodes[mesh.elements])
        gx = 2.0 * amp * pts[..., 0] - fld.element_gradients[:, None, 0]
        gy = -2.0 * amp * pts[..., 1] - fld.element_gradients[:, None, 1]
        errs.append(math.sqrt(float(np.sum(w * (gx * gx + gy * gy)))))
    assert 1.5 < errs[0] / errs[1] < 3.0


def test_picard_count_independent_of_mesh(quarter):
    co = cf.make_preset("combined", {"delta": 1.0, "kappa": 0.05})
    counts = []
    for h in (0.1, 0.05):
        mesh = cf.generate_mesh(quarter, h, 0.96, 1e-3)
        counts.append(cf.solve(mesh, co, "eigen:2", tol=1e-10).picard_steps)
    assert max(counts) <= 20
    assert abs(counts[0] - counts[1]) <= 2


def test_gradient_of_linear_field_is_exact(mesh_q_coarse):
    fld = SolutionField.from_nodal(mesh_q_coarse, mesh_q_coarse.nodes[:, 0])
    grads = cf.recover_gradient(fld)
    assert np.max(np.abs(grads - np.array([1.0, 0.0]))) < 1e-12


def test_gradient_magnitude_of_quadratic(mesh_q_coarse):
    fld = interpolant(mesh_q_coarse, lambda x, y: x * x - y * y)
    centroids = mesh_q_coarse.nodes[mesh_q_coarse.elements].mean(axis=1)
    want = 2.0 * np.hypot(centroids[:, 0], centroids[:, 1])
    got = np.hypot(fld.element_gradients[:, 0], fld.element_gradients[:, 1])
    # piecewise-constant gradients converge at first order pointwise
    scale = np.maximum(want, 0.05)
    assert np.median(np.abs(got - want) / scale) < 0.05


def test_galerkin_residual_at_convergence(mesh_q_coarse, linneu_coeffs):
    fld = cf.solve(mesh_q_coarse, linneu_coeffs, "eigen:2", tol=1e-12)
    assert fld.algebraic_residual <= 1e-12
    kmat = assemble_stiffness(mesh_q_coarse, linneu_coeffs)
    from conefreq.solver import _RhsAssembler
    rhs = _RhsAssembler(mesh_q_coarse, linneu_coeffs)(fld.nodal_values)
    free = np.setdiff1d(np.arange(mesh_q_coarse.n_nodes), mesh_q_coarse.outer_node_ids)
    res = (kmat @ fld.nodal_values - rhs)[free]
    scale = float(np.linalg.norm(kmat @ fld.nodal_values))
    assert float(np.linalg.norm(res)) / scale < 1e-8


def test_divergence_error_carries_history(mesh_q_coarse):
    co = cf.make_preset("combined", {"delta": 1.0, "kappa": 0.05})
    with pytest.raises(SolverDivergedError) as err:
        cf.solve(mesh_q_coarse, co, "eigen:2", tol=1e-12, max_iter=1)
    assert len(err.value.residual_history) == 1


def test_boundary_trace_forms(mesh_q_coarse):
    v1, _ = boundary_trace(mesh_q_coarse, "eigen:2")
    v2, _ = boundary_trace(mesh_q_coarse, ("eigen", 2))
    assert np.allclose(v1, v2)
    vm, _ = boundary_trace(mesh_q_coarse, "mixed:2=1.0,3=0.2")
    vd, _ = boundary_trace(mesh_q_coarse, {2: 1.0, 3: 0.2})
    assert np.allclose(vm, vd)
    theta = np.linspace(0, math.pi / 2, 41)
    table = np.stack([theta, np.cos(2 * theta)], axis=1)
    vt, label = boundary_trace(mesh_q_coarse, table)
    assert label == "table"
    assert np.max(np.abs(vt)) <= 1.0 + 1e-12


def test_solution_export_and_log(tmp_path, mesh_q_coarse, const_coeffs):
    fld = cf.solve(mesh_q_coarse, const_coeffs, "eigen:1", tol=1e-10)
    from conefreq.solver import export_solution, iteration_log
    path = tmp_path / "solution.txt"
    export_solution(fld, path)
    assert len(path.read_text().splitlines()) == mesh_q_coarse.n_nodes
    log = iteration_log(fld)
    assert log["converged"] == "true"
    assert float(log["max_abs_u"]) == pytest.approx(fld.max_abs)
