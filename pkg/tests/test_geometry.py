import math

import numpy as np
import pytest
from scipy.integrate import quad

import conefreq as cf
from conefreq.errors import DomainError, MeshError
from conefreq.geometry import Mesh, sector_angle


def test_build_domain_cap_measures():
    assert cf.build_domain(2, math.pi / 2).cap_measure == pytest.approx(math.pi / 2)
    assert cf.build_domain(2, math.pi).cap_measure == pytest.approx(math.pi)
    # hemisphere area oracle: 2*pi * int_0^(pi/2) sin(t) dt
    oracle, _ = quad(lambda t: 2 * math.pi * math.sin(t), 0.0, math.pi / 2)
    assert cf.build_domain(3, math.pi / 2).cap_measure == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("dim,opening", [(2, 0.0), (2, 2 * math.pi), (3, 0.0),
                                         (3, 3.5), (4, 1.0)])
def test_build_domain_rejects_bad_openings(dim, opening):
    with pytest.raises(DomainError):
        cf.build_domain(dim, opening)


def test_mesh_polygon_area_matches_chord_formula(mesh_q_coarse, quarter):
    dtheta = quarter.opening / mesh_q_coarse.n_theta
    chord_area = (quarter.opening / 2) * math.sin(dtheta) / dtheta
    assert mesh_q_coarse.areas.sum() == pytest.approx(chord_area, rel=1e-12)
    # approaches the sector area omega/2 as the chords flatten
    assert mesh_q_coarse.areas.sum() == pytest.approx(math.pi / 4, rel=1e-3)


def test_mesh_has_vertex_and_tags(mesh_q_coarse):
    assert np.allclose(mesh_q_coarse.nodes[0], 0.0)
    assert len(mesh_q_coarse.lateral_facets) > 0
    assert len(mesh_q_coarse.outer_facets) == mesh_q_coarse.n_theta
    outer_nodes = mesh_q_coarse.nodes[mesh_q_coarse.outer_node_ids]
    assert np.max(np.abs(np.hypot(outer_nodes[:, 0], outer_nodes[:, 1]) - 1.0)) < 1e-12
    assert mesh_q_coarse.layer_radii[0] <= mesh_q_coarse.r_min


def test_halfplane_lateral_facets_on_axis(halfplane):
    mesh = cf.generate_mesh(halfplane, 0.1, 0.96, 1e-3)
    for a, b in mesh.lateral_facets:
        for node in (a, b):
            x, y = mesh.nodes[node]
            assert abs(y) <= 1e-12 * max(abs(x), 1e-3)


def test_normal_orthogonality_zero_on_rays(mesh_q_coarse):
    assert cf.check_normal_orthogonality(mesh_q_coarse) <= 1e-12
    mesh34 = cf.generate_mesh(cf.build_domain(2, 3 * math.pi / 4), 0.1, 0.96, 1e-3)
    assert cf.check_normal_orthogonality(mesh34) <= 1e-12


def test_normal_orthogonality_detects_perturbation(mesh_q_coarse):
    m = mesh_q_coarse
    nodes = m.nodes.copy()
    # shift one outer-region lateral node tangentially (off its ray) by 1e-3
    node = None
    for a, b in m.lateral_facets:
        for cand in (a, b):
            if 0.5 < m.node_radii[cand] < 0.9:
                node = cand
                break
        if node is not None:
            break
    ray = nodes[node] / np.hypot(*nodes[node])
    nodes[node] = nodes[node] + 1e-3 * np.array([-ray[1], ray[0]])
    perturbed = Mesh(domain=m.domain, nodes=nodes, elements=m.elements.copy(),
                     lateral_facets=m.lateral_facets.copy(), outer_facets=m.outer_facets.copy(),
                     lateral_adjacent=m.lateral_adjacent.copy(),
                     outer_adjacent=m.outer_adjacent.copy(),
                     layer_radii=m.layer_radii.copy(), n_theta=m.n_theta,
                     target_h=m.target_h, grading_ratio=m.grading_ratio, r_min=m.r_min)
    assert cf.check_normal_orthogonality(perturbed) > 1e-4


def test_interpolation_error_second_order(quarter):
    def l2_error(mesh):
        from conefreq.quadrature import ball_quadrature, p1_at
        vals = mesh.nodes[:, 0] ** 2 - mesh.nodes[:, 1] ** 2
        bq = ball_quadrature(mesh, 1.0)
        u_i = p1_at(mesh, vals, bq.element_index, bq.points)
        exact = bq.points[:, 0] ** 2 - bq.points[:, 1] ** 2
        return math.sqrt(float(np.sum(bq.weights * (u_i - exact) ** 2)))

    coarse = l2_error(cf.generate_mesh(quarter, 0.1, 0.96, 1e-3))
    fine = l2_error(cf.generate_mesh(quarter, 0.05, 0.96, 1e-3))
    assert 2.5 < coarse / fine < 6.5


def test_refinement_is_monotone(quarter):
    m1 = cf.generate_mesh(quarter, 0.1, 0.96, 1e-3)
    m2 = cf.generate_mesh(quarter, 0.05, 0.96, 1e-3)
    assert m2.n_nodes > m1.n_nodes
    assert m2.n_elements > m1.n_elements


def test_mesh_rejects_bad_parameters(quarter):
    with pytest.raises(MeshError):
        cf.generate_mesh(quarter, 0.6, 0.96, 1e-3)  # fewer than 4 angular divisions
    with pytest.raises(MeshError):
        cf.generate_mesh(quarter, 0.05, 1.2, 1e-3)
    with pytest.raises(MeshError):
        cf.generate_mesh(quarter, 0.05, 0.96, 0.5)
    with pytest.raises(MeshError):
        cf.generate_mesh(cf.build_domain(3, 1.0), 0.05, 0.96, 1e-3)


def test_sector_angle_wraps_branch_cut():
    # a node that rounds just past pi must stay on the theta=pi ray
    pts = np.array([[-1.0, -3e-16], [1.0, -1e-17], [0.5, 0.5]])
    theta = sector_angle(math.pi, pts)
    assert theta[0] == pytest.approx(math.pi, abs=1e-12)
    assert theta[1] == 0.0
    assert theta[2] == pytest.approx(math.pi / 4)


def test_locate_and_interpolate_roundtrip(mesh_q_coarse):
    rng = np.random.default_rng(3)
    theta = rng.uniform(0, math.pi / 2, 200)
    rho = rng.uniform(2e-3, 0.999, 200)
    pts = np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=1)
    vals = 2.0 * mesh_q_coarse.nodes[:, 0] - 0.7 * mesh_q_coarse.nodes[:, 1]
    got = mesh_q_coarse.interpolate(vals, pts)
    assert np.max(np.abs(got - (2.0 * pts[:, 0] - 0.7 * pts[:, 1]))) < 1e-12


def test_mesh_export(tmp_path, mesh_q_coarse):
    path = tmp_path / "mesh.txt"
    cf.export_mesh(mesh_q_coarse, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("node 0 ")
    n_facets = len(mesh_q_coarse.lateral_facets) + len(mesh_q_coarse.outer_facets)
    assert len(lines) == mesh_q_coarse.n_nodes + mesh_q_coarse.n_elements + n_facets
    assert sum(1 for ln in lines if ln.endswith(" lateral")) == len(mesh_q_coarse.lateral_facets)
    assert sum(1 for ln in lines if ln.endswith(" outer_arc")) == len(mesh_q_coarse.outer_facets)
