import math

import numpy as np
import pytest

from conefreq.errors import QuadratureRangeError
from conefreq.quadrature import arc_rule, ball_quadrature, lateral_rule


@pytest.mark.parametrize("r", [1e-3, 0.05, 0.123456, 0.5, 0.8, 0.99997, 1.0])
def test_ball_area_identity(mesh_q_coarse, r):
    bq = ball_quadrature(mesh_q_coarse, r)
    exact = (math.pi / 2) * r * r / 2
    assert abs(bq.weights.sum() - exact) / exact < 1e-10
    arc_exact = (math.pi / 2) * r
    assert abs(bq.arc_weights.sum() - arc_exact) / arc_exact < 1e-10


def test_ball_area_at_exact_layer_radius(mesh_q_coarse):
    r = float(mesh_q_coarse.layer_radii[30])
    bq = ball_quadrature(mesh_q_coarse, r)
    exact = (math.pi / 2) * r * r / 2
    assert abs(bq.weights.sum() - exact) / exact < 1e-10


def test_ball_area_half_radius_value(mesh_q_coarse):
    # |B_0.5 ∩ sector| = omega r^2 / 2 = pi/16
    bq = ball_quadrature(mesh_q_coarse, 0.5)
    assert bq.weights.sum() == pytest.approx(math.pi / 16, abs=1e-6)


def test_full_arc_weight_sum(mesh_q_coarse):
    bq = ball_quadrature(mesh_q_coarse, 1.0)
    assert bq.arc_weights.sum() == pytest.approx(math.pi / 2, abs=1e-10)


def test_radial_moment_integral(mesh_q_coarse):
    # int_{B_0.5} |x|^2 = omega r^4 / 4 by the polar oracle
    bq = ball_quadrature(mesh_q_coarse, 0.5)
    val = float(np.sum(bq.weights * (bq.points ** 2).sum(axis=1)))
    assert val == pytest.approx((math.pi / 2) * 0.5**4 / 4, abs=1e-6)


def test_radius_range_errors(mesh_q_coarse):
    with pytest.raises(QuadratureRangeError):
        ball_quadrature(mesh_q_coarse, 1e-5)
    with pytest.raises(QuadratureRangeError):
        ball_quadrature(mesh_q_coarse, 1.2)


def test_cut_elements_are_classified(mesh_q_coarse):
    bq = ball_quadrature(mesh_q_coarse, 0.3456)
    assert len(bq.cut_elements) > 0
    assert len(bq.interior_elements) > 0
    assert set(bq.cut_elements).isdisjoint(set(bq.interior_elements))


def test_arc_rule_points_on_circle(mesh_q_coarse):
    pts, w, theta, elems = arc_rule(mesh_q_coarse, 0.37)
    assert np.allclose(np.hypot(pts[:, 0], pts[:, 1]), 0.37, atol=1e-14)
    assert w.sum() == pytest.approx(0.37 * math.pi / 2, rel=1e-14)
    assert np.all(np.diff(theta) > 0)
    # integrate cos^2(2 theta) over the arc against the closed form
    val = float(np.sum(w * np.cos(2 * theta) ** 2))
    assert val == pytest.approx(0.37 * math.pi / 4, rel=1e-12)


def test_lateral_rule_measures(mesh_q_coarse):
    pts, w, elems = lateral_rule(mesh_q_coarse, 0.6)
    assert w.sum() == pytest.approx(2 * 0.6, rel=1e-12)  # two rays of length r
    # int over both rays of |x| dl = 2 * r^2/2
    rho = np.hypot(pts[:, 0], pts[:, 1])
    assert float(np.sum(w * rho)) == pytest.approx(0.6**2, rel=1e-12)
    assert np.all(rho <= 0.6 + 1e-12)


def test_lateral_rule_full_rays(mesh_q_coarse):
    _, w, _ = lateral_rule(mesh_q_coarse, None)
    assert w.sum() == pytest.approx(2.0, rel=1e-12)
