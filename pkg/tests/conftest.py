"""Shared fixtures: meshes, presets, solved fields, and traces.

The expensive FEM solves are session-scoped so acceptance and module tests
share them.  Benchmark parameters follow the acceptance setup: h=0.02 with
grading 0.96 and a 12-point geometric radius grid in [0.05, 0.8].
"""

from __future__ import annotations

import math

import numpy as np
import pytest

import conefreq as cf
from conefreq.frequency import compute_trace, estimate_gamma

R_GRID = np.geomspace(0.05, 0.8, 12)


@pytest.fixture(scope="session")
def quarter():
    return cf.build_domain(2, math.pi / 2)


@pytest.fixture(scope="session")
def halfplane():
    return cf.build_domain(2, math.pi)


@pytest.fixture(scope="session")
def mesh_q_coarse(quarter):
    return cf.generate_mesh(quarter, 0.05, 0.96, 1e-3)


@pytest.fixture(scope="session")
def mesh_q(quarter):
    return cf.generate_mesh(quarter, 0.02, 0.96, 1e-3)


@pytest.fixture(scope="session")
def mesh_q_fine(quarter):
    return cf.generate_mesh(quarter, 0.01, 0.96, 1e-3)


@pytest.fixture(scope="session")
def mesh_h(halfplane):
    return cf.generate_mesh(halfplane, 0.02, 0.96, 1e-3)


@pytest.fixture(scope="session")
def const_coeffs():
    return cf.make_preset("constant")


@pytest.fixture(scope="session")
def power_coeffs():
    return cf.make_preset("power_weight", {"delta": 0.5})


@pytest.fixture(scope="session")
def linneu_coeffs():
    return cf.make_preset("linear_neumann", {"delta": 1.0, "kappa": 0.1})


@pytest.fixture(scope="session")
def field_eigen2_q(mesh_q, const_coeffs):
    return cf.solve(mesh_q, const_coeffs, "eigen:2", tol=1e-10)


@pytest.fixture(scope="session")
def field_eigen2_q_fine(mesh_q_fine, const_coeffs):
    return cf.solve(mesh_q_fine, const_coeffs, "eigen:2", tol=1e-10)


@pytest.fixture(scope="session")
def field_eigen3_q(mesh_q, const_coeffs):
    return cf.solve(mesh_q, const_coeffs, "eigen:3", tol=1e-10)


@pytest.fixture(scope="session")
def field_power_q(mesh_q, power_coeffs):
    return cf.solve(mesh_q, power_coeffs, "eigen:2", tol=1e-10)


@pytest.fixture(scope="session")
def field_linneu_q(mesh_q, linneu_coeffs):
    return cf.solve(mesh_q, linneu_coeffs, "eigen:2", tol=1e-10)


@pytest.fixture(scope="session")
def trace_eigen2_q(field_eigen2_q, const_coeffs):
    trace = compute_trace(field_eigen2_q, const_coeffs, R_GRID)
    estimate_gamma(trace)
    return trace


@pytest.fixture(scope="session")
def trace_eigen3_q(field_eigen3_q, const_coeffs):
    trace = compute_trace(field_eigen3_q, const_coeffs, R_GRID)
    estimate_gamma(trace)
    return trace


@pytest.fixture(scope="session")
def trace_power_q(field_power_q, power_coeffs):
    trace = compute_trace(field_power_q, power_coeffs, R_GRID)
    estimate_gamma(trace)
    return trace


@pytest.fixture(scope="session")
def trace_linneu_q(field_linneu_q, linneu_coeffs):
    trace = compute_trace(field_linneu_q, linneu_coeffs, R_GRID)
    estimate_gamma(trace)
    return trace


def interpolant(mesh, fn):
    """Nodal interpolant of fn(x, y) as a SolutionField."""
    from conefreq.solver import SolutionField
    values = fn(mesh.nodes[:, 0], mesh.nodes[:, 1])
    return SolutionField.from_nodal(mesh, np.asarray(values, dtype=float))


def quad_mode(mesh):
    """Interpolant of r^2 cos(2 theta) = x^2 - y^2 on the quarter sector."""
    return interpolant(mesh, lambda x, y: x * x - y * y)
