"""Numerical laboratory for elliptic Neumann problems on cone sectors.

Solves weighted elliptic problems with inhomogeneous Neumann data on planar
sectors, computes frequency-function traces with remainder identities,
doubling ratios and vanishing orders, classifies blow-up limits against the
Neumann cap spectrum, and verifies weighted Poincare and trace inequalities.
"""

from .geometry import ConeDomain, Mesh, build_domain, check_normal_orthogonality, export_mesh, generate_mesh
from .quadrature import BallQuadrature, arc_rule, ball_quadrature, lateral_rule
from .coefficients import CoefficientSet, HypothesisReport, epsilon_profile, make_preset, validate_hypotheses
from .solver import SolutionField, recover_gradient, solve
from .frequency import (FrequencyTrace, compute_D_E, compute_H, compute_trace, doubling_constants,
                        estimate_gamma, fit_monotonicity_constant, vanishing_order_test)
from .spectral import SpectralBasis, arc_spectrum, cap_axisymmetric_spectrum, eigenvalue_from_gamma, gamma_from_eigenvalue
from .blowup import BlowupResult, classify_blowup, rescale_coefficients, rescale_solution
from .inequalities import InequalityMargin, poincare_margin, randomized_suite, trace_margin

__version__ = "0.1.0"
