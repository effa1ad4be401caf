"""Neumann spectra of the cap cross-section and the exponent conversion.

Arcs (n=2) have the classical cosine spectrum in closed form.  For
axisymmetric caps (n=3) the m=0 Sturm-Liouville problem
-(sin(theta) psi')' = lambda sin(theta) psi on (0, alpha) with a natural
condition at the pole and psi'(alpha)=0 is discretized by conservative
second-order finite differences with lumped cell masses, which reduces the
generalized eigenproblem to a symmetric tridiagonal one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError


@dataclass
class SpectralBasis:
    """Neumann eigenpairs of the cap with unit-mass normalization.

    Eigenfunction evaluators map the polar angle on the cap to values;
    normalization is with respect to the cap surface measure, so the
    integral of psi_k^2 over the cap equals 1.
    """

    dimension: int
    opening: float
    cap_measure: float
    eigenvalues: np.ndarray
    eigenfunctions: list[Callable[[np.ndarray], np.ndarray]]
    gammas: np.ndarray
    kind: str

    def psi(self, k: int, theta: np.ndarray) -> np.ndarray:
        """Evaluate the k-th eigenfunction (1-based index)."""
        return self.eigenfunctions[k - 1](np.asarray(theta, dtype=float))


def gamma_from_eigenvalue(n: int, lam: float) -> float:
    """Homogeneity exponent of the harmonic extension of a cap eigenfunction."""
    if lam < 0:
        raise DomainError(f"eigenvalue must be nonnegative, got {lam}")
    half = 0.5 * (n - 2)
    return -half + math.sqrt(half * half + lam)


def eigenvalue_from_gamma(n: int, gamma: float) -> float:
    """Inverse relation: lambda = gamma * (gamma + n - 2)."""
    return gamma * (gamma + n - 2)


def arc_spectrum(omega: float, k_max: int) -> SpectralBasis:
    """Closed-form Neumann spectrum of an arc of length omega (n=2)."""
    if not 0.0 < omega < 2.0 * math.pi:
        raise DomainError(f"arc opening must lie in (0, 2*pi), got {omega}")
    if k_max < 1:
        raise DomainError(f"k_max must be at least 1, got {k_max}")
    lams = np.array([((k - 1) * math.pi / omega) ** 2 for k in range(1, k_max + 1)])

    def make_psi(k: int) -> Callable[[np.ndarray], np.ndarray]:
        if k == 1:
            c = 1.0 / math.sqrt(omega)
            return lambda th: np.full_like(np.asarray(th, dtype=float), c)
        amp = math.sqrt(2.0 / omega)
        freq = (k - 1) * math.pi / omega
        return lambda th: amp * np.cos(freq * np.asarray(th, dtype=float))

    funcs = [make_psi(k) for k in range(1, k_max + 1)]
    gammas = np.sqrt(lams)
    return SpectralBasis(dimension=2, opening=omega, cap_measure=omega,
                         eigenvalues=lams, eigenfunctions=funcs, gammas=gammas, kind="arc")


def _cap_operator(alpha: float, grid_n: int):
    """Stiffness diagonal/off-diagonal (PDE scaling) and cell masses."""
    m = grid_n
    h = alpha / m
    theta = np.arange(m + 1) * h
    s_half = np.sin(theta[:-1] + 0.5 * h)
    mass = np.empty(m + 1)
    mass[0] = 1.0 - math.cos(0.5 * h)
    mass[1:m] = np.cos(theta[1:m] - 0.5 * h) - np.cos(theta[1:m] + 0.5 * h)
    mass[m] = math.cos(alpha - 0.5 * h) - math.cos(alpha)
    diag = np.empty(m + 1)
    diag[0] = s_half[0] / h
    diag[1:m] = (s_half[:-1] + s_half[1:]) / h
    diag[m] = s_half[-1] / h
    off = -s_half / h
    # flux balance over cells: (A psi)_i = lambda * mass_i * psi_i
    return theta, h, diag, off, mass


def cap_axisymmetric_spectrum(alpha: float, k_max: int, grid_n: int = 2000) -> SpectralBasis:
    """Axisymmetric Neumann eigenpairs of the spherical cap of colatitude alpha."""
    if not 0.0 < alpha <= 0.5 * math.pi:
        raise DomainError(f"cap colatitude must lie in (0, pi/2], got {alpha}")
    if grid_n < 200:
        raise DomainError(f"grid_n must be at least 200, got {grid_n}")
    if k_max < 1:
        raise DomainError(f"k_max must be at least 1, got {k_max}")

    theta, _, diag, off, mass = _cap_operator(alpha, grid_n)
    inv_sqrt = 1.0 / np.sqrt(mass)
    d_sym = diag * inv_sqrt**2
    e_sym = off * inv_sqrt[:-1] * inv_sqrt[1:]
    vals, vecs = eigh_tridiagonal(d_sym, e_sym, select="i", select_range=(0, k_max - 1))
    vals = np.where(np.abs(vals) < 1e-7, 0.0, vals)  # roundoff floor at the ground mode

    cap_measure = 2.0 * math.pi * (1.0 - math.cos(alpha))
    funcs = []
    for k in range(k_max):
        psi = vecs[:, k] * inv_sqrt
        norm = math.sqrt(2.0 * math.pi * float(mass @ psi**2))
        psi = psi / norm
        if psi[0] < 0:
            psi = -psi
        funcs.append(_make_interp(theta, psi.copy()))
    gammas = np.array([gamma_from_eigenvalue(3, float(v)) for v in vals])
    return SpectralBasis(dimension=3, opening=alpha, cap_measure=cap_measure,
                         eigenvalues=vals, eigenfunctions=funcs, gammas=gammas, kind="cap")


def _make_interp(theta: np.ndarray, psi: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    return lambda th: np.interp(np.asarray(th, dtype=float), theta, psi)


def cap_residual(alpha: float, basis: SpectralBasis, k: int, grid_n: int = 2000) -> float:
    """Weighted grid-norm residual of the k-th eigenpair under the discrete operator."""
    theta, _, diag, off, mass = _cap_operator(alpha, grid_n)
    psi = basis.psi(k, theta)
    apsi = diag * psi
    apsi[:-1] += off * psi[1:]
    apsi[1:] += off * psi[:-1]
    lam = float(basis.eigenvalues[k - 1])
    res = apsi / mass - lam * psi
    num = math.sqrt(float(mass @ res**2))
    den = math.sqrt(float(mass @ psi**2)) * max(lam, 1.0)
    return num / den


def export_spectrum(basis: SpectralBasis, path: str | Path) -> None:
    """CSV table (k, lambda_k, gamma_k)."""
    lines = ["k,lambda,gamma"]
    for k, (lam, gam) in enumerate(zip(basis.eigenvalues, basis.gammas), start=1):
        lines.append(f"{k},{float(lam)!r},{float(gam)!r}")
    Path(path).write_text("\n".join(lines) + "\n")
