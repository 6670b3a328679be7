"""Symplectic spectra, Williamson normal forms and the covariant uncertainty test."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import schur

from .symplectic import metric, pair_scaling, symmetrize, symplectic_residual

__all__ = [
    "SpectralError",
    "WilliamsonForm",
    "DimensionedWilliamsonForm",
    "PhysicalityReport",
    "symplectic_eigenvalues",
    "williamson_decompose",
    "dimensioned_form",
    "is_physical",
]


class SpectralError(ValueError):
    """Non-positive-definite input or a decomposition that failed to reconstruct."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class WilliamsonForm:
    """``V = S0.T @ diag(k1, k1, k2, k2, ...) @ S0`` with ``kappas`` descending."""

    S0: np.ndarray
    kappas: np.ndarray
    residual: float

    @property
    def V_d(self) -> np.ndarray:
        return np.diag(np.repeat(self.kappas, 2))

    def reconstruct(self) -> np.ndarray:
        return self.S0.T @ self.V_d @ self.S0

    def to_dict(self) -> dict:
        n = len(self.kappas)
        return {
            "kappas": [float(k) for k in self.kappas],
            "S0": {"n": n, "rows": self.S0.tolist()},
            "residual": float(self.residual),
        }


@dataclass(frozen=True)
class DimensionedWilliamsonForm:
    """``V = S0p.T @ diag(k1, k1', k2, k2', ...) @ S0p``.

    ``kappa`` carries squared-length units and ``kappa_prime`` squared-momentum
    units; the product ``kappa * kappa_prime`` equals the squared
    dimensionless symplectic eigenvalue whatever the scales.
    """

    S0p: np.ndarray
    kappa: np.ndarray
    kappa_prime: np.ndarray

    @property
    def pairs(self):
        return list(zip(self.kappa.tolist(), self.kappa_prime.tolist()))

    @property
    def V_dp(self) -> np.ndarray:
        return np.diag(np.column_stack([self.kappa, self.kappa_prime]).ravel())

    def reconstruct(self) -> np.ndarray:
        return self.S0p.T @ self.V_dp @ self.S0p


@dataclass(frozen=True)
class PhysicalityReport:
    physical: bool
    min_eigenvalue: float
    min_kappa: float
    kappa_route: bool

    def __bool__(self):
        return self.physical

    @property
    def consistent(self) -> bool:
        """Whether the Hermitian route and the kappa >= hbar/2 route agree."""
        return self.physical == self.kappa_route


def _checked(V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] % 2 or V.shape[0] == 0:
        raise SpectralError(f"variance matrix must be 2n x 2n, got shape {V.shape}")
    if not np.all(np.isfinite(V)):
        raise SpectralError("variance matrix has non-finite entries")
    return V


def _sqrt_pd(V: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(V)
    if w.min() <= 0:
        raise SpectralError(
            f"variance matrix is not positive definite: eigenvalue {w.min():.6e}"
        )
    return (U * np.sqrt(w)) @ U.T


def symplectic_eigenvalues(V) -> np.ndarray:
    """Moduli of the ``+-i kappa`` eigenvalues of ``beta V``, sorted descending.

    Computed as the positive half of the spectrum of the Hermitian matrix
    ``i V^{1/2} beta V^{1/2}``, which is congruence-free and well conditioned.
    """
    V = symmetrize(_checked(V))
    n = V.shape[0] // 2
    R = _sqrt_pd(V)
    w = np.linalg.eigvalsh(1j * (R @ metric(n) @ R))
    return np.sort(w[n:])[::-1]


def williamson_decompose(V, tol: float = 1e-9) -> WilliamsonForm:
    """Williamson normal form ``V = S0^T V_d S0``.

    ``A = V^{1/2} beta V^{1/2}`` is antisymmetric, so its real Schur form is
    ``O^T A O = blockdiag([[0, k_j], [-k_j, 0]])``.  Then
    ``S0 = V_d^{-1/2} O^T V^{1/2}`` is symplectic and reconstructs ``V``.
    Degenerate ``kappa`` give a non-unique but valid ``S0``.
    """
    V = symmetrize(_checked(V))
    n = V.shape[0] // 2
    R = _sqrt_pd(V)
    A = R @ metric(n) @ R
    A = 0.5 * (A - A.T)
    T, O = schur(A, output="real")

    kappas = np.empty(n)
    cols = []
    j = 0
    # Normal matrix: T is block diagonal up to rounding, 2x2 blocks only.
    for pair in range(n):
        j = 2 * pair
        off = 0.5 * (T[j, j + 1] - T[j + 1, j])
        if off >= 0:
            cols.extend([j, j + 1])
        else:
            cols.extend([j + 1, j])
        kappas[pair] = abs(off)
    O = O[:, cols]

    order = np.argsort(-kappas, kind="stable")
    kappas = kappas[order]
    perm = np.ravel([[2 * k, 2 * k + 1] for k in order])
    O = O[:, perm]
    if kappas.min() <= 0:
        raise SpectralError("degenerate Schur block: zero symplectic eigenvalue")

    S0 = (O.T @ R) / np.sqrt(np.repeat(kappas, 2))[:, None]
    form = WilliamsonForm(S0=S0, kappas=kappas, residual=0.0)
    residual = float(np.abs(form.reconstruct() - V).max())
    form = WilliamsonForm(S0=S0, kappas=kappas, residual=residual)
    scale = max(1.0, float(np.abs(V).max()))
    if residual > tol * scale:
        raise SpectralError(
            f"Williamson reconstruction residual {residual:.3e} too large", residual=residual
        )
    sres = symplectic_residual(S0)
    if sres > tol * max(1.0, float(np.abs(S0).max())) ** 2:
        raise SpectralError(f"Williamson S0 not symplectic: residual {sres:.3e}", residual=sres)
    return form


def dimensioned_form(V, scales: Sequence[float]) -> DimensionedWilliamsonForm:
    """Normal form with unequal diagonal entries inside each pair.

    A reciprocal scaling ``diag(1/l_j, l_j)`` absorbed into ``S0`` turns each
    ``(k_j, k_j)`` block into ``(l_j**2 k_j, k_j / l_j**2)``.
    """
    scales = np.asarray(scales, dtype=float)
    V = _checked(V)
    n = V.shape[0] // 2
    if scales.shape != (n,):
        raise SpectralError(f"need {n} scales, got {scales.shape}")
    if np.any(scales <= 0):
        raise SpectralError("length scales must be positive")
    form = williamson_decompose(V)
    L = pair_scaling(1.0 / scales)
    return DimensionedWilliamsonForm(
        S0p=L @ form.S0,
        kappa=form.kappas * scales**2,
        kappa_prime=form.kappas / scales**2,
    )


def is_physical(V, hbar: float = 1.0, tol: float = 1e-10) -> PhysicalityReport:
    """Covariant uncertainty principle ``V + (i hbar / 2) beta >= 0``.

    The verdict uses the Hermitian eigenvalue route with boundary slack
    ``tol * max|V|``; the report also carries the ``kappa >= hbar/2`` verdict
    at the same slack so callers can confirm the two agree.  Matrices that
    are not positive definite are simply unphysical.
    """
    V = symmetrize(_checked(V))
    n = V.shape[0] // 2
    slack = tol * max(float(np.abs(V).max()), 1e-300)
    lam = float(np.linalg.eigvalsh(V + 0.5j * hbar * metric(n)).min())
    try:
        kmin = float(symplectic_eigenvalues(V).min())
    except SpectralError:
        kmin = float("nan")
    kappa_ok = bool(np.isfinite(kmin) and kmin - 0.5 * hbar >= -slack)
    return PhysicalityReport(
        physical=lam >= -slack, min_eigenvalue=lam, min_kappa=kmin, kappa_route=kappa_ok
    )
