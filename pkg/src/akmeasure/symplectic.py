"""Real symplectic group Sp(2n, R) in the interleaved (q1, p1, q2, p2, ...) ordering.

Matrices are plain ``numpy`` arrays.  The Heisenberg-picture convention is
``xi(t) = S(t).T @ xi(0)`` so that ``S`` can be compared entry by entry with
the propagators written out for the quadratic Hamiltonians in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

__all__ = [
    "SymplecticError",
    "ModeLayout",
    "QuadraticHamiltonian",
    "AK_LAYOUT",
    "metric",
    "is_symplectic",
    "symplectic_residual",
    "default_tolerance",
    "check_symplectic",
    "generator",
    "nilpotency_index",
    "propagator",
    "compose",
    "symplectic_inverse",
    "evolve_mean",
    "evolve_variance",
    "symmetrize",
    "pair_scaling",
    "pair_rotation",
    "random_symplectic",
]


class SymplecticError(ValueError):
    """Raised for shape errors, group-membership failures and overflow."""


@dataclass(frozen=True)
class ModeLayout:
    """Names of the 2n canonical coordinates; odd slots (1-based) are positions."""

    n: int
    labels: tuple

    def __post_init__(self):
        if self.n < 1:
            raise SymplecticError("a layout needs at least one canonical pair")
        if len(self.labels) != 2 * self.n:
            raise SymplecticError(
                f"expected {2 * self.n} labels for n={self.n}, got {len(self.labels)}"
            )

    @property
    def positions(self):
        return self.labels[0::2]

    @property
    def momenta(self):
        return self.labels[1::2]

    def index(self, label: str) -> int:
        """0-based slot of ``label``."""
        return self.labels.index(label)


AK_LAYOUT = ModeLayout(3, ("q", "p", "Q1", "P1", "Q2", "P2"))


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """``H = 1/2 h_ab xi_a xi_b`` with ``h`` symmetrized at construction."""

    h: np.ndarray
    unit_note: str = ""
    layout: Optional[ModeLayout] = field(default=None, compare=False)

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] % 2:
            raise SymplecticError(f"h must be square with even dimension, got {h.shape}")
        h = 0.5 * (h + h.T)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.h.shape[0] // 2

    def energy(self, xi) -> float:
        """Classical value ``1/2 xi^T h xi`` of the quadratic form."""
        xi = np.asarray(xi, dtype=float)
        return 0.5 * float(xi @ self.h @ xi)


def _mode_count(M: np.ndarray) -> int:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise SymplecticError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] == 0 or M.shape[0] % 2:
        raise SymplecticError(f"expected an even dimension, got {M.shape[0]}")
    return M.shape[0] // 2


def metric(n: int) -> np.ndarray:
    """Block-diagonal symplectic metric with ``n`` copies of ``[[0, 1], [-1, 0]]``."""
    if int(n) != n or n < 1:
        raise SymplecticError(f"mode count must be a positive integer, got {n!r}")
    return np.kron(np.eye(int(n)), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_residual(M) -> float:
    """``max |M^T beta M - beta|``."""
    M = np.asarray(M, dtype=float)
    beta = metric(_mode_count(M))
    return float(np.abs(M.T @ beta @ M - beta).max())


def is_symplectic(M, tol: float = 1e-10) -> bool:
    """True iff ``max |M^T beta M - beta| <= tol``."""
    if tol <= 0:
        raise SymplecticError("tolerance must be positive")
    return symplectic_residual(M) <= tol


def default_tolerance(M, base: float = 1e-10) -> float:
    """Membership tolerance scaled by the size of ``M``.

    Rounding in ``M^T beta M`` grows with the square of the entries, so the
    base tolerance is multiplied by ``max(1, max|M|)**2``.
    """
    scale = max(1.0, float(np.abs(M).max()))
    return base * scale * scale


def check_symplectic(M, tol: Optional[float] = None) -> np.ndarray:
    """Return ``M`` as a float array, raising if it is not symplectic."""
    M = np.asarray(M, dtype=float)
    _mode_count(M)
    if not np.all(np.isfinite(M)):
        raise SymplecticError("matrix has non-finite entries")
    tol = default_tolerance(M) if tol is None else tol
    res = symplectic_residual(M)
    if res > tol:
        raise SymplecticError(f"not symplectic: residual {res:.3e} exceeds {tol:.3e}")
    return M


def generator(ham: QuadraticHamiltonian | np.ndarray) -> np.ndarray:
    """``J = h beta``; satisfies ``J^T beta + beta J = 0``."""
    h = ham.h if isinstance(ham, QuadraticHamiltonian) else np.asarray(ham, dtype=float)
    n = _mode_count(h)
    return h @ metric(n)


def nilpotency_index(J, kmax: Optional[int] = None, tol: float = 1e-14) -> Optional[int]:
    """Smallest ``k <= kmax`` with ``J**k`` vanishing, else ``None``.

    A power counts as zero when ``max|J**k| <= tol * max|J|**k``; the
    A-K generator cancels exactly, so its powers are true zeros.
    """
    J = np.asarray(J, dtype=float)
    n = _mode_count(J)
    kmax = 2 * n if kmax is None else kmax
    if kmax < 1:
        raise SymplecticError("kmax must be at least 1")
    scale = float(np.abs(J).max())
    if scale == 0.0:
        return 1
    power = J.copy()
    for k in range(1, kmax + 1):
        if np.abs(power).max() <= tol * scale**k:
            return k
        power = power @ J
    return None


def propagator(J, t: float, kmax: Optional[int] = None, method: str = "auto") -> np.ndarray:
    """``S(t) = exp(-t J)``.

    With ``method="auto"`` a nilpotent generator of index ``k`` gives the
    exact polynomial ``sum_{m<k} (-tJ)^m / m!``; anything else goes through
    scaling and squaring (``scipy.linalg.expm``).  ``method`` may force
    ``"polynomial"`` or ``"expm"``.
    """
    J = np.asarray(J, dtype=float)
    n = _mode_count(J)
    if not np.isfinite(t):
        raise SymplecticError(f"time must be finite, got {t!r}")
    if method not in ("auto", "polynomial", "expm"):
        raise SymplecticError(f"unknown method {method!r}")

    k = None
    if method in ("auto", "polynomial"):
        k = nilpotency_index(J, kmax)
        if k is None and method == "polynomial":
            raise SymplecticError("generator is not nilpotent; polynomial form unavailable")

    with np.errstate(over="ignore", invalid="ignore"):
        if k is not None:
            X = -t * J
            S = np.eye(2 * n)
            term = np.eye(2 * n)
            for m in range(1, k):
                term = term @ X / m
                S = S + term
        else:
            S = expm(-t * J)
    if not np.all(np.isfinite(S)):
        raise SymplecticError(
            f"exp(-tJ) overflowed for t*max|J| = {abs(t) * np.abs(J).max():.3e}"
        )
    return S


def compose(A, B, tol: Optional[float] = None) -> np.ndarray:
    """Matrix product ``A @ B`` of two symplectic matrices, validated."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise SymplecticError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return check_symplectic(A @ B, tol)


def symplectic_inverse(S) -> np.ndarray:
    """``S^{-1} = -beta S^T beta``, with no general inversion."""
    S = np.asarray(S, dtype=float)
    beta = metric(_mode_count(S))
    return -beta @ S.T @ beta


def evolve_mean(S, xi0) -> np.ndarray:
    """``xi_a(t) = S_ba xi_b(0)``, i.e. ``S.T @ xi0``."""
    S = np.asarray(S, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    if xi0.shape != (S.shape[0],):
        raise SymplecticError(f"mean vector of shape {xi0.shape} does not match {S.shape}")
    return S.T @ xi0


def symmetrize(V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    return 0.5 * (V + V.T)


def evolve_variance(S, V0, validate: bool = False) -> np.ndarray:
    """Congruence ``S^T V0 S``, resymmetrized.

    ``validate=True`` additionally checks that positive definiteness of
    ``V0`` survives the transformation.
    """
    S = np.asarray(S, dtype=float)
    V0 = np.asarray(V0, dtype=float)
    if V0.shape != S.shape:
        raise SymplecticError(f"variance matrix {V0.shape} does not match {S.shape}")
    Vt = symmetrize(S.T @ V0 @ S)
    if validate:
        if np.linalg.eigvalsh(symmetrize(V0)).min() > 0 and np.linalg.eigvalsh(Vt).min() <= 0:
            raise SymplecticError("congruence lost positive definiteness")
    return Vt


def pair_scaling(scales: Sequence[float]) -> np.ndarray:
    """``blockdiag(diag(s_j, 1/s_j))``: reciprocal scaling inside each pair."""
    scales = np.asarray(scales, dtype=float)
    if np.any(scales <= 0):
        raise SymplecticError("pair scalings must be positive")
    return np.diag(np.column_stack([scales, 1.0 / scales]).ravel())


def pair_rotation(angles: Sequence[float]) -> np.ndarray:
    """Phase-space rotation inside each canonical pair (orthogonal symplectic)."""
    blocks = [np.array([[np.cos(a), np.sin(a)], [-np.sin(a), np.cos(a)]]) for a in angles]
    n = len(blocks)
    R = np.zeros((2 * n, 2 * n))
    for j, blk in enumerate(blocks):
        R[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = blk
    return R


def random_symplectic(n: int, rng: np.random.Generator, spread: float = 0.5) -> np.ndarray:
    """Random element ``exp(beta A)`` with ``A`` symmetric Gaussian of width ``spread``.

    Any ``beta @ symmetric`` is in the Lie algebra, so the exponential lies in
    Sp(2n, R); ``spread`` controls how far from the identity it sits.
    """
    A = rng.normal(scale=spread, size=(2 * n, 2 * n))
    A = 0.5 * (A + A.T)
    return expm(metric(n) @ A)
