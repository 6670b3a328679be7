"""Arthurs-Kelly joint measurement of q and p with two pointers.

Coordinates follow :data:`~akmeasure.symplectic.AK_LAYOUT`:
``(q, p, Q1, P1, Q2, P2)``.  The interaction is ``K1 q P1 + K2 p P2``; the
pointers ``Q1`` and ``Q2`` commute and record ``q`` and ``p``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import symplectic as sp

__all__ = [
    "AKParams",
    "SystemMoments",
    "ChannelEstimate",
    "EstimationError",
    "UnphysicalStateError",
    "ak_hamiltonian",
    "ak_generator",
    "ak_propagator",
    "initial_means",
    "pointer_means",
    "product_variance",
    "pointer_spreads",
    "pointer_noise",
    "uncertainty_bound",
    "invert_pointer_statistics",
    "invert_with_propagator",
    "sequential_propagator",
]

Q, P, Q1, P1, Q2, P2 = range(6)


class UnphysicalStateError(ValueError):
    pass


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class AKParams:
    """Couplings, pointer widths, Planck constant and interaction time."""

    K1: float = 1.0
    K2: float = 1.0
    b1: float = 1.0
    b2: float = 1.0
    hbar: float = 1.0
    t: float = 1.0

    def __post_init__(self):
        for name in ("b1", "b2", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not self.t >= 0:
            raise ValueError(f"t must be nonnegative, got {self.t!r}")
        for name in ("K1", "K2", "t"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "AKParams":
        unknown = set(d) - {"K1", "K2", "b1", "b2", "hbar", "t"}
        if unknown:
            raise ValueError(f"unknown AKParams keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def replace(self, **changes) -> "AKParams":
        d = asdict(self)
        d.update(changes)
        return AKParams(**d)


@dataclass(frozen=True)
class SystemMoments:
    """First and second moments of the system pair at t = 0."""

    q0: float = 0.0
    p0: float = 0.0
    var_q: float = 0.5
    var_p: float = 0.5
    cov_qp: float = 0.0

    def determinant(self) -> float:
        return self.var_q * self.var_p - self.cov_qp**2

    def is_physical(self, hbar: float, slack: float = 1e-12) -> bool:
        return (
            self.var_q > 0
            and self.var_p > 0
            and self.determinant() >= 0.25 * hbar**2 * (1 - slack)
        )

    def block(self) -> np.ndarray:
        return np.array([[self.var_q, self.cov_qp], [self.cov_qp, self.var_p]])

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SystemMoments":
        unknown = set(d) - {"q0", "p0", "var_q", "var_p", "cov_qp"}
        if unknown:
            raise ValueError(f"unknown SystemMoments keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})


def ak_hamiltonian(K1: float, K2: float) -> sp.QuadraticHamiltonian:
    h = np.zeros((6, 6))
    h[Q, P1] = h[P1, Q] = K1
    h[P, P2] = h[P2, P] = K2
    return sp.QuadraticHamiltonian(
        h,
        unit_note="h[q,P1] = K1 (1/mass), h[p,P2] = K2 (1/mass); H = K1 q P1 + K2 p P2",
        layout=sp.AK_LAYOUT,
    )


def ak_generator(K1: float, K2: float) -> np.ndarray:
    return sp.generator(ak_hamiltonian(K1, K2))


def ak_propagator(params: AKParams) -> np.ndarray:
    """Closed form of ``exp(-tJ) = I - tJ + (t^2/2) J^2`` (``J^3 = 0``)."""
    t, K1, K2 = params.t, params.K1, params.K2
    S = np.eye(6)
    S[Q, Q1] = t * K1
    S[P, Q2] = t * K2
    S[P1, P] = -t * K1
    S[P1, Q2] = -0.5 * t * t * K1 * K2
    S[P2, Q] = t * K2
    S[P2, Q1] = 0.5 * t * t * K1 * K2
    return S


def initial_means(moments: SystemMoments) -> np.ndarray:
    """Mean vector of a product preparation: centred pointers."""
    return np.array([moments.q0, moments.p0, 0.0, 0.0, 0.0, 0.0])


def pointer_means(xi0, params: AKParams) -> tuple[float, float]:
    """Pointer means ``(Q1(t), Q2(t))`` from the full initial mean vector."""
    xi0 = np.asarray(xi0, dtype=float)
    if xi0.shape != (6,):
        raise ValueError(f"expected the 6-component A-K mean vector, got shape {xi0.shape}")
    t, K1, K2 = params.t, params.K1, params.K2
    Q1t = xi0[Q1] + t * K1 * xi0[Q] + 0.5 * t * t * K1 * K2 * xi0[P2]
    Q2t = xi0[Q2] + t * K2 * xi0[P] - 0.5 * t * t * K1 * K2 * xi0[P1]
    return float(Q1t), float(Q2t)


def product_variance(
    moments: SystemMoments, params: AKParams, strict: bool = True
) -> np.ndarray:
    """Block-diagonal V(0) for ``psi(q)`` times centred Gaussian pointers.

    With ``strict=False`` unphysical system moments only emit a warning.
    """
    if not moments.is_physical(params.hbar):
        msg = (
            f"system moments violate var_q var_p - cov^2 >= hbar^2/4: "
            f"{moments.determinant():.6e} < {0.25 * params.hbar ** 2:.6e}"
        )
        if strict:
            raise UnphysicalStateError(msg)
        warnings.warn(msg, stacklevel=2)
    hb2 = params.hbar**2
    V = np.zeros((6, 6))
    V[0:2, 0:2] = moments.block()
    V[2:4, 2:4] = np.diag([params.b1 / 4, hb2 / params.b1])
    V[4:6, 4:6] = np.diag([params.b2 / 4, hb2 / params.b2])
    return V


def pointer_spreads(V0, params: AKParams) -> tuple[float, float]:
    """``(Var Q1(t), Var Q2(t))`` as explicit sums over ``V0`` entries.

    Each is ``S[:, k] @ V0 @ S[:, k]`` for pointer column ``k``; only three
    direct and three cross terms survive.
    """
    V = sp.symmetrize(V0)
    if V.shape != (6, 6):
        raise ValueError(f"expected a 6x6 variance matrix, got {V.shape}")
    t, K1, K2 = params.t, params.K1, params.K2
    a, c = t * K1, 0.5 * t * t * K1 * K2
    varQ1 = (
        V[Q1, Q1]
        + a * a * V[Q, Q]
        + c * c * V[P2, P2]
        + 2 * a * V[Q, Q1]
        + 2 * c * V[Q1, P2]
        + 2 * a * c * V[Q, P2]
    )
    d = t * K2
    varQ2 = (
        V[Q2, Q2]
        + d * d * V[P, P]
        + c * c * V[P1, P1]
        + 2 * d * V[P, Q2]
        - 2 * c * V[P1, Q2]
        - 2 * d * c * V[P, P1]
    )
    return float(varQ1), float(varQ2)


def pointer_noise(params: AKParams) -> tuple[float, float]:
    """Extra pointer variance of a product preparation beyond ``(tK)^2 Var``."""
    core = params.b1 * params.b2 + (params.t**2 * params.hbar * params.K1 * params.K2) ** 2
    return core / (4 * params.b2), core / (4 * params.b1)


def uncertainty_bound(params: AKParams) -> float:
    """Lower bound on ``dQ1(t) dQ2(t)`` for product preparations.

    ``(sqrt(b1 b2) + t^2 hbar |K1 K2|)^2 / (4 sqrt(b1 b2))``; it is attained by a
    minimum-uncertainty system state with ``(tK1)^2 var_q / b1 = (tK2)^2 var_p / b2``.
    The coupling product enters through its modulus, so the bound stays tight
    when ``K1 K2 < 0``.
    """
    r = math.sqrt(params.b1 * params.b2)
    x = params.t**2 * params.hbar * abs(params.K1 * params.K2)
    return (r + x) ** 2 / (4 * r)


@dataclass(frozen=True)
class ChannelEstimate:
    """Inverted mean and variance of one system observable.

    ``failed`` marks a negative variance after noise subtraction; ``var`` then
    still holds the raw (negative) value, never a clamp.
    """

    mean: float
    var: float
    noise: float
    gain: float
    failed: bool = False


def _apparatus_block(params: AKParams) -> np.ndarray:
    hb2 = params.hbar**2
    return np.diag([params.b1 / 4, hb2 / params.b1, params.b2 / 4, hb2 / params.b2])


def invert_with_propagator(
    S,
    meanQ1: Optional[float],
    meanQ2: Optional[float],
    varQ1: Optional[float],
    varQ2: Optional[float],
    params: AKParams,
) -> dict:
    """Invert pointer statistics through any forward propagator ``S``.

    Requires the q record to sit on ``Q1`` alone and the p record on ``Q2``
    alone (``S[p, Q1] == S[q, Q2] == 0``), which holds for the A-K propagator and
    for sequential compositions.  A channel is inverted only when its gain
    is nonzero and its statistics are supplied.  Returns ``{"q": ..., "p": ...}``
    with absent channels omitted.
    """
    S = np.asarray(S, dtype=float)
    if S[P, Q1] != 0 or S[Q, Q2] != 0:
        raise EstimationError("pointer records mix q and p; channel inversion undefined")
    app = _apparatus_block(params)
    out = {}
    for name, col, row, mean, var in (
        ("q", Q1, Q, meanQ1, varQ1),
        ("p", Q2, P, meanQ2, varQ2),
    ):
        gain = float(S[row, col])
        if gain == 0 or mean is None or var is None:
            continue
        s_app = S[2:, col]
        noise = float(s_app @ app @ s_app)
        raw = (var - noise) / gain**2
        out[name] = ChannelEstimate(
            mean=mean / gain, var=raw, noise=noise, gain=gain, failed=not raw > 0
        )
    return out


def invert_pointer_statistics(
    meanQ1: Optional[float],
    meanQ2: Optional[float],
    varQ1: Optional[float],
    varQ2: Optional[float],
    params: AKParams,
    channels: Optional[tuple] = None,
) -> dict:
    """System moments at t = 0 from pointer statistics at t.

    ``channels`` lists the channels to invert (default: every coupled one).
    Asking for a channel whose gain ``tK`` vanishes raises
    :class:`EstimationError`.
    """
    gains = {"q": params.t * params.K1, "p": params.t * params.K2}
    if channels is None:
        channels = tuple(c for c in ("q", "p") if gains[c] != 0)
        if not channels:
            raise EstimationError("both couplings vanish; nothing to estimate")
    for c in channels:
        if c not in gains:
            raise EstimationError(f"unknown channel {c!r}")
        if gains[c] == 0:
            raise EstimationError(f"channel {c!r} has zero coupling t*K")
    return invert_with_propagator(
        ak_propagator(params),
        meanQ1 if "q" in channels else None,
        meanQ2 if "p" in channels else None,
        varQ1 if "q" in channels else None,
        varQ2 if "p" in channels else None,
        params,
    )


def sequential_propagator(
    stage1: tuple, stage2: tuple, hbar: float = 1.0
) -> np.ndarray:
    """Heisenberg matrix for stage 1 followed by stage 2.

    Stages are ``(K1, K2, t)`` triples.  With ``U = U2 U1`` the operators evolve
    as ``U^dag xi U = (S1 S2)^T xi``, so the composite is ``S1 @ S2``.
    """
    mats = []
    for K1, K2, t in (stage1, stage2):
        mats.append(ak_propagator(AKParams(K1=K1, K2=K2, t=t, hbar=hbar)))
    return sp.compose(mats[0], mats[1])

