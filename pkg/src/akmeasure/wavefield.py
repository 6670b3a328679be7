"""Wavefunctions on uniform grids, exact A-K propagation and pointer distributions.

Axes are periodic cells: ``count`` points ``min + i * spacing`` with
``spacing = (max - min) / count`` (``max`` itself is not a sample point).
On such a grid the trapezoid rule for functions that vanish at the edges
reduces to a uniform sum, so all quadrature weights equal the spacing.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ak_model import AKParams, SystemMoments
from .formats import dumps, write_csv

__all__ = [
    "GridError",
    "QuadratureError",
    "Axis",
    "SystemWavefunction",
    "GridWavefunction",
    "JointDistribution",
    "plan_axes",
    "product_initial",
    "propagate",
    "joint_distribution",
    "distribution_product_form",
    "distribution_special_case",
    "moments",
    "relative_linf",
    "save_wavefunction",
    "load_wavefunction",
]

NORM_TOL = 1e-8
BOUNDARY_TOL = 1e-8
ALIAS_TOL = 1e-10


class GridError(ValueError):
    """Grid too small, too coarse, or leaking amplitude at its edges."""


class QuadratureError(ArithmeticError):
    """Richardson step-halving estimate above the requested tolerance."""


@dataclass(frozen=True)
class Axis:
    min: float
    max: float
    count: int

    def __post_init__(self):
        if not self.max > self.min:
            raise GridError(f"axis needs max > min, got [{self.min}, {self.max}]")
        c = int(self.count)
        if c != self.count or c < 8 or c & (c - 1):
            raise GridError(f"axis count must be a power of two >= 8, got {self.count!r}")

    @classmethod
    def centered(cls, center: float, halfwidth: float, count: int) -> "Axis":
        return cls(center - halfwidth, center + halfwidth, count)

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / self.count

    @property
    def points(self) -> np.ndarray:
        return self.min + self.spacing * np.arange(self.count)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.count, self.spacing)

    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.count, self.spacing)

    def momenta(self, hbar: float) -> np.ndarray:
        return hbar * self.wavenumbers()

    def coarsened(self) -> "Axis":
        """Same span, every other point."""
        return Axis(self.min, self.max, self.count // 2)

    def to_dict(self) -> dict:
        return {"min": float(self.min), "max": float(self.max), "count": int(self.count)}

    @classmethod
    def from_dict(cls, d) -> "Axis":
        return cls(float(d["min"]), float(d["max"]), int(d["count"]))


def _next_pow2(x: float) -> int:
    return 1 << max(3, math.ceil(math.log2(max(x, 1.0))))


def _momentum_op(values: np.ndarray, axis: Axis, dim: int, hbar: float) -> np.ndarray:
    """``-i hbar d/dx`` along ``dim`` by FFT."""
    k = axis.wavenumbers()
    shape = [1] * values.ndim
    shape[dim] = -1
    return hbar * np.fft.ifft(np.fft.fft(values, axis=dim) * k.reshape(shape), axis=dim)


def _spectral_tail(values: np.ndarray, dim: int) -> float:
    """Fraction of norm in the outer quarter of the discrete spectrum along ``dim``."""
    spec = np.abs(np.fft.fft(values, axis=dim)) ** 2
    n = values.shape[dim]
    f = np.abs(np.fft.fftfreq(n))
    mask = f > 0.375
    other = tuple(i for i in range(values.ndim) if i != dim)
    per_k = spec.sum(axis=other) if other else spec
    total = per_k.sum()
    return float(per_k[mask].sum() / total) if total > 0 else 0.0


def _edge_mass(density: np.ndarray, dim: int, frac: int = 16) -> float:
    n = density.shape[dim]
    w = max(1, n // frac)
    prof = density.sum(axis=tuple(i for i in range(density.ndim) if i != dim))
    total = prof.sum()
    return float((prof[:w].sum() + prof[-w:].sum()) / total) if total > 0 else 0.0


@dataclass(frozen=True)
class SystemWavefunction:
    """Normalized ``psi(q)`` sampled on one axis."""

    axis: Axis
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.axis.count,):
            raise GridError(f"psi has shape {v.shape}, axis has {self.axis.count} points")
        object.__setattr__(self, "values", v)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.axis.spacing)

    def normalized(self) -> "SystemWavefunction":
        return SystemWavefunction(self.axis, self.values / math.sqrt(self.norm()))

    @classmethod
    def gaussian(
        cls,
        axis: Axis,
        q0: float = 0.0,
        p0: float = 0.0,
        var_q: float = 0.5,
        cov_qp: float = 0.0,
        hbar: float = 1.0,
    ) -> "SystemWavefunction":
        """Pure Gaussian with the given centre, position variance and q-p covariance.

        The chirp ``exp(i c (q - q0)^2 / (2 hbar var_q))`` supplies ``cov_qp = c``;
        purity fixes ``var_p = (hbar^2 / 4 + cov_qp^2) / var_q``.
        """
        if var_q <= 0:
            raise ValueError("var_q must be positive")
        x = axis.points - q0
        chirp = cov_qp / var_q
        psi = np.exp(-(x**2) / (4 * var_q) + 1j * chirp * x**2 / (2 * hbar) + 1j * p0 * x / hbar)
        psi *= (2 * np.pi * var_q) ** -0.25
        return cls(axis, psi)

    @classmethod
    def superposition(
        cls, axis: Axis, components: Sequence[dict], hbar: float = 1.0
    ) -> "SystemWavefunction":
        """Normalized sum ``sum_k w_k e^{i phase_k} gaussian_k``.

        Each component is a dict of :meth:`gaussian` keywords plus optional
        ``weight`` and ``phase``.
        """
        total = np.zeros(axis.count, dtype=complex)
        for comp in components:
            comp = dict(comp)
            w = comp.pop("weight", 1.0)
            ph = comp.pop("phase", 0.0)
            total += w * np.exp(1j * ph) * cls.gaussian(axis, hbar=hbar, **comp).values
        return cls(axis, total).normalized()

    def moments(self, hbar: float = 1.0) -> SystemMoments:
        dq = self.axis.spacing
        q = self.axis.points
        psi = self.values
        dens = np.abs(psi) ** 2 * dq
        norm = dens.sum()
        ppsi = _momentum_op(psi, self.axis, 0, hbar)
        qm = float((dens * q).sum() / norm)
        pm = float(np.real(np.vdot(psi, ppsi)) * dq / norm)
        var_q = float((dens * (q - qm) ** 2).sum() / norm)
        var_p = float(np.real(np.vdot(ppsi, ppsi)) * dq / norm - pm**2)
        cov = float(np.real(np.vdot(psi, q * ppsi)) * dq / norm - qm * pm)
        return SystemMoments(q0=qm, p0=pm, var_q=var_q, var_p=var_p, cov_qp=cov)

    def resample(self, axis: Axis) -> "SystemWavefunction":
        if axis == self.axis:
            return self
        from scipy.interpolate import CubicSpline

        x = self.axis.points
        re = CubicSpline(x, self.values.real)(axis.points)
        im = CubicSpline(x, self.values.imag)(axis.points)
        outside = (axis.points < x[0]) | (axis.points > x[-1])
        vals = np.where(outside, 0.0, re + 1j * im)
        return SystemWavefunction(axis, vals)

    def to_dict(self) -> dict:
        return {
            "axis": self.axis.to_dict(),
            "re": self.values.real.tolist(),
            "im": self.values.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "SystemWavefunction":
        axis = Axis.from_dict(d["axis"])
        vals = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
        return cls(axis, vals)


@dataclass(frozen=True)
class GridWavefunction:
    """``Psi(q; Q1, Q2)`` on a (q, Q1, Q2) product grid."""

    axes: tuple
    values: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        shape = tuple(a.count for a in self.axes)
        if len(self.axes) != 3 or self.values.shape != shape:
            raise GridError(f"values of shape {self.values.shape} do not match axes {shape}")

    @property
    def cell(self) -> float:
        return float(np.prod([a.spacing for a in self.axes]))

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.cell)

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean vector and 6x6 variance matrix over ``(q, p, Q1, P1, Q2, P2)``.

        Momenta act spectrally; mixed terms use ``Re <psi| x_a p_b |psi>``,
        which equals the symmetrized product in every case.
        """
        psi = self.values
        norm = self.norm()
        dV = self.cell / norm
        xs = []
        for dim, ax in enumerate(self.axes):
            shape = [1, 1, 1]
            shape[dim] = -1
            xs.append(ax.points.reshape(shape))
        ps = [_momentum_op(psi, ax, dim, self.hbar) for dim, ax in enumerate(self.axes)]
        dens = np.abs(psi) ** 2

        ops = []
        for dim in range(3):
            ops.append(("x", dim))
            ops.append(("p", dim))

        mean = np.empty(6)
        for i, (kind, dim) in enumerate(ops):
            if kind == "x":
                mean[i] = np.sum(dens * xs[dim]) * dV
            else:
                mean[i] = np.real(np.vdot(psi, ps[dim])) * dV

        second = np.empty((6, 6))
        for i, (ki, di) in enumerate(ops):
            for j, (kj, dj) in enumerate(ops):
                if j < i:
                    continue
                if ki == "x" and kj == "x":
                    val = np.sum(dens * xs[di] * xs[dj]) * dV
                elif ki == "p" and kj == "p":
                    val = np.real(np.vdot(ps[di], ps[dj])) * dV
                else:
                    xd = di if ki == "x" else dj
                    pd = dj if ki == "x" else di
                    val = np.real(np.vdot(psi, xs[xd] * ps[pd])) * dV
                second[i, j] = second[j, i] = val
        V = second - np.outer(mean, mean)
        return mean, 0.5 * (V + V.T)

    def check_support(self, tol: float = BOUNDARY_TOL) -> None:
        """Raise :class:`GridError` if amplitude reaches an edge or the Nyquist band."""
        dens = np.abs(self.values) ** 2
        names = ("q", "Q1", "Q2")
        for dim in range(3):
            edge = _edge_mass(dens, dim)
            if edge > tol:
                raise GridError(f"{edge:.2e} of the probability sits at the {names[dim]} edges")
            tail = _spectral_tail(self.values, dim)
            if tail > ALIAS_TOL:
                raise GridError(
                    f"aliasing along {names[dim]}: {tail:.2e} of the norm near Nyquist"
                )


@dataclass(frozen=True)
class JointDistribution:
    """``P(Q1, Q2)`` on a product grid with per-axis quadrature weights."""

    axes: tuple
    values: np.ndarray
    error_estimate: float = field(default=0.0, compare=False)

    def __post_init__(self):
        shape = tuple(a.count for a in self.axes)
        if self.values.shape != shape:
            raise GridError(f"values of shape {self.values.shape} do not match axes {shape}")

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.axes[0].weights, self.axes[1].weights)

    def total(self) -> float:
        return float(np.sum(self.values * self.weights))

    def moments(self) -> dict:
        return moments(self)

    def write_csv(self, path) -> Path:
        Q1 = self.axes[0].points
        Q2 = self.axes[1].points
        rows = ((Q1[i], Q2[j], self.values[i, j]) for i in range(len(Q1)) for j in range(len(Q2)))
        return write_csv(path, ("Q1", "Q2", "P"), rows)

    def summary(self) -> dict:
        out = {"axes": [a.to_dict() for a in self.axes], "total": self.total()}
        out.update(self.moments())
        out["error_estimate"] = float(self.error_estimate)
        return out


def moments(P: JointDistribution) -> dict:
    """Quadrature means, variances and covariance of the two pointers."""
    w = P.values * P.weights
    tot = w.sum()
    Q1 = P.axes[0].points[:, None]
    Q2 = P.axes[1].points[None, :]
    m1 = float((w * Q1).sum() / tot)
    m2 = float((w * Q2).sum() / tot)
    v1 = float((w * (Q1 - m1) ** 2).sum() / tot)
    v2 = float((w * (Q2 - m2) ** 2).sum() / tot)
    c = float((w * (Q1 - m1) * (Q2 - m2)).sum() / tot)
    return {"meanQ1": m1, "meanQ2": m2, "varQ1": v1, "varQ2": v2, "covQ1Q2": c}


def relative_linf(a: JointDistribution, b: JointDistribution) -> float:
    """``max|Pa - Pb| / max|Pb|`` on a shared grid."""
    if a.values.shape != b.values.shape:
        raise GridError("distributions live on different grids")
    return float(np.abs(a.values - b.values).max() / np.abs(b.values).max())


def plan_axes(
    snapshots: Sequence[tuple],
    hbar: float,
    count: Optional[int] = None,
    sigmas: float = 10.0,
    min_count: int = 32,
    max_count: int = 512,
) -> tuple:
    """Size (q, Q1, Q2) axes from predicted means and variance matrices.

    Each axis spans ``mean +- sigmas * std`` over every snapshot, and its
    spacing keeps the conjugate momentum's ``|mean| + sigmas * std`` below
    Nyquist (``pi hbar / spacing``).  ``count`` overrides the point count;
    an explicit count too small for the required spacing is an error.
    """
    axes = []
    names = ("q", "Q1", "Q2")
    for k, (ix, ip) in enumerate(((0, 1), (2, 3), (4, 5))):
        lo, hi, pmax = np.inf, -np.inf, 0.0
        for mean, V in snapshots:
            sx = math.sqrt(max(V[ix, ix], 0.0))
            spp = math.sqrt(max(V[ip, ip], 0.0))
            lo = min(lo, mean[ix] - sigmas * sx)
            hi = max(hi, mean[ix] + sigmas * sx)
            pmax = max(pmax, abs(mean[ip]) + sigmas * spp)
        span = hi - lo
        dx_req = math.pi * hbar / pmax if pmax > 0 else span / min_count
        need = _next_pow2(span / dx_req)
        if count is None:
            n = max(need, min_count)
            if n > max_count:
                raise GridError(
                    f"{names[k]} axis needs {n} points (span {span:.3g}, spacing {dx_req:.3g})"
                )
        else:
            n = int(count)
            if n < need:
                raise GridError(f"{names[k]} axis needs at least {need} points, {n} requested")
        axes.append(Axis(lo, hi, n))
    return tuple(axes)


def product_initial(
    psi: SystemWavefunction, params: AKParams, axes: Sequence[Axis], check: bool = True
) -> GridWavefunction:
    """``psi(q)`` times centred real Gaussians ``exp(-Q1^2/b1 - Q2^2/b2)``."""
    if abs(psi.norm() - 1.0) > NORM_TOL:
        raise GridError(f"psi is not normalized: norm {psi.norm():.12f}")
    ax_q, ax_1, ax_2 = axes
    psi = psi.resample(ax_q)
    Q1 = ax_1.points
    Q2 = ax_2.points
    pre = math.sqrt(2 / math.pi) * (params.b1 * params.b2) ** -0.25
    g1 = np.exp(-(Q1**2) / params.b1)
    g2 = np.exp(-(Q2**2) / params.b2)
    vals = pre * psi.values[:, None, None] * g1[None, :, None] * g2[None, None, :]
    wf = GridWavefunction(tuple(axes), vals, params.hbar)
    if check:
        amp = np.abs(vals)
        peak = amp.max()
        faces = max(
            amp[[0, -1], :, :].max(), amp[:, [0, -1], :].max(), amp[:, :, [0, -1]].max()
        )
        if faces > BOUNDARY_TOL * peak:
            raise GridError(f"initial amplitude at the grid boundary is {faces / peak:.2e} of peak")
    return GridWavefunction(wf.axes, vals / math.sqrt(wf.norm()), params.hbar)


def propagate(psi0: GridWavefunction, params: AKParams, check: bool = True) -> GridWavefunction:
    """Exact evolution under ``K1 q P1 + K2 p P2`` for time ``params.t``.

    In the ``P2`` representation the Schrodinger equation is first order and
    its solution is ``Phi0(q - K2 t P2, Q1 - K1 t (q - K2 t P2 / 2), P2)``.  Both
    shifts are uniform along the shifted axis (the ``Q1`` shift is fixed for
    each ``(q, P2)``), so each is applied exactly as a Fourier phase.
    """
    t, K1, K2 = params.t, params.K1, params.K2
    if t == 0 or (K1 == 0 and K2 == 0):
        return GridWavefunction(psi0.axes, psi0.values.copy(), psi0.hbar)
    ax_q, ax_1, ax_2 = psi0.axes
    hbar = psi0.hbar
    if check:
        psi0.check_support()

    P2 = ax_2.momenta(hbar)
    phi = np.fft.fft(psi0.values, axis=2)
    if K2 != 0:
        kq = ax_q.wavenumbers()
        shift = K2 * t * P2
        phi = np.fft.fft(phi, axis=0)
        phi *= np.exp(-1j * kq[:, None, None] * shift[None, None, :])
        phi = np.fft.ifft(phi, axis=0)
    if K1 != 0:
        k1 = ax_1.wavenumbers()
        c = K1 * t * (ax_q.points[:, None] - 0.5 * K2 * t * P2[None, :])
        phi = np.fft.fft(phi, axis=1)
        phi *= np.exp(-1j * k1[None, :, None] * c[:, None, :])
        phi = np.fft.ifft(phi, axis=1)
    out = GridWavefunction(psi0.axes, np.fft.ifft(phi, axis=2), hbar)
    if check:
        out.check_support()
    return out


def _zero_pad(spec: np.ndarray, n_out: int, dim: int) -> np.ndarray:
    """Embed a centred-in-zero FFT spectrum into a longer one (Nyquist split evenly)."""
    n = spec.shape[dim]
    h = n // 2
    shape = list(spec.shape)
    shape[dim] = n_out
    out = np.zeros(shape, dtype=complex)
    idx = [slice(None)] * spec.ndim

    def put(dst, src, scale=1.0):
        i_dst = list(idx)
        i_src = list(idx)
        i_dst[dim] = dst
        i_src[dim] = src
        out[tuple(i_dst)] += scale * spec[tuple(i_src)]

    put(slice(0, h), slice(0, h))
    put(slice(n_out - h + 1, n_out), slice(h + 1, n))
    put(slice(h, h + 1), slice(h, h + 1), 0.5)
    put(slice(n_out - h, n_out - h + 1), slice(h, h + 1), 0.5)
    return out


def joint_distribution(psi: GridWavefunction, refine: int = 1) -> JointDistribution:
    """Born rule: ``P(Q1, Q2) = int dq |Psi|^2``.

    ``refine > 1`` evaluates ``Psi`` on a ``refine``-times denser (Q1, Q2) grid
    by band-limited (zero-padded Fourier) interpolation, one q slice at a time.
    """
    dq = psi.axes[0].spacing
    if refine == 1:
        P = np.sum(np.abs(psi.values) ** 2, axis=0) * dq
        return JointDistribution(psi.axes[1:], P)
    if refine < 1 or refine & (refine - 1):
        raise GridError(f"refine must be a power of two, got {refine}")
    a1, a2 = psi.axes[1:]
    n1, n2 = a1.count * refine, a2.count * refine
    P = np.zeros((n1, n2))
    scale = refine * refine
    for sl in psi.values:
        spec = np.fft.fft2(sl)
        spec = _zero_pad(_zero_pad(spec, n1, 0), n2, 1)
        P += np.abs(np.fft.ifft2(spec) * scale) ** 2
    return JointDistribution((Axis(a1.min, a1.max, n1), Axis(a2.min, a2.max, n2)), P * dq)


def _product_form_core(psi_vals, qp, wp, qo, wo, Q1, Q2, params: AKParams) -> np.ndarray:
    hbar, K1, K2, b1, b2, t = (params.hbar, params.K1, params.K2, params.b1, params.b2, params.t)
    kt = K2 * t
    X = b2 / (2 * hbar * kt) ** 2 - (K1 * t) ** 2 / (4 * b1)
    C = np.exp(-1j * np.outer(Q2, qp) / (hbar * kt))
    A = np.exp(-X * (qo[:, None] - qp[None, :]) ** 2)
    out = np.empty((len(Q1), len(Q2)))
    for i, q1 in enumerate(Q1):
        B = psi_vals * np.exp(-((q1 - K1 * t * qp) ** 2) / (2 * b1)) * wp
        inner = (A * B[None, :]) @ C.T
        outer = np.exp(-((q1 - K1 * t * qo) ** 2) / b1) * wo
        out[i] = outer @ (np.abs(inner) ** 2)
    return out * 0.5 / (math.pi * hbar * kt) ** 2 * math.sqrt(b2 / b1)


def distribution_product_form(
    psi: SystemWavefunction,
    params: AKParams,
    out_axes: Sequence[Axis],
    q_axis: Optional[Axis] = None,
    rtol: float = 1e-6,
) -> JointDistribution:
    """Closed double-integral form of ``P(Q1, Q2; t)`` for product preparations.

    ``P = (1/2) (pi hbar K2 t)^-2 sqrt(b2/b1) int dq exp(-(Q1 - K1 t q)^2 / b1)
    |int dq' exp(-i Q2 q' / (hbar K2 t)) psi(q') exp(-X (q - q')^2 - (Q1 - K1 t q')^2 / (2 b1))|^2``
    with ``X = b2 / (2 hbar K2 t)^2 - K1^2 t^2 / (4 b1)``.  The inner integral runs
    over psi's axis, the outer one over ``q_axis`` (default psi's axis), both by
    the trapezoid rule.  A step-halved evaluation gives a Richardson error
    estimate; above ``rtol`` (relative to the peak) it raises.
    """
    if params.K2 * params.t == 0:
        raise QuadratureError("formula needs K2 * t != 0")
    q_axis = psi.axis if q_axis is None else q_axis
    Q1 = out_axes[0].points
    Q2 = out_axes[1].points
    fine = _product_form_core(
        psi.values, psi.axis.points, psi.axis.weights, q_axis.points, q_axis.weights, Q1, Q2, params
    )
    coarse = _product_form_core(
        psi.values[::2],
        psi.axis.points[::2],
        2 * psi.axis.weights[::2],
        q_axis.points[::2],
        2 * q_axis.weights[::2],
        Q1,
        Q2,
        params,
    )
    err = float(np.abs(fine - coarse).max() / 3 / np.abs(fine).max())
    if not err <= rtol:
        raise QuadratureError(f"Richardson error estimate {err:.2e} exceeds {rtol:.1e}")
    return JointDistribution(tuple(out_axes), fine, error_estimate=err)


def distribution_special_case(
    psi: SystemWavefunction, b: float, out_axes: Sequence[Axis], rtol: float = 1e-6
) -> JointDistribution:
    """``P(Q1, Q2)`` for hbar = 1, K1 = K2 = K, b1 = 1/b2 = b, K t = 1.

    ``P = (4 pi^3 b)^{-1/2} |int dq' psi(q') exp(-i q' Q2 - (q' - Q1)^2 / (2 b))|^2``.
    The prefactor is fixed by normalization of ``P``.
    """
    if b <= 0:
        raise ValueError("b must be positive")
    Q1 = out_axes[0].points
    Q2 = out_axes[1].points

    def core(vals, qp, wp):
        M = np.exp(-((qp[None, :] - Q1[:, None]) ** 2) / (2 * b)) * (vals * wp)[None, :]
        C = np.exp(-1j * np.outer(Q2, qp))
        return np.abs(M @ C.T) ** 2 / math.sqrt(4 * math.pi**3 * b)

    ax = psi.axis
    fine = core(psi.values, ax.points, ax.weights)
    coarse = core(psi.values[::2], ax.points[::2], 2 * ax.weights[::2])
    err = float(np.abs(fine - coarse).max() / 3 / np.abs(fine).max())
    if not err <= rtol:
        raise QuadratureError(f"Richardson error estimate {err:.2e} exceeds {rtol:.1e}")
    return JointDistribution(tuple(out_axes), fine, error_estimate=err)


_MAGIC = b"AKWF"
_VERSION = 1


def save_wavefunction(psi: GridWavefunction, path, byteorder: str = "<") -> tuple[Path, Path]:
    """Binary container plus a JSON sidecar (``<path>.json``).

    Layout: ``b"AKWF"``, one endianness byte (``L`` or ``B``), three pad bytes,
    then in that byte order: uint32 version, float64 hbar, three axes of
    (float64 min, float64 max, uint64 count), and the values as
    C-ordered (re, im) float64 pairs.
    """
    if byteorder not in "<>":
        raise ValueError("byteorder must be '<' or '>'")
    path = Path(path)
    tag = b"L" if byteorder == "<" else b"B"
    head = struct.pack(f"{byteorder}Id", _VERSION, psi.hbar)
    for ax in psi.axes:
        head += struct.pack(f"{byteorder}ddQ", ax.min, ax.max, ax.count)
    pairs = np.stack([psi.values.real, psi.values.imag], axis=-1).astype(f"{byteorder}f8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC + tag + b"\0\0\0" + head)
        fh.write(pairs.tobytes(order="C"))
    meta = {
        "format": "AKWF",
        "version": _VERSION,
        "endianness": "little" if byteorder == "<" else "big",
        "shape": [a.count for a in psi.axes],
        "axes": dict(zip(("q", "Q1", "Q2"), (a.to_dict() for a in psi.axes))),
        "hbar": psi.hbar,
        "norm": psi.norm(),
        "value_layout": "C-order (re, im) float64 pairs",
    }
    side = path.with_name(path.name + ".json")
    side.write_text(dumps(meta))
    return path, side


def load_wavefunction(path) -> GridWavefunction:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise GridError(f"{path} is not an AKWF container")
    order = {b"L": "<", b"B": ">"}.get(raw[4:5])
    if order is None:
        raise GridError("unknown endianness tag")
    off = 8
    version, hbar = struct.unpack_from(f"{order}Id", raw, off)
    if version != _VERSION:
        raise GridError(f"unsupported container version {version}")
    off += struct.calcsize(f"{order}Id")
    axes = []
    for _ in range(3):
        lo, hi, n = struct.unpack_from(f"{order}ddQ", raw, off)
        off += struct.calcsize(f"{order}ddQ")
        axes.append(Axis(lo, hi, n))
    shape = tuple(a.count for a in axes) + (2,)
    pairs = np.frombuffer(raw, dtype=f"{order}f8", offset=off).reshape(shape)
    vals = pairs[..., 0].astype(float) + 1j * pairs[..., 1].astype(float)
    return GridWavefunction(tuple(axes), vals, float(hbar))
