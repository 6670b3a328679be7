"""Monte Carlo pointer readings and estimates of the system's initial moments.

Random numbers come from numpy's PCG64 seeded through
``SeedSequence(seed, spawn_key=(stream,))``, so a ``(seed, stream)`` pair
fixes a batch bit for bit and distinct streams are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import ak_model as ak
from . import symplectic as sp
from . import wavefield as wf
from .formats import write_csv

__all__ = [
    "REGIMES",
    "SampleBatch",
    "ChannelReport",
    "EstimateReport",
    "make_rng",
    "sample",
    "estimate",
    "forward_snapshots",
    "simulate_distribution",
    "run_regime",
    "run_sequential",
    "sequential_sweep",
]

REGIMES = ("joint", "q-only", "p-only", "sequential")


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream),)))
    )


@dataclass(frozen=True, eq=False)
class SampleBatch:
    pairs: np.ndarray
    seed: int
    stream: int = 0
    source: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.pairs)

    def __eq__(self, other):
        if not isinstance(other, SampleBatch):
            return NotImplemented
        return (self.seed, self.stream) == (other.seed, other.stream) and np.array_equal(
            self.pairs, other.pairs
        )

    def to_csv(self, path) -> Path:
        rows = ((i, q1, q2) for i, (q1, q2) in enumerate(self.pairs))
        return write_csv(path, ("index", "Q1", "Q2"), rows)


def _invert_cell_cdf(masses: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cell index and in-cell fraction for uniforms ``u`` under cell masses."""
    cdf = np.cumsum(masses)
    target = u * cdf[-1]
    idx = np.searchsorted(cdf, target, side="right")
    idx = np.minimum(idx, len(masses) - 1)
    # Zero-mass cells never get picked: searchsorted lands past flat CDF runs.
    before = np.where(idx > 0, cdf[np.maximum(idx - 1, 0)], 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(masses[idx] > 0, (target - before) / masses[idx], 0.5)
    return idx, np.clip(frac, 0.0, 1.0)


def sample(
    P: wf.JointDistribution,
    count: int,
    seed: int,
    stream: int = 0,
    source: Optional[dict] = None,
    norm_tol: float = 1e-5,
) -> SampleBatch:
    """Draw ``(Q1, Q2)`` pairs by inverse CDF: ``Q1`` marginal, then ``Q2 | Q1``.

    Each grid point owns the cell of width ``spacing`` centred on it; the CDF
    is linear inside a cell, so draws are uniform within their cell.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    total = P.total()
    if abs(total - 1.0) > norm_tol:
        raise ValueError(f"distribution is not normalized: total {total:.8f}")
    vals = P.values
    floor = -1e-12 * np.abs(vals).max()
    if vals.min() < floor:
        raise ValueError(f"distribution has negative values down to {vals.min():.3e}")
    mass = np.clip(vals, 0.0, None) * P.weights

    rng = make_rng(seed, stream)
    u = rng.random((count, 2))
    a1, a2 = P.axes
    i, f1 = _invert_cell_cdf(mass.sum(axis=1), u[:, 0])
    Q1 = a1.points[i] + (f1 - 0.5) * a1.spacing
    Q2 = np.empty(count)
    order = np.argsort(i, kind="stable")
    rows, starts = np.unique(i[order], return_index=True)
    bounds = list(starts[1:]) + [count]
    for row, lo, hi in zip(rows, starts, bounds):
        sel = order[lo:hi]
        j, f2 = _invert_cell_cdf(mass[row], u[sel, 1])
        Q2[sel] = a2.points[j] + (f2 - 0.5) * a2.spacing
    return SampleBatch(np.column_stack([Q1, Q2]), int(seed), int(stream), dict(source or {}))


@dataclass(frozen=True)
class ChannelReport:
    """One inverted channel: system mean and variance with standard errors."""

    mean: float
    mean_se: float
    var: float
    var_se: float
    noise: float
    pointer_mean: float
    pointer_var: float
    status: str = "ok"


@dataclass(frozen=True)
class EstimateReport:
    regime: str
    sample_count: int
    q: Optional[ChannelReport] = None
    p: Optional[ChannelReport] = None
    seed: Optional[int] = None
    extras: dict = field(default_factory=dict)

    @property
    def q0_hat(self):
        return None if self.q is None else self.q.mean

    @property
    def p0_hat(self):
        return None if self.p is None else self.p.mean

    @property
    def var_q_hat(self):
        return None if self.q is None else self.q.var

    @property
    def var_p_hat(self):
        return None if self.p is None else self.p.var

    def to_dict(self) -> dict:
        out = {"regime": self.regime, "sample_count": self.sample_count, "seed": self.seed}
        for name, ch in (("q", self.q), ("p", self.p)):
            if ch is None:
                continue
            out[f"{name}0_hat"] = ch.mean
            out[f"{name}0_se"] = ch.mean_se
            out[f"var_{name}_hat"] = ch.var
            out[f"var_{name}_se"] = ch.var_se
            out[f"noise_{name}"] = ch.noise
            out[f"pointer_mean_{name}"] = ch.pointer_mean
            out[f"pointer_var_{name}"] = ch.pointer_var
            out[f"var_{name}_status"] = ch.status
        if self.extras:
            out["extras"] = dict(self.extras)
        return out


def _sample_stats(x: np.ndarray) -> tuple[float, float, float, float]:
    """Mean, its SE, unbiased variance and the delta-method SE of the variance."""
    n = len(x)
    mean = float(x.mean())
    if n < 2:
        return mean, math.inf, math.nan, math.inf
    d = x - mean
    s2 = float(d @ d / (n - 1))
    m4 = float(np.mean(d**4))
    var_s2 = (m4 - s2 * s2 * (n - 3) / (n - 1)) / n
    return mean, math.sqrt(s2 / n), s2, math.sqrt(max(var_s2, 0.0))


def _regime_propagator(params: ak.AKParams, regime: str, propagator) -> tuple[np.ndarray, tuple]:
    gq, gp = params.t * params.K1, params.t * params.K2
    if regime == "joint":
        if gq == 0 or gp == 0:
            raise ak.EstimationError("joint regime needs both t*K1 and t*K2 nonzero")
        return ak.ak_propagator(params), ("q", "p")
    if regime == "q-only":
        if params.K2 != 0 or gq == 0:
            raise ak.EstimationError("q-only regime needs K2 = 0 and t*K1 != 0")
        return ak.ak_propagator(params), ("q",)
    if regime == "p-only":
        if params.K1 != 0 or gp == 0:
            raise ak.EstimationError("p-only regime needs K1 = 0 and t*K2 != 0")
        return ak.ak_propagator(params), ("p",)
    if regime == "sequential":
        if propagator is None:
            raise ak.EstimationError("sequential regime needs the composite propagator")
        S = np.asarray(propagator, dtype=float)
        chans = tuple(c for c, (r, k) in (("q", (0, 2)), ("p", (1, 4))) if S[r, k] != 0)
        return S, chans
    raise ak.EstimationError(f"unknown regime {regime!r}; expected one of {REGIMES}")


def estimate(
    batch: SampleBatch,
    params: ak.AKParams,
    regime: str = "joint",
    propagator=None,
) -> EstimateReport:
    """Invert batch statistics to ``q(0), p(0), var_q(0), var_p(0)``.

    The forward model is ``params``' A-K propagator, or ``propagator`` for the
    sequential regime.  Standard errors: ``s / sqrt(N)`` for means and the
    delta method (fourth central moment) for variances, both divided by the
    channel gain.  Status ``"failed"`` marks a negative variance after noise
    subtraction (the raw value is kept); ``"undefined"`` marks N = 1.
    """
    S, chans = _regime_propagator(params, regime, propagator)
    x = np.asarray(batch.pairs, dtype=float)
    stats = {"q": _sample_stats(x[:, 0]), "p": _sample_stats(x[:, 1])}
    inv = ak.invert_with_propagator(
        S,
        stats["q"][0] if "q" in chans else None,
        stats["p"][0] if "p" in chans else None,
        stats["q"][2] if "q" in chans else None,
        stats["p"][2] if "p" in chans else None,
        params,
    )
    reports = {}
    for name in chans:
        mean, mean_se, s2, s2_se = stats[name]
        ch = inv[name]
        g = abs(ch.gain)
        if math.isnan(s2):
            status = "undefined"
        elif ch.failed:
            status = "failed"
        else:
            status = "ok"
        reports[name] = ChannelReport(
            mean=ch.mean,
            mean_se=mean_se / g,
            var=ch.var,
            var_se=s2_se / g**2,
            noise=ch.noise,
            pointer_mean=mean,
            pointer_var=s2,
            status=status,
        )
    return EstimateReport(
        regime=regime,
        sample_count=len(x),
        q=reports.get("q"),
        p=reports.get("p"),
        seed=batch.seed,
    )


def forward_snapshots(moments: ak.SystemMoments, params: ak.AKParams, stages: Sequence) -> list:
    """Predicted ``(mean, V)`` at t = 0 and after each stage's propagator."""
    xi = ak.initial_means(moments)
    V = ak.product_variance(moments, params, strict=False)
    snaps = [(xi, V)]
    for S in stages:
        xi = sp.evolve_mean(S, xi)
        V = sp.evolve_variance(S, V)
        snaps.append((xi, V))
    return snaps


def _stage_params(params: ak.AKParams, stages) -> list:
    return [params.replace(K1=k1, K2=k2, t=t) for k1, k2, t in stages]


def simulate_distribution(
    psi_factory,
    moments: ak.SystemMoments,
    params: ak.AKParams,
    stages: Sequence[tuple],
    axes=None,
    count: Optional[int] = None,
    refine: int = 4,
):
    """Grid-propagate a product preparation through ``stages`` of ``(K1, K2, t)``.

    ``psi_factory(axis)`` builds the system wavefunction on the chosen q axis.
    Returns ``(P, axes)`` where ``P`` is the final Born-rule distribution.
    """
    stage_params = _stage_params(params, stages)
    if axes is None:
        snaps = forward_snapshots(moments, params, [ak.ak_propagator(p) for p in stage_params])
        axes = wf.plan_axes(snaps, params.hbar, count=count)
    psi = psi_factory(axes[0])
    G = wf.product_initial(psi, params, axes)
    for p in stage_params:
        G = wf.propagate(G, p)
    return wf.joint_distribution(G, refine=refine), axes


def run_regime(
    psi_factory,
    moments: ak.SystemMoments,
    params: ak.AKParams,
    regime: str,
    count: int,
    seed: int,
    axes=None,
    grid_count: Optional[int] = None,
    refine: int = 4,
) -> tuple[EstimateReport, SampleBatch]:
    """Single-interaction run: propagate, sample the final distribution, estimate."""
    P, _ = simulate_distribution(
        psi_factory, moments, params, [(params.K1, params.K2, params.t)], axes, grid_count, refine
    )
    batch = sample(P, count, seed, source={"regime": regime, "params": params.to_dict()})
    return estimate(batch, params, regime), batch


def run_sequential(
    psi_factory,
    moments: ak.SystemMoments,
    params: ak.AKParams,
    stage1: tuple,
    stage2: tuple,
    count: int,
    seed: int,
    axes=None,
    grid_count: Optional[int] = None,
    refine: int = 4,
) -> tuple[EstimateReport, SampleBatch]:
    """q record then p record: ``stage1 = (K1, t1)``, ``stage2 = (K2, t2)``.

    The full wavefunction goes through both interactions and only the final
    distribution is sampled.  Estimates use the composite forward model;
    ``extras`` also carries the naive p estimate from the stage-2 model alone,
    whose excess over the composite one is the stage-1 back action.
    """
    (K1, t1), (K2, t2) = stage1, stage2
    stages = [(K1, 0.0, t1), (0.0, K2, t2)]
    S_total = ak.sequential_propagator(stages[0], stages[1], params.hbar)
    P, _ = simulate_distribution(psi_factory, moments, params, stages, axes, grid_count, refine)
    source = {"regime": "sequential", "stage1": [K1, t1], "stage2": [K2, t2]}
    batch = sample(P, count, seed, source=source)
    report = estimate(batch, params, "sequential", propagator=S_total)

    extras = {"stage1_strength": K1 * t1, "b1": params.b1}
    if report.p is not None:
        pB = ak.invert_with_propagator(
            ak.ak_propagator(params.replace(K1=0.0, K2=K2, t=t2)),
            None,
            report.p.pointer_mean,
            None,
            report.p.pointer_var,
            params,
        )["p"]
        extras["naive_var_p_hat"] = pB.var
        extras["back_action_noise"] = report.p.noise - pB.noise
    report = EstimateReport(
        regime=report.regime,
        sample_count=report.sample_count,
        q=report.q,
        p=report.p,
        seed=report.seed,
        extras=extras,
    )
    return report, batch


def sequential_sweep(
    psi_factory,
    moments: ak.SystemMoments,
    params: ak.AKParams,
    strengths: Sequence[float],
    stage2: tuple,
    count: int,
    seed: int,
    t1: float = 1.0,
    grid_count: Optional[int] = None,
) -> list[dict]:
    """Weak-to-strong stage-1 sweep at fixed stage 2.

    Rows report the p-channel estimates against ``moments`` (the truth), the
    naive-model bias and the forward-model prediction of the p0 estimator's
    standard error.
    """
    K2, t2 = stage2
    rows = []
    for k in strengths:
        K1 = k / t1
        report, _ = run_sequential(
            psi_factory, moments, params, (K1, t1), stage2, count, seed, grid_count=grid_count
        )
        S = ak.sequential_propagator((K1, 0.0, t1), (0.0, K2, t2), params.hbar)
        V0 = ak.product_variance(moments, params, strict=False)
        varQ2 = float(sp.evolve_variance(S, V0)[4, 4])
        ch = report.p
        rows.append(
            {
                "stage1_strength": k,
                "b1": params.b1,
                "p0_hat": ch.mean,
                "p0_se": ch.mean_se,
                "p0_se_predicted": math.sqrt(varQ2 / count) / abs(K2 * t2),
                "var_p_hat": ch.var,
                "var_p_se": ch.var_se,
                "bias_var_p": ch.var - moments.var_p,
                "naive_bias_var_p": report.extras["naive_var_p_hat"] - moments.var_p,
                "back_action_noise": report.extras["back_action_noise"],
            }
        )
    return rows
