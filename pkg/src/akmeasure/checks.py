"""Built-in invariant suite behind ``akmeasure check``.

Each check returns ``(passed, detail)``; :func:`run_checks` times them.
Fixtures come from a fixed seed so results are repeatable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from . import ak_model as ak
from . import spectral as spc
from . import symplectic as sp
from . import wavefield as wf

__all__ = ["CheckResult", "CHECKS", "run_checks"]

SEED = 20240601


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _rng():
    return np.random.default_rng(SEED)


def check_metric() -> tuple[bool, str]:
    worst = 0.0
    for n in (1, 2, 3, 4):
        b = sp.metric(n)
        worst = max(
            worst,
            np.abs(b + b.T).max(),
            np.abs(b @ b + np.eye(2 * n)).max(),
            abs(np.linalg.det(b) - 1.0),
        )
    # the closed-form A-K propagator does not use the metric, so it is an
    # independent probe of it
    S = ak.ak_propagator(ak.AKParams(K1=0.7, K2=-1.3, t=0.9))
    res = sp.symplectic_residual(S)
    ok = worst < 1e-15 and res < 1e-13
    return ok, f"axiom error {worst:.1e}, A-K residual {res:.1e}"


def check_ak_propagator() -> tuple[bool, str]:
    rng = _rng()
    worst = 0.0
    for _ in range(100):
        K1, K2 = rng.uniform(-2, 2, 2)
        t = rng.uniform(0, 2)
        p = ak.AKParams(K1=K1, K2=K2, t=t)
        J = ak.ak_generator(K1, K2)
        if np.any(J @ J @ J != 0):
            return False, "J^3 != 0"
        S = ak.ak_propagator(p)
        worst = max(worst, np.abs(S - sla.expm(-t * J)).max())
    return worst < 1e-13, f"max |closed form - expm| = {worst:.1e}"


def check_group() -> tuple[bool, str]:
    rng = _rng()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 4))
        A = sp.random_symplectic(n, rng)
        B = sp.random_symplectic(n, rng)
        AB = A @ B
        tol = sp.default_tolerance(AB)
        worst = max(worst, sp.symplectic_residual(AB) / tol)
        worst = max(worst, np.abs(sp.symplectic_inverse(A) @ A - np.eye(2 * n)).max() / tol)
    return worst <= 1.0, f"worst residual / tolerance {worst:.2e}"


def _random_physical(n, rng, hbar=1.0):
    kap = hbar / 2 + rng.exponential(1.0, n)
    S = sp.random_symplectic(n, rng)
    return S.T @ np.diag(np.repeat(kap, 2)) @ S, np.sort(kap)[::-1]


def check_congruence() -> tuple[bool, str]:
    rng = _rng()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        V, kap = _random_physical(n, rng)
        S = sp.random_symplectic(n, rng)
        k2 = spc.symplectic_eigenvalues(S.T @ V @ S)
        worst = max(worst, np.abs(k2 - kap).max() / kap.max())
    return worst < 1e-9, f"max relative kappa drift {worst:.1e}"


def check_williamson() -> tuple[bool, str]:
    rng = _rng()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 4))
        V, kap = _random_physical(n, rng)
        W = spc.williamson_decompose(V)
        worst = max(worst, np.abs(W.reconstruct() - V).max() / np.abs(V).max())
        worst = max(worst, np.abs(W.kappas - kap).max())
    return worst < 1e-9, f"worst round-trip error {worst:.1e}"


def check_physicality_routes() -> tuple[bool, str]:
    rng = _rng()
    disagree = 0
    for _ in range(200):
        n = int(rng.integers(1, 4))
        kap = 0.5 + rng.exponential(0.5, n)
        kap[rng.integers(n)] = 0.5 + rng.choice([-1, 1]) * rng.uniform(1e-4, 1e-2)
        S = sp.random_symplectic(n, rng, spread=0.3)
        rep = spc.is_physical(S.T @ np.diag(np.repeat(kap, 2)) @ S)
        disagree += (not rep.consistent) or (rep.physical != bool(kap.min() >= 0.5))
    return disagree == 0, f"{disagree} disagreements in 200"


def check_pointer_spreads() -> tuple[bool, str]:
    rng = _rng()
    worst = 0.0
    for _ in range(200):
        p = ak.AKParams(K1=rng.uniform(-2, 2), K2=rng.uniform(-2, 2), t=rng.uniform(0, 2))
        V, _ = _random_physical(3, rng)
        S = ak.ak_propagator(p)
        Vt = S.T @ V @ S
        v1, v2 = ak.pointer_spreads(V, p)
        scale = max(1.0, np.abs(Vt).max())
        worst = max(worst, abs(v1 - Vt[2, 2]) / scale, abs(v2 - Vt[4, 4]) / scale)
    return worst < 1e-12, f"max relative difference {worst:.1e}"


def check_bound() -> tuple[bool, str]:
    rng = _rng()
    slack = np.inf
    for _ in range(200):
        p = ak.AKParams(
            K1=rng.uniform(-2, 2), K2=rng.uniform(-2, 2), t=rng.uniform(0, 2),
            b1=rng.uniform(0.2, 3), b2=rng.uniform(0.2, 3),
        )
        vq = rng.uniform(0.1, 3)
        m = ak.SystemMoments(var_q=vq, var_p=(0.25 + rng.exponential(0.3)) / vq)
        v1, v2 = ak.pointer_spreads(ak.product_variance(m, p), p)
        slack = min(slack, np.sqrt(v1 * v2) - ak.uncertainty_bound(p))
    return slack >= -1e-12, f"min product - bound = {slack:.2e}"


def check_formula_chain() -> tuple[bool, str]:
    """Grid, closed double integral and the special case on a small Gaussian."""
    p = ak.AKParams()
    m = ak.SystemMoments(q0=0.3, p0=-0.2, var_q=0.5, var_p=0.5)
    snaps = [(ak.initial_means(m), ak.product_variance(m, p))]
    S = ak.ak_propagator(p)
    snaps.append((sp.evolve_mean(S, snaps[0][0]), sp.evolve_variance(S, snaps[0][1])))
    axes = wf.plan_axes(snaps, p.hbar)
    psi = wf.SystemWavefunction.gaussian(axes[0], m.q0, m.p0, m.var_q)
    P_grid = wf.joint_distribution(wf.propagate(wf.product_initial(psi, p, axes), p))
    P_int = wf.distribution_product_form(psi, p, P_grid.axes)
    P_sc = wf.distribution_special_case(psi, 1.0, P_grid.axes)
    d1 = wf.relative_linf(P_int, P_grid)
    d2 = wf.relative_linf(P_sc, P_int)
    norms = [abs(P.total() - 1) for P in (P_grid, P_int, P_sc)]
    ok = max(d1, d2) < 1e-3 and max(norms) < 1e-5
    return ok, f"L-inf {d1:.1e} / {d2:.1e}, norm error {max(norms):.1e}"


def check_grid_moments() -> tuple[bool, str]:
    p = ak.AKParams(K1=0.8, K2=1.1, t=1.0, b1=0.7, b2=1.4)
    m = ak.SystemMoments(q0=0.5, p0=0.4, var_q=0.4, var_p=0.625)
    V0 = ak.product_variance(m, p)
    xi0 = ak.initial_means(m)
    S = ak.ak_propagator(p)
    snaps = [(xi0, V0), (sp.evolve_mean(S, xi0), sp.evolve_variance(S, V0))]
    axes = wf.plan_axes(snaps, p.hbar)
    psi = wf.SystemWavefunction.gaussian(axes[0], m.q0, m.p0, m.var_q)
    G = wf.propagate(wf.product_initial(psi, p, axes), p)
    mean, V = G.moments()
    err = max(np.abs(mean - snaps[1][0]).max(), np.abs(V - snaps[1][1]).max())
    return err < 1e-8, f"max moment error {err:.1e}"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "metric axioms": check_metric,
    "A-K closed form": check_ak_propagator,
    "group closure and inverse": check_group,
    "congruence invariance": check_congruence,
    "Williamson round trip": check_williamson,
    "physicality routes agree": check_physicality_routes,
    "pointer spread closed forms": check_pointer_spreads,
    "uncertainty bound": check_bound,
    "distribution formula chain": check_formula_chain,
    "grid moments vs congruence": check_grid_moments,
}


def run_checks(names=None) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS.items():
        if names is not None and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash counts as a failure, not an abort
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return results
