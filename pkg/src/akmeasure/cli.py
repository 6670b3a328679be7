"""Command-line front end.

``akmeasure {evolve,williamson,pdist,sample,check} [--config PATH] [--out DIR]
[--seed N] [--set KEY=VALUE ...] [--tol X]``

Exit codes: 0 ok, 2 configuration error, 3 numeric failure.  Errors print a
single JSON object on stderr.  Machine outputs (CSV/JSON) are deterministic;
the wall-clock timestamp lives only in ``meta.json``.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import ak_model as ak
from . import checks
from . import estimation as est
from . import plotting
from . import spectral as spc
from . import symplectic as sp
from . import wavefield as wf
from .config import ConfigError, RunConfig, load_config
from .formats import human_table, matrix_from_json, matrix_to_json, write_csv, write_json

__all__ = ["main", "build_parser", "cmd_evolve", "cmd_williamson", "cmd_pdist", "cmd_sample", "cmd_check"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

NUMERIC_ERRORS = (
    sp.SymplecticError,
    spc.SpectralError,
    wf.GridError,
    wf.QuadratureError,
    ak.UnphysicalStateError,
    ak.EstimationError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class NumericFailure(RuntimeError):
    def __init__(self, message: str, **fields):
        super().__init__(message)
        self.fields = fields


# preparation ---------------------------------------------------------------


def _gaussian_moments(q0, p0, var_q, cov_qp, hbar) -> ak.SystemMoments:
    return ak.SystemMoments(q0, p0, var_q, (hbar**2 / 4 + cov_qp**2) / var_q, cov_qp)


def _superposition_moments(components, hbar) -> ak.SystemMoments:
    lo = min(c["q0"] - 12 * math.sqrt(c["var_q"]) for c in components)
    hi = max(c["q0"] + 12 * math.sqrt(c["var_q"]) for c in components)
    pmax = max(
        abs(c["p0"]) + 12 * math.sqrt(_gaussian_moments(0, 0, c["var_q"], c["cov_qp"], hbar).var_p)
        for c in components
    )
    n = max(256, 1 << int(math.ceil(math.log2((hi - lo) * pmax / (math.pi * hbar)))))
    axis = wf.Axis(lo, hi, min(n, 1 << 16))
    return wf.SystemWavefunction.superposition(axis, components, hbar).moments(hbar)


def preparation(cfg: RunConfig, need_psi: bool):
    """``(psi_factory or None, SystemMoments)`` for the configured state."""
    hbar = cfg.params.hbar
    if cfg.moments is not None:
        m = cfg.moments.build()
        if not m.is_physical(hbar):
            raise ConfigError(
                f"moments violate var_q var_p - cov_qp^2 >= hbar^2/4 (determinant {m.determinant():.6g})"
            )
        if not need_psi:
            return None, m
        if abs(m.determinant() - hbar**2 / 4) > 1e-9 * max(m.determinant(), hbar**2 / 4):
            raise ConfigError(
                "moments describe a mixed state; wavefunction commands need a 'psi' spec "
                "or pure-state moments (var_q var_p - cov_qp^2 = hbar^2 / 4)"
            )
        spec = {"q0": m.q0, "p0": m.p0, "var_q": m.var_q, "cov_qp": m.cov_qp}
        return (lambda axis: wf.SystemWavefunction.gaussian(axis, hbar=hbar, **spec)), m
    psi = cfg.psi
    if psi is None or psi.kind == "gaussian":
        spec = {"q0": 0.0, "p0": 0.0, "var_q": hbar / 2, "cov_qp": 0.0}
        if psi is not None:
            spec = psi.model_dump(exclude={"kind"})
        m = _gaussian_moments(spec["q0"], spec["p0"], spec["var_q"], spec["cov_qp"], hbar)
        return (lambda axis: wf.SystemWavefunction.gaussian(axis, hbar=hbar, **spec)), m
    if psi.kind == "superposition":
        comps = [c.model_dump() for c in psi.components]
        m = _superposition_moments(comps, hbar)
        return (lambda axis: wf.SystemWavefunction.superposition(axis, comps, hbar)), m
    try:
        loaded = wf.SystemWavefunction.from_dict(json.loads(Path(psi.path).read_text()))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read wavefunction file {psi.path}: {exc}") from exc
    loaded = loaded.normalized()
    return (lambda axis: loaded), loaded.moments(hbar)


def plan_grid(cfg: RunConfig, moments: ak.SystemMoments, stage_params) -> tuple:
    spec = cfg.grid_spec
    if spec.q is not None:
        try:
            return tuple(wf.Axis(a.min, a.max, a.count) for a in (spec.q, spec.Q1, spec.Q2))
        except wf.GridError as exc:
            raise ConfigError(str(exc)) from exc
    params = cfg.params.build()
    snaps = est.forward_snapshots(moments, params, [ak.ak_propagator(p) for p in stage_params])
    return wf.plan_axes(snaps, params.hbar, count=spec.count, sigmas=spec.sigmas)


# output helpers --------------------------------------------------------------


def _embedded_config(cfg: RunConfig) -> dict:
    d = cfg.resolved()
    d["output"] = None  # keeps outputs identical across output directories
    return d


def _out_dir(cfg: RunConfig, command: str) -> Path:
    out = Path(cfg.output) if cfg.output else Path("akmeasure_out") / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(out: Path, command: str, cfg: RunConfig | None, files: list, argv) -> None:
    if cfg is not None:
        write_json(out / "config.json", _embedded_config(cfg))
        files = ["config.json"] + files
    meta = {
        "command": command,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "argv": list(argv or []),
        "files": files,
    }
    write_json(out / "meta.json", meta)


def _channel_predictions(S, xi0, V0) -> dict:
    xi = sp.evolve_mean(S, xi0)
    Vt = sp.evolve_variance(S, V0)
    return {"meanQ1": xi[2], "meanQ2": xi[4], "varQ1": Vt[2, 2], "varQ2": Vt[4, 4], "covQ1Q2": Vt[2, 4]}


# commands ------------------------------------------------------------------


def cmd_evolve(cfg: RunConfig, argv=None) -> int:
    p = cfg.params.build()
    _, m = preparation(cfg, need_psi=False)
    V0 = ak.product_variance(m, p)
    xi0 = ak.initial_means(m)
    S = ak.ak_propagator(p)
    sp.check_symplectic(S, sp.default_tolerance(S, cfg.tolerances.symplectic))
    xit = sp.evolve_mean(S, xi0)
    Vt = sp.evolve_variance(S, V0)
    v1, v2 = ak.pointer_spreads(V0, p)
    bound = ak.uncertainty_bound(p)
    phys0 = spc.is_physical(V0, p.hbar, cfg.tolerances.physical)
    phys_t = spc.is_physical(Vt, p.hbar, cfg.tolerances.physical)
    if not phys_t.physical:
        raise NumericFailure("evolved variance matrix failed the physicality check",
                             min_eigenvalue=phys_t.min_eigenvalue)

    ts = np.linspace(0.0, p.t, cfg.curve_points)
    curve = []
    for tk in ts:
        pk = p.replace(t=float(tk))
        a, b = ak.pointer_spreads(V0, pk)
        curve.append((float(tk), a, b, math.sqrt(a * b), ak.uncertainty_bound(pk)))

    out = _out_dir(cfg, "evolve")
    report = {
        "config": _embedded_config(cfg),
        "S": matrix_to_json(S),
        "xi0": xi0,
        "xi_t": xit,
        "V0": matrix_to_json(V0),
        "V_t": matrix_to_json(Vt),
        "pointer": {
            "meanQ1": xit[2],
            "meanQ2": xit[4],
            "varQ1": v1,
            "varQ2": v2,
            "varQ1_congruence": Vt[2, 2],
            "varQ2_congruence": Vt[4, 4],
            "dQ1": math.sqrt(v1),
            "dQ2": math.sqrt(v2),
            "product": math.sqrt(v1 * v2),
            "bound": bound,
        },
        "physicality": {
            "V0": {
                "physical": phys0.physical,
                "min_eigenvalue": phys0.min_eigenvalue,
                "min_kappa": phys0.min_kappa,
            },
            "V_t": {
                "physical": phys_t.physical,
                "min_eigenvalue": phys_t.min_eigenvalue,
                "min_kappa": phys_t.min_kappa,
            },
            "kappas_t": spc.symplectic_eigenvalues(Vt),
        },
    }
    write_json(out / "evolve.json", report)
    write_csv(out / "evolve_curve.csv", ("t", "varQ1", "varQ2", "dQ1dQ2", "bound"), curve)
    c = np.array(curve)
    plotting.plot_evolution(c[:, 0], c[:, 1], c[:, 2], c[:, 4], out / "evolve.png")
    _finish(out, "evolve", cfg, ["evolve.json", "evolve_curve.csv", "evolve.png"], argv)

    print(human_table(
        ("quantity", "value"),
        [("<Q1>(t)", xit[2]), ("<Q2>(t)", xit[4]), ("dQ1^2", v1), ("dQ2^2", v2),
         ("dQ1 dQ2", math.sqrt(v1 * v2)), ("bound", bound),
         ("physical V(t)", str(phys_t.physical))],
    ))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_williamson(cfg: RunConfig, matrix_path, argv=None) -> int:
    try:
        V = matrix_from_json(json.loads(Path(matrix_path).read_text()))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix {matrix_path}: {exc}") from exc
    hbar = cfg.params.hbar
    form = spc.williamson_decompose(V)
    phys = spc.is_physical(V, hbar, cfg.tolerances.physical)
    out = _out_dir(cfg, "williamson")
    report = {
        "config": _embedded_config(cfg),
        "input": matrix_to_json(V),
        "kappas": form.kappas,
        "S0": matrix_to_json(form.S0),
        "residual": form.residual,
        "hbar": hbar,
        "physical": phys.physical,
        "min_eigenvalue": phys.min_eigenvalue,
        "min_kappa": phys.min_kappa,
        "boundary": bool(abs(phys.min_kappa - hbar / 2) <= cfg.tolerances.physical * max(1.0, np.abs(V).max())),
    }
    write_json(out / "williamson.json", report)
    _finish(out, "williamson", cfg, ["williamson.json"], argv)
    print(human_table(("j", "kappa_j"), [(j + 1, k) for j, k in enumerate(form.kappas)]))
    print(f"residual {form.residual:.3e}; physical: {phys.physical}")
    print(f"wrote {out}")
    return EXIT_OK


def _special_convention(p: ak.AKParams) -> bool:
    return (
        p.hbar == 1.0 and p.K1 == p.K2 and p.K1 * p.t == 1.0
        and math.isclose(p.b1 * p.b2, 1.0, rel_tol=1e-12)
    )


def cmd_pdist(cfg: RunConfig, argv=None, save_psi: bool = False) -> int:
    p = cfg.params.build()
    factory, m = preparation(cfg, need_psi=True)
    axes = plan_grid(cfg, m, [p])
    psi = factory(axes[0])
    G = wf.propagate(wf.product_initial(psi, p, axes), p)
    routes = {"grid": wf.joint_distribution(G)}
    out_axes = routes["grid"].axes
    rtol = cfg.tolerances.quadrature
    # the Q2 phase in the closed forms needs a finer q' grid than propagation
    q_fine = wf.Axis(axes[0].min, axes[0].max, 2 * axes[0].count)
    psi_fine = factory(q_fine).resample(q_fine)
    if p.K2 * p.t != 0:
        routes["product_form"] = wf.distribution_product_form(psi_fine, p, out_axes, q_axis=axes[0], rtol=rtol)
    if _special_convention(p):
        routes["special_case"] = wf.distribution_special_case(psi_fine, p.b1, out_axes, rtol=rtol)

    S = ak.ak_propagator(p)
    predicted = _channel_predictions(S, ak.initial_means(m), ak.product_variance(m, p, strict=False))
    summaries = {k: P.summary() for k, P in routes.items()}
    names = list(routes)
    comparison = []
    for q in ("meanQ1", "meanQ2", "varQ1", "varQ2", "covQ1Q2"):
        row = {"quantity": q, "closed_form": predicted[q]}
        row.update({k: summaries[k][q] for k in names})
        comparison.append(row)
    linf = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            linf[f"{a}|{b}"] = wf.relative_linf(routes[a], routes[b])

    out = _out_dir(cfg, "pdist")
    routes["grid"].write_csv(out / "pdist.csv")
    header = ["quantity", "closed_form"] + names
    write_csv(out / "pdist_comparison.csv", header, [[r[h] for h in header] for r in comparison])
    write_json(out / "pdist_moments.json", {
        "config": _embedded_config(cfg),
        "axes": [a.to_dict() for a in axes],
        "closed_form": predicted,
        "routes": summaries,
        "relative_linf": linf,
        "comparison": comparison,
    })
    P = routes["grid"]
    plotting.plot_distribution(P.axes[0].points, P.axes[1].points, P.values, out / "pdist.png")
    files = ["pdist.csv", "pdist_comparison.csv", "pdist_moments.json", "pdist.png"]
    if save_psi:
        files += [f.name for f in wf.save_wavefunction(G, out / "psi_t.akwf")]
    _finish(out, "pdist", cfg, files, argv)

    print(human_table(header, [[r[h] for h in header] for r in comparison]))
    for k, v in linf.items():
        print(f"relative L-inf {k}: {v:.3e}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_sample(cfg: RunConfig, argv=None) -> int:
    p = cfg.params.build()
    factory, m = preparation(cfg, need_psi=True)
    refine = cfg.grid_spec.refine
    if cfg.regime == "sequential":
        s1, s2 = cfg.sequential.stage1, cfg.sequential.stage2
        stages = [p.replace(K1=s1.K1, K2=0.0, t=s1.t), p.replace(K1=0.0, K2=s2.K2, t=s2.t)]
        axes = plan_grid(cfg, m, stages)
        report, batch = est.run_sequential(
            factory, m, p, (s1.K1, s1.t), (s2.K2, s2.t), cfg.samples, cfg.seed, axes=axes, refine=refine
        )
    else:
        axes = plan_grid(cfg, m, [p])
        report, batch = est.run_regime(
            factory, m, p, cfg.regime, cfg.samples, cfg.seed, axes=axes, refine=refine
        )
    out = _out_dir(cfg, "sample")
    write_json(out / "estimate.json", {
        "config": _embedded_config(cfg),
        "axes": [a.to_dict() for a in axes],
        "truth": m.to_dict(),
        "report": report.to_dict(),
    })
    batch.to_csv(out / "samples.csv")
    plotting.plot_samples(batch.pairs, out / "samples.png")
    _finish(out, "sample", cfg, ["estimate.json", "samples.csv", "samples.png"], argv)

    rows = []
    truth = m.to_dict()
    for name, ch in (("q", report.q), ("p", report.p)):
        if ch is None:
            continue
        rows.append((f"{name}0", truth[f"{name}0"], ch.mean, ch.mean_se, ""))
        rows.append((f"var_{name}", truth[f"var_{name}"], ch.var, ch.var_se, ch.status))
    print(human_table(("quantity", "truth", "estimate", "SE", "status"), rows))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_check(argv=None) -> int:
    t0 = time.perf_counter()
    results = checks.run_checks()
    for r in results:
        tag = "PASS" if r.passed else "FAIL"
        print(f"{tag}  {r.seconds:7.3f} s  {r.name}: {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} passed in {time.perf_counter() - t0:.2f} s")
    return EXIT_OK if failed == 0 else EXIT_NUMERIC


# entry point -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.exit(_error("UsageError", message, EXIT_CONFIG))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="N", help="RNG seed")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. params.t=2 (repeatable)")
    common.add_argument("--tol", type=float, metavar="X",
                        help="base tolerance for the symplectic and physicality checks")

    parser = _Parser(prog="akmeasure", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("evolve", parents=[common], help="Heisenberg-picture moment evolution")
    w = sub.add_parser("williamson", parents=[common], help="Williamson normal form of a matrix")
    w.add_argument("matrix", help="matrix JSON {n, rows}")
    pd = sub.add_parser("pdist", parents=[common], help="joint pointer distribution")
    pd.add_argument("--save-psi", action="store_true", help="also write the final wavefunction")
    sub.add_parser("sample", parents=[common], help="sample pointer readings and estimate")
    sub.add_parser("check", help="run the built-in invariant suite")
    return parser


def _error(kind: str, message: str, code: int, **fields) -> int:
    payload = {"error": kind, "message": message, "exit_code": code}
    payload.update({k: v for k, v in fields.items() if v is not None})
    print(json.dumps(payload, default=float), file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    if args.command == "check":
        return cmd_check(argv)
    try:
        overrides = list(args.set)
        if args.tol is not None:
            overrides += [f"tolerances.symplectic={args.tol!r}", f"tolerances.physical={args.tol!r}"]
        cfg = load_config(args.config, overrides, seed=args.seed, output=args.out)
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            if args.command == "evolve":
                return cmd_evolve(cfg, argv)
            if args.command == "williamson":
                return cmd_williamson(cfg, args.matrix, argv)
            if args.command == "pdist":
                return cmd_pdist(cfg, argv, save_psi=args.save_psi)
            return cmd_sample(cfg, argv)
    except ConfigError as exc:
        return _error("ConfigError", str(exc), EXIT_CONFIG)
    except NumericFailure as exc:
        return _error("NumericFailure", str(exc), EXIT_NUMERIC, **exc.fields)
    except NUMERIC_ERRORS as exc:
        return _error(type(exc).__name__, str(exc), EXIT_NUMERIC, residual=getattr(exc, "residual", None))


if __name__ == "__main__":
    sys.exit(main())
