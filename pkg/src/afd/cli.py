"""Command-line front end.

Subcommands: eigen, pseudotrue, estimate, simulate, effects, rates,
selfcheck.  Each (except selfcheck) reads a JSON config, writes one CSV and
a JSON sidecar holding the resolved config, library versions, and wall
time.  Exit codes: 0 success, 2 config error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__, config as cfg, kernels
from .effects import (average_partial_effect, baseline_effect_kernel,
                      effect_kernel_inf, effect_kernel_q,
                      population_effect, population_kernel_mean)
from .estimation import (PanelData, confidence_interval, mm_estimate,
                         pseudo_true_table, sandwich_variance)
from .exceptions import ConfigError, NumericalError
from .model import TwoBlockBinomialModel
from .prior import heterogeneity_law
from .scores import KernelBuilder
from .simulation import McConfig, generate_panel, rate_table, run_monte_carlo
from .spectral import build_q, eigen_report


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_table(rows, fieldnames, path, fmt="csv"):
    """Write a report atomically: full table rendered, then renamed in."""
    path = Path(path)
    if fmt == "json":
        text = json.dumps([{k: row.get(k) for k in fieldnames} for row in rows],
                          indent=2) + "\n"
    else:
        import io

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_format_value(row.get(k)) for k in fieldnames])
        text = buf.getvalue()
    _atomic_write(path, text)


def _write_sidecar(path: Path, subcommand, doc, started, n_rows):
    meta = {
        "schema": cfg.RUN_SCHEMA_ID,
        "subcommand": subcommand,
        "config": doc,
        "versions": {
            "afd": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "kernel_backend": kernels.active_backend(),
        },
        "wall_time_s": round(time.perf_counter() - started, 6),
        "rows": n_rows,
    }
    try:
        import scipy

        meta["versions"]["scipy"] = scipy.__version__
    except ImportError:  # pragma: no cover
        pass
    sidecar = path.with_name(path.stem + ".meta.json")
    _atomic_write(sidecar, json.dumps(meta, indent=2) + "\n")


def _emit(doc, subcommand, rows, fieldnames, started):
    out = doc["output"]
    path = Path(out["path"])
    emit_table(rows, fieldnames, path, out.get("format", "csv"))
    _write_sidecar(path, subcommand, doc, started, len(rows))
    print(f"wrote {len(rows)} rows to {path}")


def _q_label(q):
    return "inf" if q == "inf" else int(q)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_eigen(doc, started):
    cfg.require(doc, "model", "prior", "eigen", "output")
    spec = doc["eigen"]
    error = doc["model"]["error"]
    designs = spec.get("designs")
    if designs is None:
        designs = [(t // 2, t - t // 2) for t in spec.get("T_list", [])]
    if not designs:
        raise ConfigError("eigen needs T_list or designs")
    models = [TwoBlockBinomialModel(t0, t1, error=error) for t0, t1 in designs]
    grid = cfg.prior_grid(doc)
    rows = eigen_report(models, spec["theta"], grid,
                        fp_floor=spec.get("fp_floor", 1e-15))
    _emit(doc, "eigen", rows, ["T", "T0", "T1", "theta", "j", "lambda",
                               "below_fp_floor"], started)


def cmd_pseudotrue(doc, started):
    cfg.require(doc, "model", "prior", "truth", "output")
    model = cfg.build_model(doc["model"])
    grid = cfg.prior_grid(doc)
    truth = cfg.build_truth(doc, model)
    kwargs = cfg.builder_kwargs(doc)
    est = doc.get("estimation", {})
    n = est.get("n", 1000)
    bracket = est.get("bracket")
    reports = pseudo_true_table(
        lambda q: KernelBuilder(model, grid, q=q, **kwargs),
        truth, cfg.score_q_list(doc), n, bracket)
    rows = [{"q": _q_label(r.q), "theta_star": r.theta, "bias": r.bias,
             "V_star": r.variance, "rmse": r.rmse, "ci95": r.ci95}
            for r in reports]
    _emit(doc, "pseudotrue", rows,
          ["q", "theta_star", "bias", "V_star", "rmse", "ci95"], started)


def _load_panel(doc, model, truth):
    spec = doc.get("data", {})
    if "file" in spec:
        with np.load(spec["file"]) as bundle:
            outcomes = [tuple(int(v) for v in row) for row in bundle["outcomes"]]
            covariates = list(bundle["covariates"]) if "covariates" in bundle else None
        return PanelData(model=model, outcomes=outcomes, covariates=covariates)
    if "simulate" in spec:
        sim = spec["simulate"]
        rng = np.random.default_rng(sim["seed"])
        return generate_panel(model, truth, sim["n"], rng)
    raise ConfigError("estimate needs a data block with 'file' or 'simulate'")


def cmd_estimate(doc, started):
    cfg.require(doc, "model", "prior", "truth", "data", "output")
    model = cfg.build_model(doc["model"])
    grid = cfg.prior_grid(doc)
    truth = cfg.build_truth(doc, model)
    data = _load_panel(doc, model, truth)
    est = doc.get("estimation", {})
    bracket = est.get("bracket", (truth.theta0 - 2.0, truth.theta0 + 3.0))
    kwargs = cfg.builder_kwargs(doc)
    rows = []
    for q in cfg.score_q_list(doc):
        builder = KernelBuilder(model, grid, q=q, **kwargs)
        theta_hat, _ = mm_estimate(data, builder, bracket)
        v_hat = sandwich_variance(data, builder, theta_hat)
        lo, hi = confidence_interval(theta_hat, v_hat, data.n)
        rows.append({"q": _q_label(q), "theta_hat": theta_hat, "V_hat": v_hat,
                     "se": float(np.sqrt(v_hat / data.n)), "ci_low": lo,
                     "ci_high": hi, "n": data.n})
    _emit(doc, "estimate", rows,
          ["q", "theta_hat", "V_hat", "se", "ci_low", "ci_high", "n"], started)


def cmd_simulate(doc, started, threads=None):
    cfg.require(doc, "model", "prior", "truth", "simulation", "output")
    model = cfg.build_model(doc["model"])
    truth = cfg.build_truth(doc, model)
    sim = doc["simulation"]
    prior_spec = doc["prior"]
    est = doc.get("estimation", {})
    mc = McConfig(model=model, truth=truth,
                  prior=heterogeneity_law(prior_spec),
                  prior_points=prior_spec.get("M", 1000),
                  score=doc.get("score", {}).get("score", "integrated"),
                  q_list=tuple(sim.get("q_list", cfg.score_q_list(doc))),
                  n=sim["n"], reps=sim["reps"], seed=sim["seed"],
                  workers=threads if threads is not None else sim.get("workers", 0),
                  bracket=tuple(est["bracket"]) if "bracket" in est else None)
    summary = run_monte_carlo(mc)
    rows = [{"q": _q_label(c.q), "bias": c.bias, "n_var": c.n_var,
             "rmse": c.rmse, "ci95": c.ci95} for c in summary.cells]
    _emit(doc, "simulate", rows, ["q", "bias", "n_var", "rmse", "ci95"], started)


def cmd_effects(doc, started):
    cfg.require(doc, "model", "prior", "truth", "effects", "output")
    model = cfg.build_model(doc["model"])
    grid = cfg.prior_grid(doc)
    truth = cfg.build_truth(doc, model)
    spec = doc["effects"]
    effect = average_partial_effect()
    threshold = spec.get("threshold", 1e-12)
    mu0 = population_effect(effect, model, truth)
    x = truth.design[0][0]
    qspec = build_q(model, x, truth.theta0, grid, rank_warning=False)
    w0 = baseline_effect_kernel(qspec, effect, model, x, truth.theta0, grid)
    rows = []
    for q in spec["q_list"]:
        if q == "inf":
            w = effect_kernel_inf(w0, qspec, threshold)
        else:
            w = effect_kernel_q(w0, qspec, int(q))
        mean, sd = population_kernel_mean(w, model, x, truth)
        rows.append({"q": _q_label(q), "mu0": mu0,
                     "mu_hat_population_mean": mean,
                     "bias": mean - mu0, "sample_sd": sd})
    _emit(doc, "effects", rows,
          ["q", "mu0", "mu_hat_population_mean", "bias", "sample_sd"], started)


def cmd_rates(doc, started):
    cfg.require(doc, "prior", "rates", "output")
    spec = doc["rates"]
    prior_spec = doc["prior"]
    rows_raw = rate_table(
        spec["T_list"], spec["q_list"],
        [heterogeneity_law(d) for d in spec["pi0_list"]],
        error=spec.get("error", "probit"), theta0=spec.get("theta0", 1.0),
        prior=heterogeneity_law(prior_spec),
        prior_points=spec.get("M", prior_spec.get("M", 1000)))
    rows = [{"pi0": r.pi0, "q": r.q, "T": r.T, "b_T": r.b_T, "ratio": r.ratio,
             "precision_flag": r.below_precision_floor} for r in rows_raw]
    _emit(doc, "rates", rows,
          ["pi0", "q", "T", "b_T", "ratio", "precision_flag"], started)


def cmd_selfcheck(_doc, _started):
    """Quick invariant sweep on a reference configuration; prints PASS/FAIL."""
    from .prior import NormalLaw
    from .scores import (conditional_bias, corrected_score, integrated_score,
                         logit_exact_moment)
    from .effects import average_partial_effect as ape

    failures = 0

    def check(name, ok):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    grid = NormalLaw().quadrature(400)
    model = TwoBlockBinomialModel(2, 2, error="probit")
    spec = build_q(model, None, 1.0, grid, rank_warning=False)
    check("column-stochastic posterior predictive matrix",
          np.allclose(spec.Q.sum(axis=0), 1.0, atol=1e-10))
    check("spectrum within [0, 1]",
          spec.eigenvalues[0] <= 1 + 1e-10 and spec.eigenvalues[-1] >= -1e-10)

    logit_model = TwoBlockBinomialModel(1, 1, error="logit")
    kern = logit_exact_moment(1, 1, (1, 0), (0, 1), 0.7)
    bias = max(abs(float(conditional_bias(kern, logit_model, None, 0.7, a)[0]))
               for a in np.linspace(-3, 3, 13))
    check("exact logit moment is heterogeneity-free", bias < 1e-12)
    lspec = build_q(logit_model, None, 0.7, grid, rank_warning=False)
    fixed = corrected_score(kern, lspec, 3)
    check("exact moment is a fixed point of the correction",
          np.allclose(fixed.values, kern.values, atol=1e-10))

    raw = integrated_score(model, None, 1.0, grid, spec=spec)
    check("integrated score orthogonal to the prior predictive",
          abs(float(raw.values @ spec.p)) < 1e-10)

    w0 = baseline_effect_kernel(spec, ape(), model, None, 1.0, grid)
    w1 = effect_kernel_q(w0, spec, 1)
    jack = 2.0 * w0 - spec.rmatvec(w0)
    check("first-order effect kernel equals the jackknife combination",
          np.allclose(w1, jack, atol=1e-12))

    if failures:
        raise NumericalError(f"selfcheck failed {failures} check(s)")
    print("selfcheck: all invariants hold")


# ---------------------------------------------------------------------------

_COMMANDS = {
    "eigen": cmd_eigen,
    "pseudotrue": cmd_pseudotrue,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "effects": cmd_effects,
    "rates": cmd_rates,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="afd",
        description="Approximate functional differencing toolkit for "
                    "discrete-outcome panel models with fixed effects.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in (*_COMMANDS, "selfcheck"):
        p = sub.add_parser(name)
        if name != "selfcheck":
            p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes for simulation "
                            "(default: AFD_THREADS or all cores)")
    return parser


def _resolve_threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("AFD_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"AFD_THREADS must be an integer, got {env!r}")
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        if args.subcommand == "selfcheck":
            cmd_selfcheck(None, started)
            return 0
        doc = cfg.load_config(args.config)
        if args.subcommand == "simulate":
            cmd_simulate(doc, started, threads=_resolve_threads(args))
        else:
            _COMMANDS[args.subcommand](doc, started)
        return 0
    except ConfigError as err:
        print(f"afd: config-error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"afd: numerical-error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
