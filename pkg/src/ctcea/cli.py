"""Command-line surface: simulate, fit, gcompute, benchmark, report.

Every subcommand reads JSON configs, writes CSV tables plus a generated
README describing the artifacts, and is deterministic given (config,
seed).  Exit codes: 0 success, 2 validation error, 3 numerical failure.
The CTCEA_SEED environment variable overrides any configured seed.
"""

from __future__ import annotations

import functools
import json
import os
import sys

import click
import numpy as np
import pandas as pd

from .benchmark import METHODS, BenchConfig, run_benchmark
from .data import CohortParseError, CohortValidationError, Cohort, CovariateSchema, parse_cohort, write_cohort
from .gcomp import GCompConfig, Regime, always, evaluate_draws, threshold
from .mcmc import SamplerConfig, run_mcmc
from .mle import fit_ml
from .model import DgpConfig
from .params import ModelSpec, ParamLayout, default_grids, misspecified_spec, parametric_spec, piecewise_spec, vector_to_model
from .simgen import simulate_cohort

VALIDATION_ERRORS = (ValueError, KeyError, FileNotFoundError, NotADirectoryError,
                     json.JSONDecodeError, CohortParseError, CohortValidationError)
NUMERICAL_ERRORS = (RuntimeError, FloatingPointError, np.linalg.LinAlgError, ZeroDivisionError)


def _guard(fn):
    """Map exceptions to the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VALIDATION_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except NUMERICAL_ERRORS as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _resolve_seed(seed: int | None, default: int = 0) -> int:
    env = os.environ.get("CTCEA_SEED")
    if env is not None:
        return int(env)
    return default if seed is None else seed


def _outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_readme(outdir: str, title: str, lines: list[str]) -> None:
    with open(os.path.join(outdir, "README.md"), "w") as fh:
        fh.write(f"# {title}\n\n")
        for line in lines:
            fh.write(f"- {line}\n")


def _load_regimes(path: str) -> list[Regime]:
    with open(path) as fh:
        specs = json.load(fh)
    if not isinstance(specs, list) or not specs:
        raise ValueError("regimes file must hold a non-empty JSON list")
    out = []
    for obj in specs:
        kind = obj.get("type")
        if kind == "always":
            out.append(always(int(obj["action"])))
        elif kind == "threshold":
            out.append(threshold(int(obj["action"]), float(obj["months"])))
        else:
            raise ValueError(f"unknown regime type {kind!r}")
    return out


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
@click.option("--threads", type=int, default=None,
              help="Worker threads for numerical backends (default: logical cores).")
def main(verbose: bool, threads: int | None) -> None:
    """Joint gap-time and cost modeling with g-computed cost-effectiveness."""
    import logging

    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if threads is not None:
        os.environ.setdefault("XLA_FLAGS",
                              f"--xla_cpu_multi_thread_eigen={'true' if threads > 1 else 'false'} "
                              f"intra_op_parallelism_threads={threads}")
        os.environ.setdefault("OMP_NUM_THREADS", str(threads))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="DGP parameter JSON; defaults to the shipped benchmark setting.")
@click.option("--n", type=int, default=None, help="Override the cohort size.")
@click.option("--censor-rate", type=float, default=None, help="Override the censoring rate.")
@click.option("--seed", type=int, default=None, help="Override the simulation seed.")
@click.option("--out", "outdir", type=click.Path(), required=True, help="Output directory.")
@_guard
def simulate(config_path: str | None, n: int | None, censor_rate: float | None,
             seed: int | None, outdir: str) -> None:
    """Simulate a cohort; writes cohort.csv, schema.json, dgp.json."""
    if config_path is not None:
        with open(config_path) as fh:
            cfg = DgpConfig.from_json(fh.read())
    else:
        cfg = DgpConfig()
    overrides = {}
    if n is not None:
        overrides["n"] = n
    if censor_rate is not None:
        overrides["censor_rate"] = censor_rate
    overrides["seed"] = _resolve_seed(seed, cfg.seed)
    cfg = DgpConfig.from_json(json.dumps({**json.loads(cfg.to_json()), **overrides}))

    cohort = simulate_cohort(cfg, seed=cfg.seed)
    outdir = _outdir(outdir)
    with open(os.path.join(outdir, "cohort.csv"), "w") as fh:
        write_cohort(cohort, fh)
    with open(os.path.join(outdir, "schema.json"), "w") as fh:
        fh.write(cohort.schema.to_json())
    with open(os.path.join(outdir, "dgp.json"), "w") as fh:
        fh.write(cfg.to_json())
    censored = sum(t.encounters[-1].delta == 0 for t in cohort.trajectories)
    share = censored / len(cohort.trajectories)
    _write_readme(outdir, "Simulated cohort", [
        "cohort.csv: one row per encounter (id, j, W in years, delta 0=censored/1=visit/2=death, Z, A, Y cost, covariates)",
        "schema.json: covariate declarations (name, kind, baseline flag)",
        "dgp.json: the exact generating parameters used, including the seed",
        f"{len(cohort.trajectories)} patients, {cohort.n_encounters} encounters, "
        f"censored-patient share {share:.3f}",
    ])
    click.echo(f"simulated {len(cohort.trajectories)} patients "
               f"({cohort.n_encounters} encounters, censored share {share:.3f}) -> {outdir}")


def _load_cohort(cohort_path: str, schema_path: str) -> Cohort:
    with open(schema_path) as fh:
        schema = CovariateSchema.from_json(fh.read())
    with open(cohort_path) as fh:
        return parse_cohort(fh, schema)


def _spec_for_method(method: str, cohort: Cohort, q: int) -> ModelSpec:
    schema = cohort.schema
    if method == "piecewise-bayes":
        return piecewise_spec(schema, default_grids(cohort, q))
    if method in ("parametric-bayes", "parametric-ml"):
        return parametric_spec(schema)
    if method == "misspecified-bayes":
        return misspecified_spec(schema, upper=cohort.max_gap)
    raise ValueError(f"unknown fit method {method!r}")


@main.command()
@click.option("--cohort", "cohort_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), required=True)
@click.option("--method", type=click.Choice(["piecewise-bayes", "parametric-bayes",
                                             "parametric-ml", "misspecified-bayes"]),
              default="piecewise-bayes", show_default=True)
@click.option("--draws", type=int, default=500, show_default=True, help="Retained posterior draws.")
@click.option("--warmup", type=int, default=500, show_default=True)
@click.option("--chains", type=int, default=1, show_default=True)
@click.option("--q", type=int, default=10, show_default=True, help="Piecewise baseline intervals.")
@click.option("--bootstrap", type=int, default=0, show_default=True,
              help="Bootstrap refits (maximum-likelihood method only).")
@click.option("--seed", type=int, default=None)
@click.option("--out", "outdir", type=click.Path(), required=True)
@_guard
def fit(cohort_path: str, schema_path: str, method: str, draws: int, warmup: int,
        chains: int, q: int, bootstrap: int, seed: int | None, outdir: str) -> None:
    """Fit a joint model; writes a bundle consumed by `gcompute`."""
    seed = _resolve_seed(seed)
    cohort = _load_cohort(cohort_path, schema_path)
    spec = _spec_for_method(method, cohort, q)
    outdir = _outdir(outdir)

    bayes = method.endswith("-bayes")
    names = ParamLayout(spec, with_hyper=bayes).coordinate_names()
    if bayes:
        sampler = SamplerConfig(chains=chains, warmup=warmup, draws=draws, seed=seed)
        post = run_mcmc(cohort, spec, sampler)
        post.to_csv(os.path.join(outdir, "draws.csv"))
        diagnostics = post.diagnostics_json()
        point = post.draws.mean(axis=0)
    else:
        mlfit = fit_ml(cohort, spec, bootstrap=bootstrap, seed=seed)
        rows = mlfit.bootstrap if mlfit.bootstrap is not None else np.empty((0, len(mlfit.x)))
        header = ",".join(["draw"] + names)
        body = np.column_stack([np.arange(len(rows)), rows]) if len(rows) else np.empty((0, len(names) + 1))
        np.savetxt(os.path.join(outdir, "draws.csv"), body, delimiter=",",
                   header=header, comments="", fmt=["%d"] + ["%.17g"] * len(names))
        diagnostics = json.dumps({
            "loglik": mlfit.loglik,
            "converged": mlfit.converged,
            "n_bootstrap": int(len(rows)),
            "se": None if mlfit.se is None else mlfit.se.tolist(),
        }, indent=2)
        point = mlfit.x
    with open(os.path.join(outdir, "diagnostics.json"), "w") as fh:
        fh.write(diagnostics)
    with open(os.path.join(outdir, "estimate.csv"), "w") as fh:
        fh.write(",".join(names) + "\n")
        fh.write(",".join(f"{v:.17g}" for v in point) + "\n")
    with open(os.path.join(outdir, "bundle.json"), "w") as fh:
        json.dump({"method": method, "with_hyper": bayes, "seed": seed,
                   "spec": json.loads(spec.to_json())}, fh, indent=2)
    _write_readme(outdir, f"Model fit ({method})", [
        "bundle.json: model structure and method; pass this directory to `ctcea gcompute`",
        "draws.csv: unconstrained parameter draws (posterior draws or bootstrap refits), one row per draw",
        "estimate.csv: single-row point estimate (posterior mean or maximum-likelihood) on the unconstrained scale",
        "diagnostics.json: sampler acceptance/ESS/R-hat or optimizer log-likelihood/convergence",
    ])
    click.echo(f"fitted {method} ({len(names)} parameters) -> {outdir}")


def _load_bundle(bundle_dir: str):
    with open(os.path.join(bundle_dir, "bundle.json")) as fh:
        meta = json.load(fh)
    spec = ModelSpec.from_json(json.dumps(meta["spec"]))
    layout = ParamLayout(spec, with_hyper=bool(meta["with_hyper"]))
    draws = np.loadtxt(os.path.join(bundle_dir, "draws.csv"), delimiter=",",
                       skiprows=1, ndmin=2)
    draws = draws[:, 1:] if draws.size else np.empty((0, layout.n))
    if len(draws) == 0:
        point = np.loadtxt(os.path.join(bundle_dir, "estimate.csv"), delimiter=",",
                           skiprows=1, ndmin=2)
        draws = point
    return meta, layout, draws


@main.command()
@click.option("--bundle", "bundle_dir", type=click.Path(exists=True), required=True,
              help="Directory written by `ctcea fit`.")
@click.option("--regimes", "regimes_path", type=click.Path(exists=True), required=True,
              help='JSON list of regimes: {"type":"always","action":a} or '
                   '{"type":"threshold","action":a,"months":m}.')
@click.option("--kappas", default="1.0", show_default=True,
              help="Comma-separated willingness-to-pay values.")
@click.option("--tau", type=float, default=3.0, show_default=True, help="Horizon in years.")
@click.option("--b", type=int, default=20000, show_default=True, help="Trajectories per draw.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "outdir", type=click.Path(), required=True)
@_guard
def gcompute(bundle_dir: str, regimes_path: str, kappas: str, tau: float, b: int,
             seed: int | None, outdir: str) -> None:
    """g-compute estimands under regimes; writes per-draw and summary CSVs."""
    seed = _resolve_seed(seed)
    meta, layout, draws = _load_bundle(bundle_dir)
    regimes = _load_regimes(regimes_path)
    kappa_vals = tuple(float(s) for s in kappas.split(",") if s.strip())
    cfg = GCompConfig(b=b, tau=tau, kappas=kappa_vals, seed=seed)

    models = (vector_to_model(layout, draws[i]) for i in range(len(draws)))
    ed = evaluate_draws(models, regimes, cfg)
    outdir = _outdir(outdir)
    ed.to_csv(os.path.join(outdir, "estimands.csv"))

    r1, r0 = regimes[0].name, regimes[1].name if len(regimes) > 1 else regimes[0].name
    with open(os.path.join(outdir, "contrasts.csv"), "w") as fh:
        fh.write("draw,functional,value\n")
        for functional in ed.functionals:
            for m, v in enumerate(ed.contrast(r1, r0, functional)):
                fh.write(f"{m},{functional},{float(v)!r}\n")
    with open(os.path.join(outdir, "nmb_summary.csv"), "w") as fh:
        fh.write("kappa,mean,lo,hi,sd\n")
        for k in kappa_vals:
            s = ed.summary(r1, r0, f"mv@{k:g}")
            fh.write(f"{k!r},{s['mean']!r},{s['lo']!r},{s['hi']!r},{s['sd']!r}\n")
    _write_readme(outdir, "g-computation output", [
        f"regimes: contrast is {r1} minus {r0}",
        "estimands.csv: per-draw functional levels (rmst in years, mc in cost units, mv@k = k*rmst - mc)",
        "contrasts.csv: per-draw regime contrasts, one row per (draw, functional)",
        "nmb_summary.csv: monetary-value contrast per willingness-to-pay kappa "
        "(mean, 2.5%/97.5% quantiles, sd over draws)",
    ])
    click.echo(f"g-computed {ed.m} draws x {len(regimes)} regimes -> {outdir}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Benchmark config JSON (BenchConfig fields; dgp nested).")
@click.option("--replications", type=int, default=None, help="Override replication count.")
@click.option("--methods", default=None,
              help=f"Comma-separated subset of {', '.join(METHODS)}.")
@click.option("--seed", type=int, default=None)
@click.option("--progress", is_flag=True, help="Log per-replication progress.")
@click.option("--out", "outdir", type=click.Path(), required=True)
@_guard
def benchmark(config_path: str | None, replications: int | None, methods: str | None,
              seed: int | None, progress: bool, outdir: str) -> None:
    """Run the simulation benchmark; writes report.{json,csv} and estimates.csv."""
    obj = {}
    if config_path is not None:
        with open(config_path) as fh:
            obj = json.load(fh)
    dgp_obj = obj.pop("dgp", {})
    dgp = DgpConfig.from_json(json.dumps(dgp_obj)) if dgp_obj else DgpConfig()
    if replications is not None:
        obj["replications"] = replications
    if methods is not None:
        obj["methods"] = tuple(m.strip() for m in methods.split(",") if m.strip())
    elif "methods" in obj:
        obj["methods"] = tuple(obj["methods"])
    obj["seed"] = _resolve_seed(seed, obj.get("seed", 0))
    bc = BenchConfig(dgp=dgp, **obj)

    report = run_benchmark(bc, progress=progress)
    outdir = _outdir(outdir)
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        fh.write(report.to_json())
    report.to_csv(os.path.join(outdir, "report.csv"))
    report.estimates_csv(os.path.join(outdir, "estimates.csv"))
    with open(os.path.join(outdir, "config.json"), "w") as fh:
        json.dump({**obj, "dgp": json.loads(dgp.to_json()),
                   "methods": list(bc.methods)}, fh, indent=2)
    _write_readme(outdir, "Benchmark report", [
        f"truth: Monte Carlo benchmark value {report.truth:.4f} (se {report.truth_se:.4f})",
        "report.csv: per-method percent bias, empirical se, rmse, mean CI width, coverage %, completed replications",
        "estimates.csv: per-replication point estimates and interval endpoints",
        "report.json: the same metrics plus failure counts",
        "config.json: the resolved benchmark configuration",
    ])
    click.echo(f"benchmark done ({bc.replications} replications) -> {outdir}")


@main.command()
@click.option("--estimands", "estimands_path", type=click.Path(exists=True), required=True,
              help="Per-draw estimand CSV written by `ctcea gcompute`.")
@click.option("--regime1", default=None, help="Comparator regime name (default: first seen).")
@click.option("--regime0", default=None, help="Reference regime name (default: second seen).")
@click.option("--out", "outdir", type=click.Path(), required=True)
@_guard
def report(estimands_path: str, regime1: str | None, regime0: str | None, outdir: str) -> None:
    """Convert per-draw estimands into plot-ready long-format CSVs."""
    df = pd.read_csv(estimands_path)
    required = {"draw", "regime", "functional", "value"}
    if not required.issubset(df.columns):
        raise ValueError(f"estimand CSV must have columns {sorted(required)}")
    seen = list(dict.fromkeys(df["regime"]))
    r1 = regime1 or seen[0]
    r0 = regime0 or (seen[1] if len(seen) > 1 else seen[0])
    if r1 not in seen or r0 not in seen:
        raise ValueError(f"regimes {r1!r}/{r0!r} not found; file has {seen}")

    wide = df.pivot_table(index=["draw", "functional"], columns="regime", values="value")
    if wide[[r1, r0]].isna().any().any():
        raise ValueError("unbalanced draws between regimes")
    contrast = (wide[r1] - wide[r0]).reset_index().rename(columns={0: "value"})
    contrast.columns = ["draw", "functional", "value"]

    outdir = _outdir(outdir)
    mv = contrast[contrast["functional"].str.startswith("mv@")].copy()
    mv["kappa"] = mv["functional"].str.slice(3).astype(float)
    rows = []
    for kappa, grp in mv.groupby("kappa"):
        v = grp["value"].to_numpy()
        lo, hi = np.quantile(v, [0.025, 0.975])
        rows.append({"kappa": kappa, "mean": v.mean(), "lo": lo, "hi": hi,
                     "sd": v.std(ddof=1) if len(v) > 1 else 0.0})
    pd.DataFrame(rows, columns=["kappa", "mean", "lo", "hi", "sd"]).to_csv(
        os.path.join(outdir, "nmb_curve.csv"), index=False)
    contrast.to_csv(os.path.join(outdir, "density.csv"), index=False)
    _write_readme(outdir, "Plot-ready summaries", [
        f"contrast: {r1} minus {r0}",
        "nmb_curve.csv: monetary-value contrast vs willingness-to-pay kappa (mean, 95% quantile band)",
        "density.csv: per-draw contrast samples per functional, for density plots",
    ])
    click.echo(f"report: {len(rows)} kappa rows, {len(contrast)} contrast samples -> {outdir}")


if __name__ == "__main__":
    main()
