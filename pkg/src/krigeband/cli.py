"""Command-line experiment driver.

Every command resolves its settings to a plain parameter dict, executes
through a single dispatch function, and records a manifest of input/output
digests so ``rerun`` can verify bit-identical reproduction (timing fields
excluded). Data comes either from a long-format CSV (``--data``) or from the
built-in scenario generator (``--scenario`` plus ``--eta/--c/--n-sites``).
"""

import csv
import json
import sys
import tempfile
from pathlib import Path

import click

from .bootstrap import BootstrapConfig, bootstrap_band
from .conformal import CaseConfig, conformal_predict_detailed, default_model_fitter, write_band_csv
from .errors import KrigebandError
from .fdata import BasisSystem, Site, envelope_contains, read_long_csv, smooth_dataset, write_long_csv
from .kriging import assemble_system, solve_weights, system_debug_dict
from .manifest import compare_outputs, load_manifest, write_manifest
from .metrics import band_score, band_width, write_metrics_csv
from .runner import run_bootstrap_loocv, run_case_loocv, run_sweep
from .simulate import ScenarioConfig, sample_dataset, write_scenario_sidecar
from .variogram import model_to_json

DEFAULT_BASIS_INGESTED = "fourier:65"
DEFAULT_BASIS_SIMULATED = "bspline:30"


def _parse_basis(spec, grid):
    if spec == "none":
        return None
    try:
        family, k = spec.split(":")
        k = int(k)
    except ValueError:
        raise click.BadParameter(
            f"basis must look like 'bspline:30', 'fourier:65' or 'none', got {spec!r}"
        ) from None
    try:
        return BasisSystem(family, k, (grid.a, grid.b))
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None


def _parse_case(label, alpha):
    try:
        return CaseConfig.from_label(label, alpha=alpha)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None


def _parse_target(text):
    try:
        u, v = (float(x) for x in text.split(","))
    except ValueError:
        raise click.BadParameter(
            f"target must be 'u,v' coordinates, got {text!r}"
        ) from None
    return [u, v]


def _scenario_params(scenario, eta, c, n_sites, seed):
    return {"scenario": scenario, "eta": eta, "c": c, "n_sites": n_sites, "seed": seed}


def _load_dataset(params):
    """Dataset per the params: ingested CSV or generated scenario, then smoothing."""
    if params.get("data"):
        data = read_long_csv(params["data"])
        eta = c = None
        inputs = [params["data"]]
        default_basis = DEFAULT_BASIS_INGESTED
    else:
        sc = params["scenario"]
        cfg = ScenarioConfig(
            scenario=sc["scenario"], eta=sc["eta"], c=sc["c"],
            n_sites=sc["n_sites"], seed=sc["seed"],
        )
        data = sample_dataset(cfg)
        eta, c = cfg.eta, cfg.c
        inputs = []
        default_basis = DEFAULT_BASIS_SIMULATED
    spec = params.get("basis") or default_basis
    basis = _parse_basis(spec, data.grid)
    if basis is not None:
        data = smooth_dataset(data, basis)
    return data, eta, c, inputs


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _exec_simulate(params, outdir):
    cfg = ScenarioConfig(**params["scenario"])
    data = sample_dataset(cfg)
    dataset = outdir / "dataset.csv"
    sidecar = outdir / "scenario.json"
    write_long_csv(data, dataset)
    write_scenario_sidecar(sidecar, cfg)
    return {"dataset.csv": dataset, "scenario.json": sidecar}, []


def _exec_predict(params, outdir):
    data, _, _, inputs = _load_dataset(params)
    config = CaseConfig.from_label(params["case"], alpha=params["alpha"])
    u, v = params["target"]
    target = Site(u, v, "target")
    result = conformal_predict_detailed(data, target, config)

    band = result.band
    band_path = outdir / "band.csv"
    write_band_csv(band_path, band.grid, band.center, band.lower, band.upper, band.modulation)
    meta = dict(result.metadata())
    meta["method"] = "conformal"
    meta_path = outdir / "metadata.json"
    _write_json(meta_path, meta)
    model_path = outdir / "variogram.json"
    model_to_json(result.model, model_path)
    outputs = {
        "band.csv": band_path,
        "metadata.json": meta_path,
        "variogram.json": model_path,
    }
    if params.get("verbose"):
        train = data.subset(result.split.train_idx)
        system = assemble_system(train, result.model, target)
        solution = solve_weights(
            system,
            tol=config.solver.tol,
            max_iter=config.solver.max_iter_factor * (system.n + 1),
            jitter_scale=config.solver.jitter_scale,
            jitter_retries=config.solver.jitter_retries,
        )
        debug_path = outdir / "kriging_debug.json"
        _write_json(debug_path, system_debug_dict(system, solution))
        outputs["kriging_debug.json"] = debug_path
    return outputs, inputs


def _exec_sweep(params, outdir):
    data, eta, c, inputs = _load_dataset(params)
    evaluations = run_sweep(
        data, alpha=params["alpha"], eta=eta, c=c, threads=params.get("threads", 1)
    )
    metrics_path = outdir / "metrics.csv"
    write_metrics_csv(metrics_path, [e.metrics for e in evaluations])
    return {"metrics.csv": metrics_path}, inputs


def _write_per_site_csv(path, evaluation, alpha):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site_id", "contained", "cov_l", "width", "s_alpha", "tt"])
        for o in evaluation.outcomes:
            inside = envelope_contains(
                o.band.lower.values, o.band.upper.values, o.truth.values
            )
            writer.writerow(
                [
                    o.site_id,
                    int(o.band.contains(o.truth)),
                    repr(round(100.0 * float(inside.mean()), 2)),
                    repr(band_width(o.band)),
                    repr(band_score(o.band, o.truth, alpha)),
                    repr(float(o.seconds)),
                ]
            )


def _exec_loocv(params, outdir):
    data, eta, c, inputs = _load_dataset(params)
    config = CaseConfig.from_label(params["case"], alpha=params["alpha"])
    evaluation = run_case_loocv(data, config, eta=eta, c=c, threads=params.get("threads", 1))
    per_site = outdir / "per_site.csv"
    summary = outdir / "summary.csv"
    _write_per_site_csv(per_site, evaluation, config.alpha)
    write_metrics_csv(summary, [evaluation.metrics])
    return {"per_site.csv": per_site, "summary.csv": summary}, inputs


def _exec_bootstrap(params, outdir):
    data, eta, c, inputs = _load_dataset(params)
    cfg = BootstrapConfig(
        B=params["bootstrap_B"], alpha=params["alpha"], seed=params["seed"]
    )
    if params.get("target") is not None:
        u, v = params["target"]
        target = Site(u, v, "target")
        fitter = default_model_fitter()
        band = bootstrap_band(data, target, fitter, cfg)
        band_path = outdir / "band.csv"
        write_band_csv(band_path, band.grid, band.center, band.lower, band.upper)
        meta = band.metadata()
        meta.update({"B": cfg.B, "alpha": cfg.alpha, "seed": cfg.seed})
        meta_path = outdir / "metadata.json"
        _write_json(meta_path, meta)
        return {"band.csv": band_path, "metadata.json": meta_path}, inputs
    evaluation = run_bootstrap_loocv(data, cfg, threads=params.get("threads", 1))
    per_site = outdir / "per_site.csv"
    summary = outdir / "summary.csv"
    _write_per_site_csv(per_site, evaluation, cfg.alpha)
    write_metrics_csv(summary, [evaluation.metrics])
    return {"per_site.csv": per_site, "summary.csv": summary}, inputs


_EXECUTORS = {
    "simulate": _exec_simulate,
    "predict": _exec_predict,
    "sweep": _exec_sweep,
    "loocv": _exec_loocv,
    "bootstrap": _exec_bootstrap,
}


def execute(command, params, outdir):
    """Run a command from its parameter dict; returns {output name: path}."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs, inputs = _EXECUTORS[command](params, outdir)
    return outputs, inputs


def _run_and_manifest(command, params, out):
    outdir = Path(out)
    try:
        outputs, inputs = execute(command, params, outdir)
    except KrigebandError as exc:
        raise click.ClickException(str(exc)) from exc
    write_manifest(outdir / "manifest.json", command, params, inputs, outputs)
    for name in sorted(outputs):
        click.echo(f"wrote {outdir / name}")
    click.echo(f"wrote {outdir / 'manifest.json'}")


def _dataset_options(f):
    opts = [
        click.option("--data", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Long-format CSV (site_id,u,v,t,value)."),
        click.option("--scenario", type=click.IntRange(1, 2), default=None,
                     help="Generate data instead: scenario 1 or 2."),
        click.option("--eta", type=float, default=0.1, show_default=True,
                     help="Long-range correlation floor of the generator."),
        click.option("--c", "c_", type=float, default=0.1, show_default=True,
                     help="Correlation decay rate of the generator."),
        click.option("--n-sites", type=int, default=100, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--basis", default=None,
                     help="Smoothing basis 'bspline:K'|'fourier:K'|'none' "
                          "(default: fourier:65 for --data, bspline:30 for --scenario)."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _resolve_source(data, scenario, eta, c_, n_sites, seed, basis):
    if (data is None) == (scenario is None):
        raise click.UsageError("provide exactly one of --data or --scenario")
    params = {"data": data, "basis": basis}
    if scenario is not None:
        params["scenario"] = _scenario_params(scenario, eta, c_, n_sites, seed)
    return params


@click.group()
def main():
    """Functional kriging with conformal prediction bands."""


@main.command()
@click.option("--scenario", type=click.IntRange(1, 2), default=1, show_default=True)
@click.option("--eta", type=float, default=0.1, show_default=True)
@click.option("--c", "c_", type=float, default=0.1, show_default=True)
@click.option("--n-sites", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def simulate(scenario, eta, c_, n_sites, seed, out):
    """Generate a scenario dataset (long CSV plus a settings sidecar)."""
    params = {"scenario": _scenario_params(scenario, eta, c_, n_sites, seed)}
    _run_and_manifest("simulate", params, out)


@main.command()
@_dataset_options
@click.option("--target", required=True, help="Unobserved location as 'u,v'.")
@click.option("--case", default="d50,Ssup,Dsup", show_default=True,
              help="Case label: (d|Δ){25|50|75},S{sup|sqrt},D{sup|sqrt}.")
@click.option("--alpha", type=float, default=0.25, show_default=True)
@click.option("--verbose", is_flag=True, help="Also dump the kriging system as JSON.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def predict(data, scenario, eta, c_, n_sites, seed, basis, target, case, alpha, verbose, out):
    """Band at one target site: band CSV, run metadata, fitted variogram."""
    params = _resolve_source(data, scenario, eta, c_, n_sites, seed, basis)
    _parse_case(case, alpha)
    params.update(
        {"target": _parse_target(target), "case": case, "alpha": alpha, "verbose": verbose}
    )
    _run_and_manifest("predict", params, out)


@main.command()
@_dataset_options
@click.option("--alpha", type=float, default=0.25, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def sweep(data, scenario, eta, c_, n_sites, seed, basis, alpha, threads, out):
    """All 12 cases, leave-one-out over every site, one metrics row per case."""
    params = _resolve_source(data, scenario, eta, c_, n_sites, seed, basis)
    params.update({"alpha": alpha, "threads": threads})
    _run_and_manifest("sweep", params, out)


@main.command()
@_dataset_options
@click.option("--case", default="d50,Ssup,Dsup", show_default=True)
@click.option("--alpha", type=float, default=0.25, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def loocv(data, scenario, eta, c_, n_sites, seed, basis, case, alpha, threads, out):
    """Leave-one-site-out evaluation of one case: per-site rows plus a summary."""
    params = _resolve_source(data, scenario, eta, c_, n_sites, seed, basis)
    _parse_case(case, alpha)
    params.update({"case": case, "alpha": alpha, "threads": threads})
    _run_and_manifest("loocv", params, out)


@main.command()
@_dataset_options
@click.option("--target", default=None, help="Single target 'u,v'; omit for LOOCV mode.")
@click.option("--bootstrap-B", "bootstrap_b", type=int, default=1000, show_default=True)
@click.option("--alpha", type=float, default=0.25, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def bootstrap(data, scenario, eta, c_, n_sites, seed, basis, target, bootstrap_b, alpha, threads, out):
    """Bootstrap comparator band(s); same output schemas as the conformal path."""
    params = _resolve_source(data, scenario, eta, c_, n_sites, seed, basis)
    params.update(
        {
            "target": _parse_target(target) if target is not None else None,
            "bootstrap_B": bootstrap_b,
            "alpha": alpha,
            "seed": seed,
            "threads": threads,
        }
    )
    _run_and_manifest("bootstrap", params, out)


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(file_okay=False),
              help="Where to write the rerun outputs (default: temp directory).")
def rerun(manifest_path, out):
    """Re-execute a recorded run and verify outputs are bit-identical."""
    manifest = load_manifest(manifest_path)
    outdir = Path(out) if out else Path(tempfile.mkdtemp(prefix="krigeband-rerun-"))
    try:
        outputs, _ = execute(manifest.command, manifest.params, outdir)
    except KrigebandError as exc:
        raise click.ClickException(str(exc)) from exc
    problems = compare_outputs(manifest, outputs)
    if problems:
        for line in problems:
            click.echo(f"MISMATCH {line}", err=True)
        sys.exit(1)
    click.echo(
        f"rerun verified: {len(outputs)} outputs bit-identical "
        f"(timing fields excluded) in {outdir}"
    )


if __name__ == "__main__":
    main()
