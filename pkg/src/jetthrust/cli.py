"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import csv
import io as _io
import json
import logging
import os
import sys

import click
import numpy as np

from . import io
from .config import ExperimentConfig, load_config
from .ekf import EkfError
from .engines import Engine, load_engine, model_from_file, model_text, thrust_map_from_file
from .observer import ObserverConfig, run_observer
from .pipeline import MetricsReport, identify, speed_metrics, thrust_metrics, validate_model
from .plant import SimulationDiverged, simulate
from .regress import fit_power_law
from .signals import TimeSeries, generate_schedule
from .sindy import StructureError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class NumericalFailure(RuntimeError):
    pass


def _settings(ctx) -> tuple[ExperimentConfig, Engine, str]:
    obj = ctx.obj
    cfg = load_config(obj["config"]) if obj["config"] else ExperimentConfig()
    if obj["seed"] is not None:
        cfg.seed = obj["seed"]
    if obj["engine"] is not None:
        cfg.engine = obj["engine"]
    if obj["out"] is not None:
        cfg.output_dir = obj["out"]
    engine = load_engine(cfg.engine)
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg, engine, cfg.output_dir


def _observer_config(cfg: ExperimentConfig, c1_nominal: float) -> ObserverConfig:
    d = {"c1_nominal": c1_nominal}
    d.update(cfg.observer)
    return ObserverConfig.from_dict(d)


def _write_report(out_dir: str, stem: str, rows: dict, lines: list) -> None:
    text = "\n".join(lines) + "\n"
    click.echo(text, nl=False)
    with open(os.path.join(out_dir, f"{stem}_report.txt"), "w") as fh:
        fh.write(text)
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows), lineterminator="\n")
    writer.writeheader()
    writer.writerow(rows)
    with open(os.path.join(out_dir, f"{stem}_metrics.csv"), "w") as fh:
        fh.write(buf.getvalue())


def _report_rows(prefix: str, report: MetricsReport) -> dict:
    return {f"{prefix}_{k}": v for k, v in report.to_dict().items()}


@click.group()
@click.option("--config", "config", type=click.Path(dir_okay=False), default=None,
              help="Experiment configuration (YAML).")
@click.option("--out", "out", type=click.Path(file_okay=False), default=None,
              help="Output directory.")
@click.option("--seed", type=int, default=None, help="Noise seed (default 0).")
@click.option("--engine", default=None, help="Engine preset (P160, P220) or engine file.")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
@click.pass_context
def cli(ctx, config, out, seed, engine, verbose):
    """Turbojet identification and thrust estimation tools."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config": config, "out": out, "seed": seed, "engine": engine}


@cli.command("simulate")
@click.option("--which", type=click.Choice(["identification", "validation"]),
              default="identification", help="Which configured schedule to run.")
@click.pass_context
def cmd_simulate(ctx, which):
    """Run the synthetic plant and write a simulation log CSV plus a manifest."""
    cfg, engine, out_dir = _settings(ctx)
    specs = cfg.schedule if which == "identification" else cfg.validation_schedule
    u = generate_schedule(specs, cfg.dt)
    log = simulate(engine.model, engine.thrust_map, u, cfg.failures, cfg.integrator_dt,
                   cfg.quantization_step, cfg.omega_noise_std, cfg.seed)
    path = os.path.join(out_dir, f"simulation_{which}.csv")
    io.write_columns(path, log.columns())
    manifest = cfg.manifest()
    manifest["engine_name"] = engine.name
    manifest["which"] = which
    if which == "validation":
        manifest["schedule"] = [s.to_dict() for s in specs]
    with open(os.path.join(out_dir, f"simulation_{which}.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(f"wrote {path} ({len(log)} samples)")


def _speed_record(path):
    cols = io.read_columns(path, required=("time", "u"))
    name = "omega" if "omega" in cols else "omega_meas"
    if name not in cols:
        raise io.ConfigError(f"{path}: missing column omega")
    dt = io.uniform_step(cols["time"])
    u = TimeSeries(float(cols["time"][0]), dt, cols["u"], name="u")
    return u, cols[name]


@cli.command("identify")
@click.argument("dataset", type=click.Path(dir_okay=False))
@click.option("--validation", type=click.Path(dir_okay=False), default=None,
              help="Held-out record (time,u,omega) used for scoring.")
@click.option("--no-refine", is_flag=True, help="Skip the EKF coefficient refinement.")
@click.pass_context
def cmd_identify(ctx, dataset, validation, no_refine):
    """Identify the shaft-speed model from a (time,u,omega) record."""
    cfg, engine, out_dir = _settings(ctx)
    u, omega = _speed_record(dataset)
    result = identify(u, omega, idle=engine.spec.omega_idle, threshold=cfg.sindy_threshold,
                      quantization_step=cfg.quantization_step, smoothing=cfg.spline_smoothing,
                      refine=not no_refine, max_passes=cfg.max_passes)
    model = result.model
    model_path = os.path.join(out_dir, "model.kv")
    with open(model_path, "w") as fh:
        fh.write(model_text(model, header=f"shaft model identified from {os.path.basename(dataset)}"))

    if validation:
        u_val, omega_val = _speed_record(validation)
        label = "held-out"
    else:
        u_val, omega_val = u, omega
        label = "in-sample"
    report = validate_model(model, u_val, omega_val, engine.spec)
    lines = [f"model written to {model_path}",
             "active terms: " + ", ".join(result.sparse.active_names())]
    if result.ss_fit is not None:
        lines.append(f"steady-state fit: a1={result.ss_fit.a:.5g} b1={result.ss_fit.b:.5g} "
                     f"c1={result.ss_fit.c:.5g} R2={result.ss_fit.r_squared:.6f}")
    if result.refine is not None:
        hist = ", ".join(f"{m * 1000:.1f}" for m in result.refine.mae_history)
        lines.append(f"refinement MAE per pass [RPM]: {hist} (best pass {result.refine.best_pass})")
    lines.append(report.text(f"{label} speed error"))
    rows = {"validation": label, **_report_rows("speed", report)}
    _write_report(out_dir, "identify", rows, lines)


@cli.command("fit-static")
@click.argument("xy_csv", type=click.Path(dir_okay=False))
@click.option("--which", type=click.Choice(["omega_u", "thrust_omega"]), required=True)
@click.option("--fix-c", type=float, default=None, help="Hold the offset at this value.")
@click.pass_context
def cmd_fit_static(ctx, xy_csv, which, fix_c):
    """Fit a static power law to a two-column (x,y) CSV."""
    cfg, engine, out_dir = _settings(ctx)
    cols = io.read_columns(xy_csv, required=("x", "y"))
    x, y = cols["x"], cols["y"]
    if x.size < 4:
        raise io.ConfigError(f"{xy_csv}: power-law fit needs at least 4 points, got {x.size}")
    if which == "omega_u" and fix_c is None:
        idle = y[x == 0]
        fix_c = float(np.mean(idle)) if idle.size else engine.spec.omega_idle
    fit = fit_power_law(x, y, fix_c=fix_c)
    if which == "omega_u":
        values = {"a1": fit.a, "b1": fit.b, "c1": fit.c}
    else:
        values = {"a2": fit.a, "b2": fit.b, "c2": fit.c}
    values.update(rmse=fit.rmse, r_squared=fit.r_squared, converged=fit.converged)
    path = os.path.join(out_dir, f"fit_{which}.kv")
    io.write_kv(path, values, header=f"{which} power-law fit of {os.path.basename(xy_csv)}")
    lines = [f"fit written to {path}"] + [f"{k} = {v}" for k, v in values.items()]
    _write_report(out_dir, f"fit_{which}", values, lines)
    if not fit.converged:
        raise NumericalFailure(f"regression did not converge after {fit.iterations} iterations")


@cli.command("estimate")
@click.argument("measurement_csv", type=click.Path(dir_okay=False))
@click.option("--model", "model_path", type=click.Path(dir_okay=False), default=None,
              help="Shaft model file (default: engine preset).")
@click.option("--thrust-map", "map_path", type=click.Path(dir_okay=False), default=None,
              help="Thrust map file (default: engine preset).")
@click.pass_context
def cmd_estimate(ctx, measurement_csv, model_path, map_path):
    """Run the thrust observer over a (time,u,omega_meas[,thrust_true]) record."""
    cfg, engine, out_dir = _settings(ctx)
    model = model_from_file(model_path) if model_path else engine.model
    tmap = thrust_map_from_file(map_path) if map_path else engine.thrust_map
    cols = io.read_columns(measurement_csv, required=("time", "u", "omega_meas"))
    try:
        io.uniform_step(cols["time"])
    except ValueError as exc:
        raise io.ConfigError(f"{measurement_csv}: {exc}") from exc
    obs_cfg = _observer_config(cfg, model.c1)
    est = run_observer(cols["time"], cols["u"], cols["omega_meas"], model, tmap, obs_cfg)
    path = os.path.join(out_dir, "estimate.csv")
    io.write_columns(path, est.columns())
    click.echo(f"wrote {path} ({len(est)} samples)")
    if "thrust_true" in cols:
        report = thrust_metrics(cols["thrust_true"], est.thrust_hat, engine.spec)
        _write_report(out_dir, "estimate", _report_rows("thrust", report),
                      [report.text("thrust error")])


@cli.command("evaluate")
@click.argument("reference_csv", type=click.Path(dir_okay=False))
@click.argument("estimate_csv", type=click.Path(dir_okay=False))
@click.option("--kind", type=click.Choice(["thrust", "speed"]), default="thrust")
@click.option("--ref-col", default=None, help="Reference column (thrust_true / omega_true).")
@click.option("--est-col", default=None, help="Estimate column (thrust_hat / omega_hat).")
@click.pass_context
def cmd_evaluate(ctx, reference_csv, estimate_csv, kind, ref_col, est_col):
    """Error metrics between a reference column and an estimate column."""
    cfg, engine, out_dir = _settings(ctx)
    ref_col = ref_col or ("thrust_true" if kind == "thrust" else "omega_true")
    est_col = est_col or ("thrust_hat" if kind == "thrust" else "omega_hat")
    ref = io.read_columns(reference_csv, required=("time", ref_col))
    est = io.read_columns(estimate_csv, required=("time", est_col))
    if ref["time"].size != est["time"].size or np.max(np.abs(ref["time"] - est["time"])) > 1e-6:
        raise io.ConfigError("reference and estimate time columns differ")
    if kind == "thrust":
        report = thrust_metrics(ref[ref_col], est[est_col], engine.spec)
    else:
        report = speed_metrics(ref[ref_col], est[est_col], engine.spec)
    _write_report(out_dir, "evaluate", _report_rows(kind, report), [report.text(f"{kind} error")])


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="jetthrust", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except io.ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except (NumericalFailure, SimulationDiverged, EkfError, StructureError,
            np.linalg.LinAlgError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_NUMERICAL
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
