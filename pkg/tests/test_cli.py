import csv
import json

import numpy as np
import pytest

from jetthrust.cli import main
from jetthrust.io import read_columns, read_kv
from jetthrust.observer import ESTIMATE_COLUMNS
from jetthrust.plant import SIMULATION_COLUMNS


def metrics_row(path):
    with open(path) as fh:
        row = next(csv.DictReader(fh))
    return {k: (float(v) if k.endswith(("mae", "pct", "err")) else v) for k, v in row.items()}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    assert main(["--out", str(out), "simulate"]) == 0
    assert main(["--out", str(out), "simulate", "--which", "validation"]) == 0
    return out


def test_simulate_layout_and_manifest(workdir):
    path = workdir / "simulation_identification.csv"
    assert path.read_text().splitlines()[0] == ",".join(SIMULATION_COLUMNS)
    manifest = json.loads((workdir / "simulation_identification.json").read_text())
    assert manifest["engine"] == "P220" and manifest["seed"] == 0
    assert len(manifest["schedule"]) == 6


def test_simulate_is_byte_deterministic(workdir, tmp_path):
    assert main(["--out", str(tmp_path), "--seed", "0", "simulate"]) == 0
    a = (workdir / "simulation_identification.csv").read_bytes()
    assert (tmp_path / "simulation_identification.csv").read_bytes() == a


def test_round_trip_identify_estimate(workdir, tmp_path):
    ident = workdir / "simulation_identification.csv"
    valid = workdir / "simulation_validation.csv"
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["--out", str(out1), "identify", str(ident), "--validation", str(valid)]) == 0
    assert main(["--out", str(out2), "identify", str(ident), "--validation", str(valid)]) == 0
    assert (out1 / "model.kv").read_bytes() == (out2 / "model.kv").read_bytes()
    row = metrics_row(out1 / "identify_metrics.csv")
    assert row["validation"] == "held-out" and row["speed_mae_pct"] <= 1.8

    assert main(["--out", str(out1), "estimate", str(valid), "--model",
                 str(out1 / "model.kv")]) == 0
    est = out1 / "estimate.csv"
    assert est.read_text().splitlines()[0] == ",".join(ESTIMATE_COLUMNS)
    metrics = metrics_row(out1 / "estimate_metrics.csv")
    assert metrics["thrust_mae"] <= 3.96 and metrics["thrust_mae_pct"] <= 1.9

    # evaluate recomputes the same numbers from the raw columns
    assert main(["--out", str(tmp_path / "ev"), "evaluate", str(valid), str(est)]) == 0
    ev = metrics_row(tmp_path / "ev" / "evaluate_metrics.csv")
    truth = read_columns(valid)["thrust_true"]
    hat = read_columns(est)["thrust_hat"]
    assert ev["thrust_mae"] == pytest.approx(np.mean(np.abs(truth - hat)), rel=1e-9)
    assert ev["thrust_mae_pct"] == pytest.approx(
        100 * np.mean(np.abs(truth - hat)) / 220.0, rel=1e-9)


def test_estimate_without_truth(workdir, tmp_path):
    cols = read_columns(workdir / "simulation_validation.csv")
    path = tmp_path / "meas.csv"
    from jetthrust.io import write_columns
    write_columns(path, {k: cols[k][:500] for k in ("time", "u", "omega_meas")})
    assert main(["--out", str(tmp_path), "estimate", str(path)]) == 0
    assert (tmp_path / "estimate.csv").exists()
    assert not (tmp_path / "estimate_metrics.csv").exists()


def test_fit_static(tmp_path):
    from jetthrust.engines import load_engine
    from jetthrust.io import write_columns
    from jetthrust.plant import steady_state_omega
    m = load_engine("P220").model
    x = np.arange(0.0, 101.0, 10.0)
    path = tmp_path / "xy.csv"
    write_columns(path, {"x": x, "y": np.array([steady_state_omega(m, v) for v in x])})
    assert main(["--out", str(tmp_path), "fit-static", str(path), "--which", "omega_u"]) == 0
    fit = read_kv(tmp_path / "fit_omega_u.kv")
    assert fit["r_squared"] >= 0.999 and fit["c1"] == 35.0 and fit["converged"] is True
    write_columns(tmp_path / "two.csv", {"x": x[:2], "y": x[:2]})
    assert main(["--out", str(tmp_path), "fit-static", str(tmp_path / "two.csv"),
                 "--which", "thrust_omega"]) == 1


def test_usage_and_config_errors(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "bogus"]) == 1
    assert main(["--out", str(tmp_path), "--engine", str(tmp_path / "nope.kv"), "simulate"]) == 1
    assert "nope.kv" in capsys.readouterr().err
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: [\n")
    assert main(["--config", str(cfg), "simulate"]) == 1
    short = tmp_path / "short.csv"
    short.write_text("time,u,omega\n" + "".join(f"{k / 100:.6f},0,35\n" for k in range(50)))
    assert main(["--out", str(tmp_path), "identify", str(short)]) == 1
    assert "at least" in capsys.readouterr().err


def test_foreign_structure_exits_with_numerical_failure(tmp_path, capsys):
    from jetthrust.engines import load_engine
    from jetthrust.io import write_columns
    from jetthrust.pipeline import identification_schedule
    from jetthrust.signals import generate_schedule, quantize_values
    # a plant whose damping also depends on throttle: K_ss*f_ss + (K_d + k_u*u)*w_dot
    m = load_engine("P220").model
    u = generate_schedule(identification_schedule(), 0.01)
    dt, k_u = 0.001, -0.1

    def acc(w, wd, uk):
        return m.K_ss * (w - m.a1 * uk**m.b1 - m.c1) + (m.damping(w) + k_u * uk) * wd

    w, wd = m.c1, 0.0
    omega = np.empty(len(u))
    for k, uk in enumerate(u.values):
        omega[k] = w
        for _ in range(10):
            a1_ = acc(w, wd, uk)
            w, wd = w + dt * wd, wd + dt * a1_
    path = tmp_path / "odd.csv"
    write_columns(path, {"time": u.time, "u": u.values, "omega": quantize_values(omega, 0.1)})
    assert main(["--out", str(tmp_path), "identify", str(path), "--no-refine"]) == 2
    assert "unsupported model structure identified: uω̇" in capsys.readouterr().err
