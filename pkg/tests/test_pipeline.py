import numpy as np
import pytest

from jetthrust.pipeline import (failure_window, fit_steady_state, identify, metrics,
                                speed_metrics, steady_state_points, thrust_metrics,
                                validation_schedule)
from jetthrust.plant import FailureEvent, steady_state_omega
from jetthrust.signals import SignalSpec, TimeSeries, generate_schedule

DT = 0.01


def test_metrics_recompute_from_columns(engines):
    spec = engines["P220"].spec
    y = np.array([50.0, 60.0, 70.0])
    y_hat = np.array([50.1, 59.8, 70.0])
    rep = speed_metrics(y, y_hat, spec)
    assert rep.mae == pytest.approx(100.0) and rep.units == "RPM"
    assert rep.mae_pct == pytest.approx(100 * 0.1 / 82.0, abs=1e-9)
    assert rep.max_err_pct == pytest.approx(100 * 0.2 / 82.0, abs=1e-9)
    t = thrust_metrics(np.array([100.0, 120.0]), np.array([102.0, 119.0]), spec)
    assert t.mae == pytest.approx(1.5) and t.mae_pct == pytest.approx(100 * 1.5 / 220.0)
    assert "MAE" in t.text("thrust")
    with pytest.raises(ValueError):
        metrics(y, y_hat, 0.0)


def test_steady_state_points_and_fit(engines):
    m = engines["P160"].model
    from jetthrust.plant import simulate
    specs = [SignalSpec("hold", 10.0, level=lvl) for lvl in (0, 20, 40, 60, 80, 100)]
    u = generate_schedule(specs, DT)
    log = simulate(m, engines["P160"].thrust_map, u)
    x, y = steady_state_points(u.values, log.omega_true, DT)
    np.testing.assert_array_equal(x, [0, 20, 40, 60, 80, 100])
    ref = [steady_state_omega(m, v) for v in x]
    np.testing.assert_allclose(y, ref, atol=0.05)
    fit = fit_steady_state(u.values, log.omega_meas, DT)
    assert fit.c == pytest.approx(m.c1, abs=0.05)
    assert fit.b == pytest.approx(m.b1, rel=0.01)


def test_fit_steady_state_needs_idle():
    u = np.repeat([20.0, 50.0, 70.0, 90.0], 600)
    w = 40 + u**0.5
    with pytest.raises(ValueError, match="idle"):
        fit_steady_state(u, w, DT)
    fit = fit_steady_state(u, w, DT, idle=40.0)
    assert fit.c == 40.0


def test_identify_rejects_short_record():
    u = TimeSeries(0.0, DT, np.zeros(50))
    with pytest.raises(ValueError, match="at least 110"):
        identify(u, np.full(50, 35.0))


def test_identify_exact_constants_without_refinement(engines, u_ident, ident_logs):
    m = engines["P160"].model
    res = identify(u_ident, ident_logs["P160"].omega_meas, ss_constants=(m.a1, m.b1, m.c1),
                   refine=False)
    assert res.refine is None and res.ss_fit is None
    assert res.model is res.sindy_model
    assert res.model.K_ss == pytest.approx(m.K_ss, rel=0.1)


def test_identified_structure_and_determinism(identified, engines):
    for name, (res, _) in identified.items():
        assert set(res.sparse.active_names()) == {"f_ss", "ω̇", "ωω̇", "ω²ω̇"}
        assert res.ss_fit.r_squared >= 0.999
        assert res.refine.mae_history[res.refine.best_pass] == min(res.refine.mae_history)


def test_failure_window():
    t = np.arange(0, 30, 0.5)
    mask = failure_window(t, [FailureEvent(10.0, 4.0, 4.0, 2.0)])
    assert t[mask][0] == 10.0 and t[mask][-1] == 16.0


def test_validation_schedule_differs_from_identification():
    from jetthrust.pipeline import identification_schedule
    assert validation_schedule() != identification_schedule()
    assert len(generate_schedule(validation_schedule(), DT)) == 15000


@pytest.mark.parametrize("name", ["P160", "P220"])
def test_spline_path_on_noise_free_speed(name, engines, u_ident, ident_logs):
    from jetthrust.sindy import MODEL_TERMS, build_library_B, stlsq
    from jetthrust.signals import smooth_spline_derivatives
    m = engines[name].model
    s = TimeSeries(0.0, DT, ident_logs[name].omega_true)
    w, wd, wdd = smooth_spline_derivatives(s, smoothing=0.0)
    sparse = stlsq(build_library_B((m.a1, m.b1, m.c1)), (w.values, wd.values, u_ident.values),
                   wdd.values, threshold=0.2)
    assert set(sparse.active_names()) == set(MODEL_TERMS.values())
    for key, term in MODEL_TERMS.items():
        assert sparse.as_dict()[term] == pytest.approx(getattr(m, key), rel=0.02)
