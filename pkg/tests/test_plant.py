import numpy as np
import pytest
from scipy.integrate import solve_ivp

from jetthrust.plant import (SIMULATION_COLUMNS, FailureEvent, OmegaUModel, SimulationDiverged,
                             ThrustMap, effective_c1, eval_dynamics, simulate,
                             steady_state_omega, thrust, thrust_rate)
from jetthrust.signals import SignalSpec, TimeSeries, generate_schedule

DT = 0.01


def step_input(level=60.0, duration=8.0, pre=1.0):
    return generate_schedule([SignalSpec("hold", pre, level=0.0),
                              SignalSpec("hold", duration - pre, level=level)], DT)


def test_model_validation(engines):
    m = engines["P220"].model
    with pytest.raises(ValueError, match="K_ss"):
        m.replace(K_ss=1.0)
    with pytest.raises(ValueError, match="damping"):
        m.replace(K_d=5.0)
    with pytest.raises(ValueError, match="steady-state"):
        m.replace(b1=1.2)
    with pytest.raises(ValueError):
        ThrustMap(1e-5, 0.9, 0.0)


def test_steady_state_and_dynamics_examples(engines):
    m = engines["P220"].model
    assert steady_state_omega(m, 0.0) == m.c1
    assert m.omega_max == pytest.approx(117.0, abs=1.0)
    w = steady_state_omega(m, 40.0)
    assert abs(eval_dynamics(m, w, 0.0, 40.0)) < 1e-12
    # below the equilibrium the shaft accelerates
    assert eval_dynamics(m, w - 1.0, 0.0, 40.0) == pytest.approx(-m.K_ss)
    assert eval_dynamics(m, 60.0, 0.0, 50.0, c1_override=30.0) == pytest.approx(
        m.K_ss * (60.0 - m.a1 * 50.0**m.b1 - 30.0))
    with pytest.raises(ValueError):
        eval_dynamics(m, 60.0, 0.0, 101.0)


def test_thrust_rate_matches_finite_difference(engines):
    tm = engines["P160"].thrust_map
    w = np.linspace(35, 120, 30)
    h = 1e-5
    fd = (thrust(tm, w + h) - thrust(tm, w - h)) / (2 * h)
    np.testing.assert_allclose(thrust_rate(tm, w, 1.0), fd, rtol=1e-7)
    with pytest.raises(ValueError):
        thrust(tm, 0.0)


def test_failure_event_profile():
    ev = FailureEvent(10.0, 8.0, 10.0, recovery_rate=2.0)
    assert ev.drop_at(10.0) == 0.0
    assert ev.drop_at(10.4) == pytest.approx(5.0)
    assert ev.drop_at(15.0) == 10.0
    assert ev.drop_at(20.0) == pytest.approx(6.0)
    assert ev.t_recovered == 23.0 and ev.drop_at(23.5) == 0.0
    assert effective_c1(35.0, [ev], 15.0) == 25.0
    assert FailureEvent.from_dict(ev.to_dict()) == ev
    with pytest.raises(ValueError):
        FailureEvent(0.0, 0.0, 1.0)


def test_simulation_log_layout_and_equilibrium(engines):
    e = engines["P220"]
    u = generate_schedule([SignalSpec("hold", 5.0, level=30.0)], DT)
    log = simulate(e.model, e.thrust_map, u)
    assert tuple(log.columns()) == SIMULATION_COLUMNS
    w = steady_state_omega(e.model, 30.0)
    # starting on the manifold, the plant stays there
    np.testing.assert_allclose(log.omega_true, w, atol=1e-9)
    np.testing.assert_allclose(log.omega_dot_true, 0.0, atol=1e-9)
    np.testing.assert_allclose(log.omega_meas, np.round(w, 1), atol=1e-9)
    np.testing.assert_allclose(log.thrust_true, thrust(e.thrust_map, w))


def test_step_response_settles_to_new_equilibrium(engines):
    e = engines["P160"]
    log = simulate(e.model, e.thrust_map, step_input(60.0, 25.0))
    assert log.omega_true[-1] == pytest.approx(steady_state_omega(e.model, 60.0), abs=1e-3)
    assert np.all(np.abs(log.omega_meas - log.omega_true) <= 0.05 + 1e-9)


def test_rk4_matches_reference_integrator(engines):
    m = engines["P220"].model
    u = step_input(70.0, 4.0)
    log = simulate(m, engines["P220"].thrust_map, u)

    def rhs(t, y):
        level = 0.0 if t < 1.0 else 70.0
        return [y[1], eval_dynamics(m, y[0], y[1], level)]

    ref1 = solve_ivp(rhs, (0, 1.0), [m.c1, 0.0], rtol=1e-12, atol=1e-12)
    ref = solve_ivp(rhs, (1.0, 3.99), ref1.y[:, -1], rtol=1e-12, atol=1e-12,
                    t_eval=u.time[100:], method="DOP853")
    np.testing.assert_allclose(log.omega_true[100:], ref.y[0], atol=1e-7)


def test_rk4_fourth_order_convergence(engines):
    m = engines["P220"].model
    u = step_input(70.0, 2.0)
    fine = simulate(m, engines["P220"].thrust_map, u, integrator_dt=DT / 80).omega_true
    err = [np.max(np.abs(simulate(m, engines["P220"].thrust_map, u, integrator_dt=h)
                         .omega_true - fine)) for h in (DT / 2, DT / 4)]
    assert 10 < err[0] / err[1] < 22


def test_failure_lowers_speed_by_drop(engines):
    e = engines["P160"]
    u = generate_schedule([SignalSpec("hold", 30.0, level=50.0)], DT)
    ev = FailureEvent(5.0, 15.0, 10.0)
    log = simulate(e.model, e.thrust_map, u, [ev])
    k = int(19.0 / DT)
    assert log.c1_eff[k] == pytest.approx(e.model.c1 - 10.0)
    assert log.omega_true[k] == pytest.approx(steady_state_omega(e.model, 50.0) - 10.0, abs=0.05)


def test_noise_seed_determinism(engines):
    e = engines["P220"]
    u = step_input(40.0, 3.0)
    a = simulate(e.model, e.thrust_map, u, omega_noise_std=0.2, seed=3)
    b = simulate(e.model, e.thrust_map, u, omega_noise_std=0.2, seed=3)
    c = simulate(e.model, e.thrust_map, u, omega_noise_std=0.2, seed=4)
    np.testing.assert_array_equal(a.omega_meas, b.omega_meas)
    assert not np.array_equal(a.omega_meas, c.omega_meas)


def test_divergence_and_input_errors(engines):
    e = engines["P220"]
    unstable = OmegaUModel(17.68, 0.3332, 35.0, -4.0, 50.0, check=False)
    with pytest.raises(SimulationDiverged):
        simulate(unstable, e.thrust_map, step_input(50.0, 20.0))
    with pytest.raises(ValueError):
        simulate(e.model, e.thrust_map, TimeSeries(0, DT, [0.0, 120.0]))
    with pytest.raises(ValueError):
        simulate(e.model, e.thrust_map, step_input(), integrator_dt=0.02)
