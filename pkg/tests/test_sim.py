from dataclasses import replace

import numpy as np
import pytest

from oscidamp.config import load_config
from oscidamp.control import GainSet, LQRController, SDFController
from oscidamp.exceptions import Diverged
from oscidamp.experiments import simulate
from oscidamp.metrics import signal_metrics
from oscidamp.model import AreaParams, PowerSystem, StateSpace, TieNetwork, assemble_state_space
from oscidamp.sim import (
    BurstLoad,
    FaultPulse,
    Feedforward,
    NoDisturbance,
    NoiseSpec,
    PMUChannel,
    Scenario,
    StepLoad,
    eval_disturbance,
    rk4_propagator,
    rk4_step,
    simulate_closed_loop,
)


def step(**kw):
    base = dict(disturbance=StepLoad(0, -0.01, 5.0, 7.0), horizon=20.0, dt=0.001, controller="sf")
    base.update(kw)
    return Scenario(**base)


def test_step_load_levels():
    d = StepLoad(0, -0.01, 5.0, 7.0)
    np.testing.assert_array_equal(eval_disturbance(d, 6.0, 2), [-0.01, 0.0])
    np.testing.assert_array_equal(eval_disturbance(d, 7.0, 2), [0.0, 0.0])
    np.testing.assert_array_equal(eval_disturbance(d, 5.0, 2), [-0.01, 0.0])


def test_fault_pulse_levels():
    d = FaultPulse(0, -0.02, 5.0, 0.1)
    np.testing.assert_array_equal(eval_disturbance(d, 5.05, 2), [-0.02, 0.0])
    np.testing.assert_array_equal(eval_disturbance(d, 5.2, 2), [0.0, 0.0])


def test_burst_levels():
    d = BurstLoad(0, 0.03, 0.18, 4.0, 0.5, 0.0, 40.0)
    assert eval_disturbance(d, 1.0, 3)[0] == 0.18
    assert eval_disturbance(d, 3.0, 3)[0] == 0.03
    assert eval_disturbance(d, 41.0, 3)[0] == 0.0


def test_no_disturbance():
    np.testing.assert_array_equal(eval_disturbance(NoDisturbance(), 3.0, 2), [0.0, 0.0])


@pytest.mark.parametrize("make", [
    lambda: StepLoad(0, -0.01, 7.0, 5.0),
    lambda: FaultPulse(0, -0.02, 5.0, 0.0),
    lambda: BurstLoad(0, 0.18, 0.03),
    lambda: BurstLoad(0, 0.03, 0.18, duty=1.0),
])
def test_disturbance_invariants(make):
    with pytest.raises(ValueError):
        make()


def test_disturbance_area_out_of_range():
    with pytest.raises(ValueError):
        eval_disturbance(StepLoad(2, -0.01, 5.0, 7.0), 6.0, 2)


def test_rk4_decay_oracle():
    ss = StateSpace(np.array([[-1.0]]), np.array([[0.0]]), 1)
    x = np.array([1.0])
    for _ in range(1000):
        x = rk4_step(ss, x, [0.0], 0.001)
    assert abs(x[0] - np.exp(-1.0)) <= 1e-9


def test_rk4_double_integrator_exact():
    ss = StateSpace(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]), 1)
    h = 0.01
    # RK4 is exact for polynomials of degree <= 4: x = h^2/2, v = h
    np.testing.assert_allclose(rk4_step(ss, [0.0, 0.0], [1.0], h), [h * h / 2, h], atol=1e-16)
    np.testing.assert_allclose(rk4_step(ss, [0.0, 1.0], [0.0], h), [h, 1.0], atol=1e-16)


def test_rk4_flags_divergence():
    ss = StateSpace(np.array([[1.0]]), np.array([[0.0]]), 1)
    with pytest.raises(Diverged):
        rk4_step(ss, [2e6], [0.0], 0.001)


def test_propagator_matches_step(two_area_ss, rng):
    phi, gam = rk4_propagator(two_area_ss, 0.001)
    for _ in range(10):
        x, w = rng.normal(size=4), rng.normal(size=2)
        np.testing.assert_allclose(phi @ x + gam @ w, rk4_step(two_area_ss, x, w, 0.001), atol=1e-15)


def test_fast_path_matches_stepwise(two_area, two_area_ss):
    sf = LQRController().fit(two_area)
    sc = step(horizon=8.0)
    traj = simulate_closed_loop(two_area_ss, sf.gains_, sc)
    x = np.zeros(4)
    for k in range(len(traj.times) - 1):
        u = -sf.ks_ @ x
        x = rk4_step(two_area_ss, x, u + traj.dp[k], sc.dt)
    np.testing.assert_allclose(traj.states[-1], x, atol=1e-14)


def test_zero_input_zero_trajectory(two_area, two_area_ss):
    gains = SDFController().fit(two_area).gains_
    traj = simulate_closed_loop(two_area_ss, gains, Scenario(horizon=2.0))
    assert not traj.states.any() and not traj.controls.any()


def test_trajectory_lengths(two_area, two_area_ss):
    traj = simulate_closed_loop(two_area_ss, LQRController().fit(two_area).gains_, step(horizon=1.0))
    assert len(traj) == 1001
    for arr in (traj.states, traj.controls, traj.measured, traj.dp):
        assert len(arr) == 1001


def test_linearity_in_disturbance(two_area, two_area_ss):
    gains = LQRController().fit(two_area).gains_
    a = simulate_closed_loop(two_area_ss, gains, step())
    b = simulate_closed_loop(two_area_ss, gains, step(disturbance=StepLoad(0, -0.02, 5.0, 7.0)))
    np.testing.assert_allclose(b.states, 2 * a.states, atol=1e-9)


def test_noisy_run_deterministic(two_area, two_area_ss):
    gains = SDFController().fit(two_area).gains_
    sc = step(controller="sdf_exact", noise=NoiseSpec(enabled=True, seed=3), horizon=5.0)
    a = simulate_closed_loop(two_area_ss, gains, sc)
    b = simulate_closed_loop(two_area_ss, gains, sc)
    assert np.array_equal(a.states, b.states)
    c = simulate_closed_loop(two_area_ss, gains, replace(sc, noise=replace(sc.noise, seed=4)))
    assert not np.array_equal(a.states, c.states)


def test_pmu_hold_and_spread():
    noise = NoiseSpec(enabled=True, seed=0)
    ch = PMUChannel(noise, 2, 60.0)
    x = np.zeros(4)
    first, _ = ch.measure(x, x, 0.0)
    held, _ = ch.measure(x, x, 0.01)
    assert np.array_equal(first, held)
    samples = np.array([ch.measure(x, x, k / 60.0)[0] for k in range(1, 20001)])
    # speed errors in p.u.: sigma_f / f_nom
    assert np.std(samples[:, 2:]) == pytest.approx(0.005 / 3 / 60, rel=0.03)
    assert np.std(samples[:, :2]) == pytest.approx(noise.sigma_delta, rel=0.03)


def test_pmu_disabled_is_transparent():
    ch = PMUChannel(NoiseSpec(), 1)
    x = np.array([1.0, 2.0])
    assert np.array_equal(ch.measure(x, x, 0.0)[0], x)


def test_noise_dt_invariant():
    with pytest.raises(ValueError):
        Scenario(noise=NoiseSpec(enabled=True), dt=0.01)


def test_default_rocof_sigma():
    assert NoiseSpec().rocof_sigma == pytest.approx(0.005 / 3 * 60 * np.sqrt(2))


def test_sdf_exact_with_exact_feedforward_equals_sf(two_area, two_area_ss):
    sdf = SDFController().fit(two_area)
    a = simulate_closed_loop(two_area_ss, sdf.gains_, step(controller="sdf_exact"))
    b = simulate_closed_loop(two_area_ss, sdf.base_.gains_, step(controller="sf"))
    assert np.max(np.abs(a.states - b.states)) <= 1e-12


def test_feedforward_off_changes_response(two_area, two_area_ss):
    sdf = SDFController().fit(two_area)
    exact = simulate_closed_loop(two_area_ss, sdf.gains_, step(controller="sdf_exact"))
    off = simulate_closed_loop(two_area_ss, sdf.gains_,
                               step(controller="sdf_exact", feedforward=Feedforward("off")))
    lag = simulate_closed_loop(two_area_ss, sdf.gains_,
                               step(controller="sdf_exact", feedforward=Feedforward("delayed", 0.5)))
    assert np.max(np.abs(off.states - exact.states)) > 1e-6
    assert np.max(np.abs(lag.states - exact.states)) > 1e-6
    # before onset all three coincide
    pre = exact.times < 5.0
    assert np.array_equal(off.states[pre], exact.states[pre])


def test_sdf_measured_noise_free_tracks_exact(two_area, two_area_ss):
    sdf = SDFController().fit(two_area)
    exact = simulate_closed_loop(two_area_ss, sdf.gains_, step(controller="sdf_exact"))
    meas = simulate_closed_loop(two_area_ss, sdf.gains_, step(controller="sdf_measured"))
    peak = np.max(np.abs(exact.frequencies_hz))
    assert np.max(np.abs(meas.frequencies_hz - exact.frequencies_hz)) < 0.2 * peak


def test_divergence_reports_truncated_trajectory():
    ps = PowerSystem((AreaParams(1.0, 0.0), AreaParams(1.0, 0.0)), TieNetwork(2, ((0, 1, 1.0),), (0.1, 0.1)))
    ss = assemble_state_space(ps)
    # negative speed feedback pumps energy into every mode
    ks = np.hstack([np.zeros((2, 2)), -5.0 * np.eye(2)])
    gains = GainSet(mode="sf", ks=ks, ns=np.eye(2))
    sc = Scenario(StepLoad(0, -0.01, 0.0, 1.0), horizon=60.0, dt=0.001, controller="sf")
    with pytest.raises(Diverged) as info:
        simulate_closed_loop(ss, gains, sc)
    assert info.value.trajectory is not None
    assert len(info.value.trajectory) < sc.n_steps + 1
    assert np.all(np.isfinite(info.value.trajectory.states))


def test_sdf_mode_needs_sdf_gains(two_area, two_area_ss):
    with pytest.raises(ValueError):
        simulate_closed_loop(two_area_ss, LQRController().fit(two_area).gains_, step(controller="sdf_exact"))


def test_sdf_measured_frequency_and_angle_noise_only():
    # Diagnostic companion to the noise acceptance run: with the RoCoF
    # error switched off, PMU frequency/angle noise barely moves settling.
    cfg = load_config("two_area.json", env={})
    clean, _ = simulate(cfg, "sdf_measured")
    noise = replace(cfg.scenario.noise, enabled=True, sigma_rocof=0.0)
    noisy, _ = simulate(cfg, "sdf_measured", scenario=replace(cfg.scenario, noise=noise))
    t_clean = signal_metrics(clean, "f_1", 5.0)
    t_noisy = signal_metrics(noisy, "f_1", 5.0)
    assert t_noisy.settled
    assert t_noisy.transient_time < 1.25 * t_clean.transient_time
