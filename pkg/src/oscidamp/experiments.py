"""Controller design from configs, FD gain tuning and the canned experiments."""

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import DATA_DIR, load_config
from .control import FrequencyDifferenceController, LQRController, SDFController
from .exceptions import Diverged
from .metrics import compare, signal_metrics, signal_series, peak_deviation
from .model import assemble_state_space
from .report import REFERENCE_TWO_AREA, emit_csv, render_table
from .sim import BurstLoad, NoDisturbance, NoiseSpec, Scenario, StepLoad, simulate_closed_loop

__all__ = [
    "KD_GRID",
    "FD_PEAK_TARGET_HZ",
    "TuneResult",
    "tune_fd_gain",
    "step_scenario",
    "design",
    "simulate",
    "onset_time",
    "run_comparison",
    "reproduce",
]

KD_GRID = np.round(np.arange(0.1, 20.0 + 1e-9, 0.05), 2)
# Published FD inter-area peak for the two-area load step; kd is the one
# FD parameter that moves this signal, so it is what we calibrate against.
FD_PEAK_TARGET_HZ = REFERENCE_TWO_AREA["f_21"][0]
TUNE_DT = 0.01
TUNE_HORIZON = 40.0


@dataclass(frozen=True)
class TuneResult:
    kd: float
    grid: np.ndarray
    objective: np.ndarray
    criterion: str


def step_scenario(controller="sdf_exact", horizon=80.0, dt=0.001, noise=None):
    """Small load step: -0.01 p.u. in area 1 from 5 s to 7 s."""
    return Scenario(StepLoad(0, -0.01, 5.0, 7.0), noise or NoiseSpec(), horizon, dt, controller)


def tune_fd_gain(system, scenario=None, criterion="peak_match", target=FD_PEAK_TARGET_HZ,
                 grid=KD_GRID, signal="f_21"):
    """1-D grid search for the FD gain ``kd``.

    ``criterion="peak_match"`` picks the kd whose peak |signal| (Hz) is
    closest to ``target``; ``criterion="ise"`` minimises the integral of
    the squared signal.  The search runs the scenario noise-free on a
    10 ms step and at most 40 s, which resolves the sub-2 rad/s modes of
    these models far more finely than the 0.05 grid spacing needs.
    """
    if criterion not in ("peak_match", "ise"):
        raise ValueError(f"unknown criterion {criterion!r}")
    scenario = step_scenario("fd") if scenario is None else scenario
    coarse = replace(scenario, controller="fd", noise=NoiseSpec(),
                     dt=max(scenario.dt, TUNE_DT), horizon=min(scenario.horizon, TUNE_HORIZON))
    ss = assemble_state_space(system)
    values = np.empty(len(grid))
    for k, kd in enumerate(grid):
        gains = FrequencyDifferenceController(kd=float(kd)).fit(system).gains_
        try:
            traj = simulate_closed_loop(ss, gains, coarse, f_nom=system.f_nom)
        except Diverged:
            values[k] = np.inf
            continue
        y = signal_series(traj, signal)
        if criterion == "peak_match":
            values[k] = abs(peak_deviation(y, traj.times) - target)
        else:
            values[k] = float(np.sum(y[:-1] ** 2) * coarse.dt)
    best = int(np.argmin(values))
    return TuneResult(float(grid[best]), np.asarray(grid), values, criterion)


def _estimator(cfg_controller, system, mode=None, kd=None):
    mode = mode or cfg_controller.mode
    if mode == "fd":
        if kd is None:
            kd = cfg_controller.kd
        if kd == "auto":
            kd = tune_fd_gain(system).kd
        return FrequencyDifferenceController(kd=float(kd))
    lqr = LQRController(q=cfg_controller.q_diag, r=cfg_controller.r_diag)
    if mode == "sf":
        return lqr
    if mode in ("sdf", "sdf_exact", "sdf_measured"):
        return SDFController(base=lqr)
    raise ValueError(f"unknown controller {mode!r}")


def design(cfg, mode=None, kd=None):
    """Fitted estimator for ``mode`` (defaults to the config's controller)."""
    return _estimator(cfg.controller, cfg.system, mode, kd).fit(cfg.system)


SIM_MODES = {"fd": "fd", "sf": "sf", "sdf": "sdf_exact", "sdf_exact": "sdf_exact",
             "sdf_measured": "sdf_measured"}


def simulate(cfg, mode=None, kd=None, scenario=None):
    """Design the controller for ``mode`` and run the config scenario."""
    mode = mode or cfg.controller.mode
    est = design(cfg, mode, kd)
    sc = replace(scenario or cfg.scenario, controller=SIM_MODES[mode])
    ss = assemble_state_space(cfg.system)
    return simulate_closed_loop(ss, est.gains_, sc, f_nom=cfg.system.f_nom), est


def onset_time(disturbance):
    if isinstance(disturbance, NoDisturbance):
        return 0.0
    if isinstance(disturbance, BurstLoad):
        return disturbance.t_start
    return disturbance.t_on


def run_comparison(cfg, modes=("fd", "sdf"), kd=None, scenario=None):
    """Simulate ``modes`` on one scenario and compare the first two."""
    sc = scenario or cfg.scenario
    trajs = {}
    estimators = {}
    for mode in modes:
        trajs[mode], estimators[mode] = simulate(cfg, mode, kd, sc)
    names = {"fd": "FD", "sf": "SF", "sdf": "SDF", "sdf_measured": "SDFm"}
    base, test = modes[0], modes[1]
    table = compare(trajs[base], trajs[test], onset=onset_time(sc.disturbance),
                    base_name=names[base], test_name=names[test])
    return table, trajs, estimators


def _metrics_doc(traj, onset):
    from .metrics import signal_ids
    return {sid: vars(signal_metrics(traj, sid, onset)) for sid in signal_ids(traj.n_areas)}


EXPERIMENTS = {
    "a": ("two_area.json", "small load step, two areas"),
    "b": ("two_area_fault.json", "short fault, two areas"),
    "c": ("three_area.json", "burst load, three areas"),
}


def reproduce(experiment, out_dir, env=None):
    """Run a canned experiment end to end and write its artefacts.

    Returns the comparison table.  Output files carry no timestamps, so
    equal inputs (including the seed) give byte-identical files.
    """
    if experiment not in EXPERIMENTS:
        raise ValueError(f"experiment must be one of {sorted(EXPERIMENTS)}")
    cfg = load_config(DATA_DIR / EXPERIMENTS[experiment][0], env)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fp = cfg.fingerprint()
    dec = cfg.output.decimation
    onset = onset_time(cfg.scenario.disturbance)

    modes = ("fd", "sdf") if experiment != "a" else ("fd", "sdf", "sf")
    table, trajs, est = run_comparison(cfg, modes)
    for mode, traj in trajs.items():
        emit_csv(traj, out / f"{mode}.csv", dec, fp)
    metrics = {mode: _metrics_doc(traj, onset) for mode, traj in trajs.items()}
    metrics["fd"]["kd"] = est["fd"].kd

    if experiment == "a":
        # PMU-noise run of the sample-held derivative controller
        noisy = replace(cfg.scenario, noise=replace(cfg.scenario.noise, enabled=True))
        traj, _ = simulate(cfg, "sdf_measured", scenario=noisy)
        emit_csv(traj, out / "sdf_measured_noise.csv", dec, fp)
        metrics["sdf_measured_noise"] = _metrics_doc(traj, onset)

    reference = REFERENCE_TWO_AREA if experiment == "a" else None
    text, csv_text = render_table(table, reference)
    (out / "table.txt").write_text(text)
    (out / "table.csv").write_text(csv_text)
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    return table
