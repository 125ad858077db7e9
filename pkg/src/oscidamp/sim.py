"""Fixed-step closed-loop simulation of the multi-area model.

The plant ``xdot = A x + B (u + dP)`` is integrated with classical RK4 at a
fixed step, the input being held over each step.  Four control modes are
supported:

``fd`` / ``sf``
    ``u = -Ks x_meas``.
``sdf_exact``
    The algebraic loop ``u = -Kn (A x + B (u + dP)) + Kn B dP_hat`` is
    solved exactly every step, which collapses to ``-K_eff x`` when the
    feed-forward disturbance is exact.
``sdf_measured``
    ``u = -Kn xdot_meas + Kn B dP_hat`` where ``xdot_meas`` is the derivative
    sampled at the latest PMU frame (using the input applied before the
    frame), which breaks the loop with a one-frame hold.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .control import effective_sdf_gain, loop_feedthrough
from .exceptions import Diverged

__all__ = [
    "StepLoad",
    "FaultPulse",
    "BurstLoad",
    "NoDisturbance",
    "NoiseSpec",
    "Feedforward",
    "Scenario",
    "Trajectory",
    "PMUChannel",
    "CONTROL_MODES",
    "eval_disturbance",
    "rk4_step",
    "rk4_propagator",
    "simulate_closed_loop",
]

CONTROL_MODES = ("fd", "sf", "sdf_exact", "sdf_measured")
DIVERGENCE_LIMIT = 1e6


def _area_vector(area, value, n_areas):
    if not 0 <= area < n_areas:
        raise ValueError(f"disturbance area {area} outside 0..{n_areas - 1}")
    out = np.zeros(n_areas)
    out[area] = value
    return out


@dataclass(frozen=True)
class NoDisturbance:
    kind = "none"

    def level(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    area = 0


@dataclass(frozen=True)
class StepLoad:
    """Load change of ``magnitude`` p.u. on ``[t_on, t_off)``."""

    area: int
    magnitude: float
    t_on: float
    t_off: float
    kind = "step"

    def __post_init__(self):
        if not self.t_off > self.t_on:
            raise ValueError("t_off must be later than t_on")

    def level(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= self.t_on) & (t < self.t_off), self.magnitude, 0.0)


@dataclass(frozen=True)
class FaultPulse:
    area: int
    magnitude: float
    t_on: float
    duration: float
    kind = "fault"

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("fault duration must be positive")

    def level(self, t):
        t = np.asarray(t, dtype=float)
        on = (t >= self.t_on) & (t < self.t_on + self.duration)
        return np.where(on, self.magnitude, 0.0)


@dataclass(frozen=True)
class BurstLoad:
    """Square-wave load: ``high`` for the first ``duty`` of every period.

    Active on ``[t_start, t_end]``, zero outside that window.
    """

    area: int
    low: float
    high: float
    period: float = 4.0
    duty: float = 0.5
    t_start: float = 0.0
    t_end: float = 40.0
    kind = "burst"

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError("burst high level must exceed low level")
        if not 0 < self.duty < 1:
            raise ValueError("duty must lie in (0, 1)")
        if not self.period > 0 or not self.t_end > self.t_start:
            raise ValueError("burst needs a positive period and window")

    def level(self, t):
        t = np.asarray(t, dtype=float)
        phase = np.mod(t - self.t_start, self.period)
        value = np.where(phase < self.duty * self.period, self.high, self.low)
        inside = (t >= self.t_start) & (t <= self.t_end)
        return np.where(inside, value, 0.0)


def eval_disturbance(profile, t, n_areas):
    """Per-area disturbance vector at time ``t`` (only the named area is nonzero)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return _area_vector(profile.area, float(profile.level(t)), n_areas)


def _disturbance_series(profile, times, n_areas):
    out = np.zeros((len(times), n_areas))
    if not isinstance(profile, NoDisturbance):
        _area_vector(profile.area, 0.0, n_areas)
        out[:, profile.area] = profile.level(times)
    return out


@dataclass(frozen=True)
class NoiseSpec:
    """PMU measurement noise (standard deviations, Hz / rad / Hz per s).

    ``sigma_rocof=None`` means ``sigma_f * pmu_rate * sqrt(2)``, the spread
    of a first difference of two frequency frames.
    """

    enabled: bool = False
    sigma_f: float = 0.005 / 3
    sigma_delta: float = math.radians(0.573) / 3
    sigma_rocof: float = None
    pmu_rate: float = 60.0
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_f", "sigma_delta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.sigma_rocof is not None and self.sigma_rocof < 0:
            raise ValueError("sigma_rocof must be >= 0")
        if not self.pmu_rate > 0:
            raise ValueError("pmu_rate must be positive")

    @property
    def rocof_sigma(self):
        if self.sigma_rocof is None:
            return self.sigma_f * self.pmu_rate * math.sqrt(2.0)
        return self.sigma_rocof


@dataclass(frozen=True)
class Feedforward:
    """Source of the disturbance estimate used by SDF modes."""

    mode: str = "true_value"
    lag: float = 0.0

    def __post_init__(self):
        if self.mode not in ("true_value", "delayed", "off"):
            raise ValueError(f"unknown feedforward mode {self.mode!r}")
        if self.lag < 0:
            raise ValueError("lag must be >= 0")


@dataclass(frozen=True)
class Scenario:
    disturbance: object = field(default_factory=NoDisturbance)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    horizon: float = 80.0
    dt: float = 0.001
    controller: str = "sdf_exact"
    feedforward: Feedforward = field(default_factory=Feedforward)

    def __post_init__(self):
        if not self.horizon > 0 or not self.dt > 0:
            raise ValueError("horizon and dt must be positive")
        if self.controller not in CONTROL_MODES:
            raise ValueError(f"controller must be one of {CONTROL_MODES}")
        if self.noise.enabled and self.dt > 1.0 / (2.0 * self.noise.pmu_rate) + 1e-15:
            raise ValueError("dt must not exceed half a PMU frame when noise is enabled")

    @property
    def n_steps(self):
        return int(math.floor(self.horizon / self.dt + 1e-9))


@dataclass(eq=False)
class Trajectory:
    """Sampled closed-loop response.

    ``measured`` holds the feedback signal the controller saw at each step:
    the state for FD/SF/SDF_exact, the state derivative for SDF_measured.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    measured: np.ndarray
    dp: np.ndarray
    n_areas: int
    f_nom: float = 60.0
    meta: dict = field(default_factory=dict)

    @property
    def angles(self):
        return self.states[:, : self.n_areas]

    @property
    def speeds(self):
        return self.states[:, self.n_areas:]

    @property
    def frequencies_hz(self):
        return self.f_nom * self.speeds

    def __len__(self):
        return len(self.times)


def _deriv(a, b, x, w):
    return a @ x + b @ w


def rk4_step(ss, x, u_plus_dp, dt):
    """One classical RK4 step of ``xdot = A x + B w`` with ``w`` held."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    a, b = ss.a, ss.b
    w = np.asarray(u_plus_dp, dtype=float)
    x = np.asarray(x, dtype=float)
    k1 = _deriv(a, b, x, w)
    k2 = _deriv(a, b, x + 0.5 * dt * k1, w)
    k3 = _deriv(a, b, x + 0.5 * dt * k2, w)
    k4 = _deriv(a, b, x + dt * k3, w)
    out = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.abs(out) <= DIVERGENCE_LIMIT):
        raise Diverged(f"state magnitude exceeded {DIVERGENCE_LIMIT:g}")
    return out


def rk4_propagator(ss, dt):
    """Matrices ``(Phi, Gamma)`` with ``rk4_step(x, w) == Phi x + Gamma w``.

    For a linear plant with held input the four RK4 stages collapse to a
    truncated exponential series; this is the same arithmetic, reordered.
    """
    a = ss.a
    n = a.shape[0]
    ha = dt * a
    ha2 = ha @ ha
    ha3 = ha2 @ ha
    eye = np.eye(n)
    phi = eye + ha + ha2 / 2.0 + ha3 / 6.0 + ha3 @ ha / 24.0
    psi = dt * (eye + ha / 2.0 + ha2 / 6.0 + ha3 / 24.0)
    return phi, psi @ ss.b


def _propagate(f, g, w, x0, block=64):
    """All states of ``x[k+1] = F x[k] + G w[k]`` for ``k < len(w)``.

    Blocks of ``block`` steps are advanced at once through a precomputed
    block-Toeplitz impulse response; only the block boundaries are
    sequential.
    """
    n_steps, m = w.shape
    n = f.shape[0]
    n_blocks = -(-n_steps // block)
    powers = np.empty((block + 1, n, n))
    powers[0] = np.eye(n)
    for i in range(1, block + 1):
        powers[i] = f @ powers[i - 1]
    impulse = powers[:block] @ g  # F^i G
    toeplitz = np.zeros((block, n, block, m))
    for i in range(block):
        for j in range(i + 1):
            toeplitz[i, :, j, :] = impulse[i - j]
    toeplitz = toeplitz.reshape(block * n, block * m)
    padded = np.zeros((n_blocks * block, m))
    padded[:n_steps] = w
    forced = (padded.reshape(n_blocks, block * m) @ toeplitz.T).reshape(n_blocks, block, n)
    free = powers[1:]
    out = np.empty((n_blocks * block + 1, n))
    out[0] = x0
    x = np.asarray(x0, dtype=float)
    for k in range(n_blocks):
        seg = free @ x + forced[k]
        out[k * block + 1:(k + 1) * block + 1] = seg
        x = seg[-1]
    return out[: n_steps + 1]


class PMUChannel:
    """Sample-and-hold PMU measurement with Gaussian errors.

    A fresh error vector is drawn at each frame instant (multiples of
    ``1 / pmu_rate``) and the measured values are held until the next
    frame.  Angle errors are in rad; frequency and RoCoF errors are
    converted from Hz to p.u. by ``f_nom``.  The angle-derivative entries
    share the frequency error, since both come from the same frequency
    estimate.
    """

    def __init__(self, noise, n_areas, f_nom=60.0, seed=None):
        self.noise = noise
        self.n_areas = n_areas
        self.f_nom = f_nom
        self.rng = np.random.default_rng(noise.seed if seed is None else seed)
        self._frame = None
        self._held = None

    def frame_index(self, t):
        return int(math.floor(t * self.noise.pmu_rate + 1e-9))

    def new_frame(self, t):
        return self.frame_index(t) != self._frame

    def measure(self, x_true, xdot_true, t):
        if not self.noise.enabled:
            return np.asarray(x_true, float), np.asarray(xdot_true, float)
        frame = self.frame_index(t)
        if frame != self._frame:
            n = self.n_areas
            e_delta = self.rng.normal(0.0, self.noise.sigma_delta, n)
            e_freq = self.rng.normal(0.0, self.noise.sigma_f / self.f_nom, n)
            e_rocof = self.rng.normal(0.0, self.noise.rocof_sigma / self.f_nom, n)
            x_meas = np.asarray(x_true, float) + np.concatenate([e_delta, e_freq])
            xdot_meas = np.asarray(xdot_true, float) + np.concatenate([e_freq, e_rocof])
            self._frame = frame
            self._held = (x_meas, xdot_meas)
        return self._held


def _feedforward_series(sc, times, dp, n_areas):
    ff = sc.feedforward
    if ff.mode == "true_value":
        return dp
    if ff.mode == "off":
        return np.zeros_like(dp)
    shifted = times - ff.lag
    out = _disturbance_series(sc.disturbance, np.maximum(shifted, 0.0), n_areas)
    out[shifted < 0] = 0.0
    return out


def _check_finite(states, times):
    bad = ~(np.abs(states) <= DIVERGENCE_LIMIT).all(axis=1)
    if bad.any():
        k = int(np.argmax(bad))
        return k
    return None


def simulate_closed_loop(ss, gains, sc, x0=None, f_nom=60.0):
    """Integrate the closed loop over ``sc.horizon`` with step ``sc.dt``.

    Raises
    ------
    Diverged
        A state left ``[-1e6, 1e6]`` or became non-finite.  The partial
        trajectory is attached as ``exc.trajectory``.
    SingularLoop
        SDF mode with ``I + Kn B`` singular.
    """
    n = ss.n_areas
    nx = ss.n_states
    mode = sc.controller
    if mode in ("sdf_exact", "sdf_measured") and gains.kn is None:
        raise ValueError(f"{mode} needs SDF gains (kn)")
    if gains.ks.shape != (ss.n_inputs, nx):
        raise ValueError("gain dimensions do not match the system")
    n_steps = sc.n_steps
    times = np.arange(n_steps + 1) * sc.dt
    dp = _disturbance_series(sc.disturbance, times, n)
    dp_hat = _feedforward_series(sc, times, dp, n)
    x0 = np.zeros(nx) if x0 is None else np.asarray(x0, dtype=float)

    if mode == "sdf_exact":
        k_state = effective_sdf_gain(ss, gains.kn)
        mismatch_gain = loop_feedthrough(ss, gains.kn)
    else:
        k_state = gains.ks
        mismatch_gain = None

    meta = {"controller": mode, "dt": sc.dt, "seed": sc.noise.seed,
            "noise": bool(sc.noise.enabled)}
    with np.errstate(over="ignore", invalid="ignore"):
        if mode == "sdf_measured":
            states, controls, measured = _run_sdf_measured(ss, gains, sc, times, dp, dp_hat, x0, f_nom)
        elif sc.noise.enabled:
            states, controls, measured = _run_sampled(ss, k_state, mismatch_gain, sc, times, dp, dp_hat, x0, f_nom)
        else:
            states, controls, measured = _run_linear(ss, k_state, mismatch_gain, sc, dp, dp_hat, x0)

    traj = Trajectory(times, states, controls, measured, dp, n, f_nom, meta)
    bad = _check_finite(states, times)
    if bad is not None:
        cut = Trajectory(times[:bad], states[:bad], controls[:bad], measured[:bad], dp[:bad], n, f_nom, meta)
        raise Diverged(f"closed loop diverged at t = {times[bad]:.3f} s", time=float(times[bad]), trajectory=cut)
    return traj


def _run_linear(ss, k_state, mismatch_gain, sc, dp, dp_hat, x0):
    # u_k = -K x_k + S (dp_hat_k - dp_k) is linear, so the loop closes exactly
    phi, gam = rk4_propagator(ss, sc.dt)
    ff = np.zeros_like(dp) if mismatch_gain is None else (dp_hat - dp) @ mismatch_gain.T
    f = phi - gam @ k_state
    states = _propagate(f, gam, (ff + dp)[:-1], x0)
    controls = -states @ k_state.T + ff
    return states, controls, states.copy()


def _run_sampled(ss, k_state, mismatch_gain, sc, times, dp, dp_hat, x0, f_nom):
    phi, gam = rk4_propagator(ss, sc.dt)
    channel = PMUChannel(sc.noise, ss.n_areas, f_nom)
    n_steps = len(times) - 1
    states = np.empty((n_steps + 1, ss.n_states))
    controls = np.empty((n_steps + 1, ss.n_inputs))
    measured = np.empty_like(states)
    ff = np.zeros_like(dp) if mismatch_gain is None else (dp_hat - dp) @ mismatch_gain.T
    a, b = ss.a, ss.b
    x = x0.copy()
    u = np.zeros(ss.n_inputs)
    for k in range(n_steps + 1):
        states[k] = x
        if channel.new_frame(times[k]):
            xdot = a @ x + b @ (u + dp[k])
            x_meas, _ = channel.measure(x, xdot, times[k])
        u = -k_state @ x_meas + ff[k]
        controls[k] = u
        measured[k] = x_meas
        if k < n_steps:
            x = phi @ x + gam @ (u + dp[k])
            if not np.abs(x).max() <= DIVERGENCE_LIMIT:
                states[k + 1:] = np.nan
                break
    return states, controls, measured


def _run_sdf_measured(ss, gains, sc, times, dp, dp_hat, x0, f_nom):
    phi, gam = rk4_propagator(ss, sc.dt)
    channel = PMUChannel(sc.noise, ss.n_areas, f_nom)
    kn = gains.kn
    ff_gain = kn @ ss.b
    n_steps = len(times) - 1
    states = np.empty((n_steps + 1, ss.n_states))
    controls = np.empty((n_steps + 1, ss.n_inputs))
    measured = np.empty_like(states)
    a, b = ss.a, ss.b
    x = x0.copy()
    u = np.zeros(ss.n_inputs)
    xdot_meas = None
    last_frame = None
    for k in range(n_steps + 1):
        states[k] = x
        frame = channel.frame_index(times[k])
        if frame != last_frame:
            # derivative seen by the PMU uses the input held before this frame
            xdot = a @ x + b @ (u + dp[k])
            _, xdot_meas = channel.measure(x, xdot, times[k])
            last_frame = frame
        u = -kn @ xdot_meas + ff_gain @ dp_hat[k]
        controls[k] = u
        measured[k] = xdot_meas
        if k < n_steps:
            x = phi @ x + gam @ (u + dp[k])
            if not np.abs(x).max() <= DIVERGENCE_LIMIT:
                states[k + 1:] = np.nan
                break
    return states, controls, measured
