"""Peak-deviation and transient-time metrics for trajectories."""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import EmptySeries, GridMismatch

__all__ = [
    "Settling",
    "SignalMetrics",
    "ComparisonRow",
    "ComparisonTable",
    "peak_deviation",
    "transient_time",
    "improvement_pct",
    "trajectory_distance",
    "signal_series",
    "signal_metrics",
    "compare",
]

DEFAULT_BAND = 0.02
FINAL_WINDOW = 0.05
FLOOR_RAD = 1e-4
FLOOR_HZ = 1e-4


class Settling(NamedTuple):
    time: float
    settled: bool


@dataclass(frozen=True)
class SignalMetrics:
    signal: str
    peak_deviation: float
    transient_time: float
    settled: bool = True
    diverged: bool = False


def _series(times, values):
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise EmptySeries("empty series")
    if times is None:
        times = np.arange(values.size, dtype=float)
    times = np.asarray(times, dtype=float).ravel()
    if times.shape != values.shape:
        raise ValueError("times and values differ in length")
    return times, values


def peak_deviation(values, times=None, t_from=0.0):
    """Largest ``|value|`` at or after ``t_from``."""
    times, values = _series(times, values)
    window = values[times >= t_from]
    return float(np.max(np.abs(window))) if window.size else 0.0


def transient_time(values, times=None, onset=0.0, band=DEFAULT_BAND, floor=0.0):
    """Time after ``onset`` from which the signal stays near its final value.

    The tolerance is ``max(band * peak, floor)`` with ``peak`` measured from
    ``onset``; the final value is the mean of the trailing 5% of the
    record.  A signal still outside the tolerance at the last sample is
    reported as not settled with time ``horizon - onset``.
    """
    if not 0 < band < 1:
        raise ValueError("band must lie in (0, 1)")
    times, values = _series(times, values)
    n_tail = max(1, int(round(FINAL_WINDOW * values.size)))
    final = float(np.mean(values[-n_tail:]))
    mask = times >= onset
    t_after, v_after = times[mask], values[mask]
    if v_after.size == 0:
        return Settling(0.0, True)
    tol = max(band * float(np.max(np.abs(v_after))), floor)
    outside = np.nonzero(np.abs(v_after - final) > tol)[0]
    if outside.size == 0:
        return Settling(0.0, True)
    last = outside[-1]
    if last + 1 >= v_after.size:
        return Settling(float(times[-1] - onset), False)
    return Settling(float(t_after[last + 1] - onset), True)


def improvement_pct(t_base, t_test):
    if not t_base > 0:
        raise ValueError("baseline time must be positive")
    return (t_base - t_test) / t_base * 100.0


def trajectory_distance(a, b):
    """Max-abs differences ``(states, controls)`` over a shared time grid."""
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise GridMismatch("trajectories use different time grids")
    d_state = float(np.max(np.abs(a.states - b.states), initial=0.0))
    d_ctrl = float(np.max(np.abs(a.controls - b.controls), initial=0.0))
    return d_state, d_ctrl


def signal_ids(n_areas):
    """Table rows: angles, frequencies, then pairwise frequency differences."""
    ids = [f"delta_{i + 1}" for i in range(n_areas)]
    ids += [f"f_{i + 1}" for i in range(n_areas)]
    ids += [f"f_{j + 1}{i + 1}" for i in range(n_areas) for j in range(i + 1, n_areas)]
    return ids


def signal_label(sid):
    kind, _, idx = sid.partition("_")
    if kind == "delta":
        return f"Δδ_{idx} (rad)"
    return f"Δf_{idx} (Hz)"


def signal_series(traj, sid):
    """Time series of a named signal; frequencies in Hz."""
    # single-digit area numbers: at most five areas (ten states)
    kind, _, idx = sid.partition("_")
    if kind == "delta":
        return traj.angles[:, int(idx) - 1]
    if kind == "f" and len(idx) == 1:
        return traj.frequencies_hz[:, int(idx) - 1]
    if kind == "f" and len(idx) == 2:
        j, i = int(idx[0]) - 1, int(idx[1]) - 1
        return traj.frequencies_hz[:, j] - traj.frequencies_hz[:, i]
    raise KeyError(f"unknown signal {sid!r}")


def signal_metrics(traj, sid, onset=0.0, band=DEFAULT_BAND, diverged=False):
    values = signal_series(traj, sid)
    floor = FLOOR_RAD if sid.startswith("delta") else FLOOR_HZ
    settle = transient_time(values, traj.times, onset, band, floor)
    return SignalMetrics(
        signal=sid,
        peak_deviation=peak_deviation(values, traj.times, onset),
        transient_time=settle.time,
        settled=settle.settled,
        diverged=diverged,
    )


@dataclass(frozen=True)
class ComparisonRow:
    signal: str
    base: SignalMetrics
    test: SignalMetrics

    @property
    def improvement(self):
        return improvement_pct(self.base.transient_time, self.test.transient_time)


@dataclass
class ComparisonTable:
    """Baseline-versus-test metrics, one row per signal."""

    rows: list = field(default_factory=list)
    base_name: str = "FD"
    test_name: str = "SDF"

    @classmethod
    def from_values(cls, values, base_name="FD", test_name="SDF"):
        """Build from ``{signal: (peak_base, peak_test, t_base, t_test)}``."""
        rows = []
        for sid, (pb, pt, tb, tt) in values.items():
            rows.append(ComparisonRow(sid, SignalMetrics(sid, pb, tb), SignalMetrics(sid, pt, tt)))
        return cls(rows, base_name, test_name)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, sid):
        for row in self.rows:
            if row.signal == sid:
                return row
        raise KeyError(sid)

    @property
    def signals(self):
        return [r.signal for r in self.rows]


def compare(base, test, onset=0.0, signals=None, base_name="FD", test_name="SDF"):
    signals = signal_ids(base.n_areas) if signals is None else signals
    rows = [
        ComparisonRow(sid, signal_metrics(base, sid, onset), signal_metrics(test, sid, onset))
        for sid in signals
    ]
    return ComparisonTable(rows, base_name, test_name)
