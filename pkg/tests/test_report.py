import numpy as np

from oscidamp.metrics import ComparisonTable
from oscidamp.report import REFERENCE_TWO_AREA, emit_csv, render_table, trajectory_csv
from oscidamp.sim import Trajectory


def make_traj(n_steps, dt=0.001):
    times = np.arange(n_steps) * dt
    states = np.column_stack([times, -times, times / 60, -times / 60])
    zeros = np.zeros((n_steps, 2))
    return Trajectory(times, states, zeros, states, zeros, 2, 60.0, {"controller": "sf", "seed": 0})


def data_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return lines[0], lines[1:]


def test_csv_three_steps():
    header, rows = data_rows(trajectory_csv(make_traj(3), decimation=1))
    assert header == "t_s,delta_1_rad,delta_2_rad,f_1_hz,f_2_hz,u_1_pu,u_2_pu,dp_1_pu,dp_2_pu"
    assert len(rows) == 3
    # speed in p.u. times f_nom gives Hz
    assert float(rows[2].split(",")[3]) == 0.002


def test_csv_decimation_gives_100_rows_per_second():
    _, rows = data_rows(trajectory_csv(make_traj(1000), decimation=10))
    assert len(rows) == 100


def test_csv_fingerprint_and_meta():
    text = trajectory_csv(make_traj(2), fingerprint="abc")
    assert "# config_sha256=abc" in text.splitlines()
    assert "# controller=sf" in text.splitlines()


def test_csv_round_trips_floats(tmp_path):
    traj = make_traj(7)
    path = emit_csv(traj, tmp_path / "sub" / "t.csv", decimation=1)
    loaded = np.loadtxt(path, delimiter=",", comments="#", skiprows=3)
    np.testing.assert_array_equal(loaded[:, 0], traj.times)


def test_render_reference_rows():
    values = {sid: v[:4] for sid, v in REFERENCE_TWO_AREA.items()}
    text, csv_text = render_table(ComparisonTable.from_values(values), REFERENCE_TWO_AREA)
    lines = text.splitlines()
    assert lines[0].startswith("Signal")
    assert "Ref Improvement %" in lines[0]
    assert lines[2].split()[:6] == ["Δδ_1", "(rad)", "0.0043", "0.0026", "48.06", "23.53"]
    assert "51.04" in lines[2]
    assert len(csv_text.splitlines()) == 6


def test_render_single_row_without_reference():
    text, csv_text = render_table(ComparisonTable.from_values({"f_1": (0.2, 0.1, 10.0, 5.0)}))
    assert "Ref" not in text
    assert "50.00" in text
    assert csv_text.splitlines()[1].startswith("f_1,0.2,0.1,10.0,5.0,50.0")


def test_render_empty_table():
    text, csv_text = render_table(ComparisonTable())
    assert text.startswith("Signal")
    assert len(csv_text.splitlines()) == 1


def test_render_marks_unsettled():
    table = ComparisonTable.from_values({"f_1": (0.2, 0.1, 10.0, 5.0)})
    row = table.rows[0]
    object.__setattr__(row.base, "settled", False)
    text, _ = render_table(table)
    assert "10.00*" in text
    assert "not settled" in text
