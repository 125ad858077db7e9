"""Trajectory CSV export and comparison-table rendering."""

import csv
import io
from pathlib import Path

from .metrics import signal_label

__all__ = ["emit_csv", "trajectory_csv", "render_table", "REFERENCE_TWO_AREA"]

# Published two-area small-load-step figures (FD vs SDF), printed next to
# our own numbers for orientation only: peak_fd, peak_sdf, t_fd, t_sdf, improvement %.
REFERENCE_TWO_AREA = {
    "delta_1": (0.0043, 0.0026, 48.06, 23.53, 51.04),
    "delta_2": (0.0047, 0.0023, 47.76, 18.76, 60.72),
    "f_1": (0.1093, 0.0840, 39.04, 24.27, 37.83),
    "f_2": (0.0983, 0.0561, 39.69, 24.70, 37.77),
    "f_21": (0.1011, 0.0929, 30.15, 25.02, 17.02),
}


def _header(traj):
    n = traj.n_areas
    cols = ["t_s"]
    cols += [f"delta_{i + 1}_rad" for i in range(n)]
    cols += [f"f_{i + 1}_hz" for i in range(n)]
    cols += [f"u_{i + 1}_pu" for i in range(n)]
    cols += [f"dp_{i + 1}_pu" for i in range(n)]
    return cols


def trajectory_csv(traj, decimation=10, fingerprint=None):
    """CSV text for ``traj``; ``#`` lines carry the run fingerprint."""
    if decimation < 1:
        raise ValueError("decimation must be >= 1")
    buf = io.StringIO()
    meta = dict(traj.meta)
    if fingerprint is not None:
        meta["config_sha256"] = fingerprint
    for key in sorted(meta):
        buf.write(f"# {key}={meta[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_header(traj))
    freq = traj.frequencies_hz
    for k in range(0, len(traj.times), decimation):
        row = [traj.times[k], *traj.angles[k], *freq[k], *traj.controls[k], *traj.dp[k]]
        writer.writerow([_num(v) for v in row])
    return buf.getvalue()


def emit_csv(traj, path, decimation=10, fingerprint=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(trajectory_csv(traj, decimation, fingerprint))
    return path


def _num(value):
    return repr(float(value))


def _fmt(value, digits):
    return f"{value:.{digits}f}"


def render_table(cmp, reference=None):
    """Render a comparison as ``(text, csv_text)``.

    ``reference`` maps signal ids to published
    ``(peak_base, peak_test, t_base, t_test, improvement)`` tuples; matching
    rows get those values appended for side-by-side reading.
    """
    b, t = cmp.base_name, cmp.test_name
    head = ["Signal", f"Peak({b})", f"Peak({t})", f"T({b})", f"T({t})", "Improvement %"]
    ref_head = [f"Ref Peak({b})", f"Ref Peak({t})", f"Ref T({b})", f"Ref T({t})", "Ref Improvement %"]
    with_ref = reference is not None and any(r.signal in reference for r in cmp.rows)
    if with_ref:
        head += ref_head
    body = []
    for row in cmp.rows:
        cells = [
            signal_label(row.signal),
            _fmt(row.base.peak_deviation, 4),
            _fmt(row.test.peak_deviation, 4),
            _fmt(row.base.transient_time, 2) + ("" if row.base.settled else "*"),
            _fmt(row.test.transient_time, 2) + ("" if row.test.settled else "*"),
            _fmt(row.improvement, 2),
        ]
        if with_ref:
            ref = reference.get(row.signal)
            if ref is None:
                cells += [""] * 5
            else:
                cells += [_fmt(ref[0], 4), _fmt(ref[1], 4), _fmt(ref[2], 2), _fmt(ref[3], 2), _fmt(ref[4], 2)]
        body.append(cells)
    widths = [max(len(head[c]), *(len(r[c]) for r in body)) if body else len(head[c])
              for c in range(len(head))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for cells in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
    if any(not (r.base.settled and r.test.settled) for r in cmp.rows):
        lines.append("* not settled within the horizon")
    text = "\n".join(lines) + "\n"

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["signal", "peak_base", "peak_test", "t_base_s", "t_test_s", "improvement_pct"]
                    + (["ref_peak_base", "ref_peak_test", "ref_t_base_s", "ref_t_test_s", "ref_improvement_pct"]
                       if with_ref else []))
    for row in cmp.rows:
        out = [row.signal] + [_num(v) for v in (
            row.base.peak_deviation, row.test.peak_deviation,
            row.base.transient_time, row.test.transient_time, row.improvement)]
        if with_ref:
            ref = reference.get(row.signal)
            out += [_num(v) for v in ref] if ref else [""] * 5
        writer.writerow(out)
    return text, buf.getvalue()
