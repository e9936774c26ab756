"""CSV writers for command output.  Floats are written with ``repr`` so they
read back bit-identically."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .sim import TimeSeries


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def timeseries_header(K: int, N: int) -> list[str]:
    cols = ["frame", "time_s", "beam_index"]
    for k in range(1, K + 1):
        cols += [f"r{k}_w", f"e{k}_j", f"omega{k}_j", f"sigma{k}", f"a{k}", f"alive{k}",
                 f"utility{k}", f"harvested{k}_j", f"consumed{k}_j"]
    for n in range(1, N + 1):
        cols += [f"w{n}_mag", f"w{n}_phase_deg"]
    return cols


def timeseries_rows(ts: TimeSeries):
    K = ts.receive_w.shape[1]
    mags = np.abs(ts.weights)
    phases = np.rad2deg(np.angle(ts.weights))
    for t in range(ts.n_frames):
        row = [t, t * ts.frame_s, int(ts.beam_index[t])]
        for k in range(K):
            row += [ts.receive_w[t, k], ts.stored_j[t, k], ts.deficiency_j[t, k], ts.sigma[t, k],
                    int(ts.activity[t, k]), bool(ts.alive[t, k]), ts.utility[t, k],
                    ts.harvested_j[t, k], ts.consumed_j[t, k]]
        for m, p in zip(mags[t], phases[t]):
            row += [m, p]
        yield row


def write_timeseries(path, ts: TimeSeries) -> Path:
    return write_rows(path, timeseries_header(ts.receive_w.shape[1], ts.weights.shape[1]),
                      timeseries_rows(ts))


def summary_from_csv(path, warmup_frames: int) -> dict:
    """Recompute the headline averages from a time-series CSV."""
    header, rows = read_rows(path)
    data = np.array([[float(x) for x in r] for r in rows[warmup_frames:]])
    if data.size == 0:
        return {"avg_sum_utility": float("nan"), "avg_sum_deficiency_j": float("nan")}
    u = data[:, [i for i, h in enumerate(header) if h.startswith("utility")]]
    d = data[:, [i for i, h in enumerate(header) if h.startswith("omega")]]
    return {"avg_sum_utility": float(u.sum(axis=1).mean()),
            "avg_sum_deficiency_j": float(d.sum(axis=1).mean())}
