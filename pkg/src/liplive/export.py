"""CSV dumps of baseband frames and motion signals.

Layout: a ``#`` comment row carrying the carriers and the baseband rate, then
a header ``t, I_1..I_N, Q_1..Q_N`` (``ig_``/``qg_`` for motion signals), then
one row per sample.
"""
from __future__ import annotations

import csv

import numpy as np

from .carrier import CarrierSet
from .demodulation import BasebandFrame
from .interference import MotionSignal


def _write(path, carriers: CarrierSet, rate, t, a, b, names) -> None:
    n = a.shape[0]
    with open(path, "w", newline="") as fh:
        fh.write(f"# carriers_hz={';'.join(map(str, carriers.frequencies_hz))} "
                 f"amplitude={carriers.amplitude!r} baseband_rate_hz={rate!r}\n")
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{names[0]}_{k + 1}" for k in range(n)]
                   + [f"{names[1]}_{k + 1}" for k in range(n)])
        for j in range(a.shape[1]):
            w.writerow([repr(float(t[j]))] + [repr(float(v)) for v in a[:, j]]
                       + [repr(float(v)) for v in b[:, j]])


def _read(path):
    with open(path, newline="") as fh:
        meta = dict(kv.split("=", 1) for kv in fh.readline().lstrip("# ").split())
        rows = list(csv.reader(fh))
    data = np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    n = (data.shape[1] - 1) // 2
    carriers = CarrierSet(tuple(int(f) for f in meta["carriers_hz"].split(";")),
                          float(meta["amplitude"]))
    t0 = float(data[0, 0]) if len(data) else 0.0
    return carriers, float(meta["baseband_rate_hz"]), t0, data[:, 1:1 + n].T, data[:, 1 + n:].T


def write_baseband_csv(path, frame: BasebandFrame) -> None:
    _write(path, frame.carriers, frame.baseband_rate_hz, frame.times,
           frame.i_channels, frame.q_channels, ("I", "Q"))


def read_baseband_csv(path) -> BasebandFrame:
    c, rate, t0, i, q = _read(path)
    return BasebandFrame(c, np.ascontiguousarray(i), np.ascontiguousarray(q), rate, t0)


def write_motion_csv(path, signal: MotionSignal) -> None:
    _write(path, signal.source_carriers, signal.baseband_rate_hz, signal.times,
           signal.ig_channels, signal.qg_channels, ("ig", "qg"))


def read_motion_csv(path) -> MotionSignal:
    c, rate, t0, i, q = _read(path)
    return MotionSignal(np.ascontiguousarray(i), np.ascontiguousarray(q), rate, c, t0)
