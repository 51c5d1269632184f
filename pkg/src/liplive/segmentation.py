"""Two-step character segmentation of a MotionSignal.

A short-time-energy gate finds candidate regions; inside them the spread
between upper and lower envelopes (max over channels) is thresholded at
``t_d``.  Runs above threshold separated by less than ``min_gap_s`` are
joined, runs shorter than ``t_w`` dropped.  Every fragment is cut at the
same sample range on all 2N channels and resampled to 128 points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.signal import argrelextrema

from .interference import MotionSignal

FRAGMENT_LEN = 128


@dataclass(frozen=True)
class SegmentationConfig:
    t_d: float | None = None            # None: 3x leading noise envelope spread
    t_w: float = 0.15
    vad_energy_ratio: float = 12.0      # dB above the adaptive floor
    envelope_interp: str = "linear"     # linear | pchip | cubic
    extrema_order_s: float = 0.008
    hangover_s: float = 0.05
    min_gap_s: float = 0.06
    vad_frame_s: float = 0.02
    vad_hop_s: float = 0.01
    noise_lead_s: float = 0.2
    t_d_noise_factor: float = 3.0
    resample_len: int = FRAGMENT_LEN

    def validate(self) -> None:
        if self.t_w <= 0 or (self.t_d is not None and self.t_d <= 0):
            raise ValueError("t_w and t_d must be positive")
        if self.envelope_interp not in ("linear", "pchip", "cubic"):
            raise ValueError(f"unknown envelope interpolation {self.envelope_interp!r}")


@dataclass
class MotionFragment:
    start_s: float
    end_s: float
    channels: np.ndarray            # (2N, 128)
    snr_db: float = float("nan")
    raw: np.ndarray = field(default=None, repr=False)   # (2N, T) at baseband rate
    baseband_rate_hz: float = 960.0

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


class FragmentList(list):
    """Fragments in time order plus segmentation diagnostics."""

    def __init__(self, fragments=(), expected_count=None, t_d=float("nan")):
        super().__init__(fragments)
        self.expected_count = expected_count
        self.t_d = t_d

    @property
    def count_mismatch(self) -> bool:
        return self.expected_count is not None and len(self) != self.expected_count


def resample_fixed(x: np.ndarray, length: int = FRAGMENT_LEN) -> np.ndarray:
    """Linear resampling of the last axis to ``length`` points, endpoints kept."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n == 1:
        return np.repeat(x, length, axis=-1)
    src = np.linspace(0.0, 1.0, n)
    dst = np.linspace(0.0, 1.0, length)
    flat = x.reshape(-1, n)
    out = np.stack([np.interp(dst, src, row) for row in flat])
    return out.reshape(x.shape[:-1] + (length,))


def _intervals(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open [start, stop) runs of True."""
    if not mask.any():
        return []
    d = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def _merge(runs, max_gap):
    out = []
    for s, e in runs:
        if out and s - out[-1][1] < max_gap:
            out[-1] = (out[-1][0], e)
        else:
            out.append((s, e))
    return out


def coarse_vad(signal: MotionSignal, config: SegmentationConfig = SegmentationConfig()
               ) -> list[tuple[float, float]]:
    """Candidate activity intervals (seconds) from the joint short-time energy."""
    x = signal.channels
    rate = signal.baseband_rate_hz
    if x.shape[1] == 0:
        raise ValueError("empty signal")
    frame = max(1, int(round(config.vad_frame_s * rate)))
    hop = max(1, int(round(config.vad_hop_s * rate)))
    power = (x * x).sum(axis=0)
    n_frames = max(1, 1 + (power.size - frame) // hop)
    c = np.concatenate(([0.0], np.cumsum(power)))
    starts = np.arange(n_frames) * hop
    energy = (c[np.minimum(starts + frame, power.size)] - c[starts]) / frame
    k = max(1, int(np.ceil(0.1 * n_frames)))
    floor = np.median(np.sort(energy)[:k])
    active = energy > floor * 10 ** (config.vad_energy_ratio / 10)
    runs = _merge(_intervals(active), int(np.ceil(config.hangover_s / config.vad_hop_s)))
    t0 = signal.t0_s
    return [(t0 + starts[s] / rate, t0 + min(starts[e - 1] + frame, power.size) / rate)
            for s, e in runs]


def envelope(x: np.ndarray, order: int = 8, interp: str = "linear"
             ) -> tuple[np.ndarray, np.ndarray]:
    """Upper/lower envelopes through local maxima/minima (windowed by ``order``)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        raise ValueError("envelope needs at least 3 samples")
    idx = np.arange(n)

    def through(points):
        if points.size < 2:
            pts = np.unique(np.concatenate(([0], points, [n - 1])))
            return np.interp(idx, pts, x[pts])
        # hold the outermost extrema flat towards the ends
        if interp == "linear" or points.size < 3:
            return np.interp(idx, points, x[points])
        inner = np.clip(idx, points[0], points[-1])
        if interp == "pchip":
            return PchipInterpolator(points, x[points])(inner)
        return CubicSpline(points, x[points])(inner)

    order = max(1, min(order, (n - 1) // 2))
    upper = through(argrelextrema(x, np.greater_equal, order=order, mode="clip")[0])
    lower = through(argrelextrema(x, np.less_equal, order=order, mode="clip")[0])
    return np.maximum(upper, x), np.minimum(lower, x)


def envelope_spread(signal: MotionSignal, config: SegmentationConfig = SegmentationConfig()
                    ) -> np.ndarray:
    order = max(1, int(round(config.extrema_order_s * signal.baseband_rate_hz)))
    spread = np.zeros(signal.n_samples)
    for ch in signal.channels:
        up, lo = envelope(ch, order, config.envelope_interp)
        np.maximum(spread, up - lo, out=spread)
    return spread


def band_power(x: np.ndarray, rate: float, band=(2.0, 40.0)) -> float:
    """Mean per-channel power inside ``band`` (Hz), via the periodogram."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[-1]
    if n == 0:
        return 0.0
    mag = np.abs(np.fft.rfft(x, axis=-1)) ** 2
    f = np.fft.rfftfreq(n, 1.0 / rate)
    sel = (f >= band[0]) & (f <= band[1])
    weight = np.where((f > 0) & (f < rate / 2), 2.0, 1.0)
    return float((mag[:, sel] * weight[sel]).sum(axis=-1).mean() / n ** 2)


def snr_db(signal_power: float, noise_power: float) -> float:
    if signal_power <= 0:
        return float("-inf")
    if noise_power <= 0:
        return float("inf")
    return float(10 * np.log10(signal_power / noise_power))


def noise_reference(signal: MotionSignal, spans, config: SegmentationConfig = SegmentationConfig()
                    ) -> np.ndarray:
    """Samples outside the (padded) sample spans; the leading stretch if too few remain."""
    rate = signal.baseband_rate_hz
    pad = int(round(config.hangover_s * rate))
    quiet = np.ones(signal.n_samples, dtype=bool)
    for s, e in spans:
        quiet[max(0, s - pad):e + pad] = False
    x = signal.channels
    if quiet.sum() >= int(round(0.05 * rate)):
        return x[:, quiet]
    return x[:, : max(3, int(round(config.noise_lead_s * rate)))]


def segment_characters(signal: MotionSignal, config: SegmentationConfig = SegmentationConfig(),
                       expected_count: int | None = None) -> FragmentList:
    config.validate()
    rate = signal.baseband_rate_hz
    x = signal.channels
    spread = envelope_spread(signal, config)

    gate = np.zeros(signal.n_samples, dtype=bool)
    pad = int(round(config.hangover_s * rate))
    for a, b in coarse_vad(signal, config):
        s = max(0, int(np.floor((a - signal.t0_s) * rate)) - pad)
        e = min(signal.n_samples, int(np.ceil((b - signal.t0_s) * rate)) + pad)
        gate[s:e] = True

    t_d = config.t_d
    if t_d is None:
        lead = spread[: max(3, int(round(config.noise_lead_s * rate)))]
        t_d = config.t_d_noise_factor * float(lead.mean())
        if not t_d > 0:
            t_d = np.finfo(float).tiny

    above = (spread > t_d) & gate
    runs = _merge(_intervals(above), int(round(config.min_gap_s * rate)))
    runs = [(s, e) for s, e in runs if (e - 1 - s) / rate >= config.t_w]

    noise_power = band_power(noise_reference(signal, runs, config), rate)
    frags = []
    times = signal.times
    for s, e in runs:
        raw = x[:, s:e]
        frags.append(MotionFragment(float(times[s]), float(times[e - 1]),
                                    resample_fixed(raw, config.resample_len),
                                    snr_db(band_power(raw, rate), noise_power),
                                    raw.copy(), rate))
    return FragmentList(frags, expected_count, t_d)


def write_fragments_csv(path, fragments) -> None:
    """One row per fragment: start_s, end_s, snr_db, then the flattened 2N x 128 samples."""
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if fragments:
            n_ch, n = fragments[0].channels.shape
            w.writerow(["start_s", "end_s", "snr_db"]
                       + [f"ch{c}_{k}" for c in range(n_ch) for k in range(n)])
        for f in fragments:
            w.writerow([repr(f.start_s), repr(f.end_s), repr(f.snr_db)]
                       + [repr(float(v)) for v in f.channels.ravel()])


def read_fragments_csv(path) -> list[MotionFragment]:
    import csv
    out = []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return out
    n_ch = len({h.split("_")[0] for h in rows[0][3:]})
    for row in rows[1:]:
        vals = np.array([float(v) for v in row[3:]])
        out.append(MotionFragment(float(row[0]), float(row[1]), vals.reshape(n_ch, -1),
                                  float(row[2])))
    return out
