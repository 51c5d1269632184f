"""Static interference elimination.

The constant I/Q offsets of the static paths vanish under differentiation;
the slowly varying remainder is removed by a sliding-window least-squares
line fit.  The line fit is iteratively reweighted: stretches whose local residual RMS is
far above the quiet level are dropped from the trend estimate, so a lip burst
does not leak its own trend into the neighbouring silence.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import uniform_filter1d

from . import _kernels
from .carrier import CarrierSet
from .demodulation import BasebandFrame


class DetrendConfigError(ValueError):
    pass


@dataclass
class MotionSignal:
    ig_channels: np.ndarray         # (N, T)
    qg_channels: np.ndarray         # (N, T)
    baseband_rate_hz: float
    source_carriers: CarrierSet
    t0_s: float = 0.0

    @property
    def n_samples(self) -> int:
        return self.ig_channels.shape[1]

    @property
    def n_carriers(self) -> int:
        return self.ig_channels.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0_s + np.arange(self.n_samples) / self.baseband_rate_hz

    @property
    def channels(self) -> np.ndarray:
        """(2N, T) stack ordered I_1, Q_1, I_2, Q_2, ..."""
        n, t = self.ig_channels.shape
        out = np.empty((2 * n, t))
        out[0::2] = self.ig_channels
        out[1::2] = self.qg_channels
        return out

    @property
    def complex(self) -> np.ndarray:
        return self.ig_channels + 1j * self.qg_channels

    def delayed(self, dt_s: float) -> "MotionSignal":
        return replace(self, t0_s=self.t0_s + dt_s)


def gradient(frame: BasebandFrame) -> MotionSignal:
    """Backward first difference scaled by the baseband rate."""
    if frame.n_samples < 2:
        raise ValueError("frame needs at least two samples")
    r = frame.baseband_rate_hz
    return MotionSignal(np.diff(frame.i_channels, axis=1) * r,
                        np.diff(frame.q_channels, axis=1) * r,
                        r, frame.carriers, frame.t0_s + 1.0 / r)


def detrend_channel(x: np.ndarray, half: int, reject: float = 3.0, iterations: int = 10,
                    smooth: int = 31, quiet_quantile: float = 0.2) -> np.ndarray:
    """Reweighted sliding line fit of one channel, returned as the residual.

    Samples whose local residual RMS (``smooth`` samples) exceeds ``reject``
    times the quiet level are left out of the next fit.  The quiet level is a
    low quantile of the local RMS, so it stays on the motionless stretches.
    """
    w = np.ones_like(x)
    trend = _kernels.local_linear_fit(x, w, half)
    floor = 1e-9 * (np.sqrt(np.mean(x * x)) + 1e-300)
    for _ in range(iterations):
        r = x - trend
        local_rms = np.sqrt(np.maximum(uniform_filter1d(r * r, smooth, mode="nearest"), 0.0))
        quiet = np.quantile(local_rms, quiet_quantile)
        if not quiet > floor:           # residual already at rounding level
            break
        w_new = (local_rms <= reject * quiet).astype(np.float64)
        if np.array_equal(w_new, w):
            break
        w = w_new
        trend = _kernels.local_linear_fit(x, w, half)
    r = x - trend
    return r - r.mean()


def mmse_detrend(signal: MotionSignal, window_s: float = 0.5, reject: float = 3.0,
                 iterations: int = 10, smooth_s: float = 0.032) -> MotionSignal:
    """Remove the sliding least-squares linear trend of every channel."""
    if window_s <= 0:
        raise DetrendConfigError("window_s must be positive")
    duration = signal.n_samples / signal.baseband_rate_hz
    if window_s >= duration:
        raise DetrendConfigError(
            f"window {window_s} s is not shorter than the {duration:.3f} s signal")
    half = max(1, int(round(window_s * signal.baseband_rate_hz / 2)))
    smooth = max(1, int(round(smooth_s * signal.baseband_rate_hz)) | 1)
    kw = dict(reject=reject, iterations=iterations, smooth=smooth)
    ig = np.stack([detrend_channel(c, half, **kw) for c in signal.ig_channels])
    qg = np.stack([detrend_channel(c, half, **kw) for c in signal.qg_channels])
    return replace(signal, ig_channels=ig, qg_channels=qg)


def eliminate_static(frame: BasebandFrame, window_s: float = 0.5) -> MotionSignal:
    return mmse_detrend(gradient(frame), window_s)
