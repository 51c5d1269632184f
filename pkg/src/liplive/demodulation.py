"""Per-carrier coherent I/Q demodulation.

recording -> band-pass around each carrier -> multiply by cos / -sin of the
carrier -> low-pass (anti-alias at 48 kHz, decimate, then the sharp 40 Hz
low-pass at the baseband rate) -> BasebandFrame.

All filters are odd-length linear-phase FIRs (Kaiser window method) applied
centred, so the group delay is removed and baseband sample k sits at
t = k * downsample_factor / 48000 on the recording clock.  With the sign
convention used here I + jQ = (A/2) exp(-j*phi): a growing path length turns
the baseband phasor clockwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve, firwin, kaiserord

from .audio import Recording
from .carrier import SAMPLE_RATE_HZ, CarrierSet, tone_phase


class DemodConfigError(ValueError):
    pass


class EstimationError(RuntimeError):
    """Phase tracking impossible (signal too weak to unwrap)."""


@dataclass(frozen=True)
class DemodConfig:
    bandpass_halfwidth_hz: float = 150.0
    lowpass_cutoff_hz: float = 40.0
    lowpass_stopband_hz: float = 50.0
    downsample_factor: int = 50
    filter_stopband_db: float = 60.0
    bandpass_transition_hz: float = 200.0
    sample_rate_hz: int = SAMPLE_RATE_HZ
    trim_edges: bool = True

    @property
    def baseband_rate_hz(self) -> float:
        return self.sample_rate_hz / self.downsample_factor

    def validate(self) -> None:
        if self.lowpass_cutoff_hz > self.bandpass_halfwidth_hz:
            raise DemodConfigError("low-pass cutoff must not exceed the band-pass half-width")
        if self.baseband_rate_hz < 2 * self.lowpass_cutoff_hz:
            raise DemodConfigError("baseband rate must be >= 2x the low-pass cutoff")
        if self.lowpass_stopband_hz <= self.lowpass_cutoff_hz:
            raise DemodConfigError("low-pass stopband edge must lie above the cutoff")
        if self.lowpass_stopband_hz >= self.baseband_rate_hz / 2:
            raise DemodConfigError("low-pass stopband edge must lie below baseband Nyquist")


@dataclass
class BasebandFrame:
    carriers: CarrierSet
    i_channels: np.ndarray          # (N, T)
    q_channels: np.ndarray          # (N, T)
    baseband_rate_hz: float
    t0_s: float = 0.0

    @property
    def n_samples(self) -> int:
        return self.i_channels.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0_s + np.arange(self.n_samples) / self.baseband_rate_hz

    @property
    def complex(self) -> np.ndarray:
        return self.i_channels + 1j * self.q_channels


@dataclass
class DisplacementTrack:
    times: np.ndarray
    per_carrier_mm: np.ndarray      # (N, T)
    displacement_mm: np.ndarray = field(default=None)


# ---------------------------------------------------------------------------
# filter design


@lru_cache(maxsize=64)
def _kaiser_taps(cutoffs: tuple, width_hz: float, fs: float, atten_db: float,
                 pass_zero) -> np.ndarray:
    numtaps, beta = kaiserord(atten_db, width_hz / (fs / 2))
    numtaps |= 1
    taps = firwin(numtaps, list(cutoffs) if len(cutoffs) > 1 else cutoffs[0],
                  window=("kaiser", beta), pass_zero=pass_zero, fs=fs)
    taps.setflags(write=False)
    return taps


def bandpass_taps(center_hz: float, config: DemodConfig) -> np.ndarray:
    h = config.bandpass_halfwidth_hz
    return _kaiser_taps((center_hz - h, center_hz + h), config.bandpass_transition_hz,
                        config.sample_rate_hz, config.filter_stopband_db, False)


def antialias_taps(config: DemodConfig) -> np.ndarray:
    """Full-rate low-pass ahead of decimation; protects [0, stopband] from aliasing."""
    fs2 = config.baseband_rate_hz
    pass_edge = config.lowpass_stopband_hz
    stop_edge = fs2 - config.lowpass_stopband_hz
    return _kaiser_taps(((pass_edge + stop_edge) / 2,), stop_edge - pass_edge,
                        config.sample_rate_hz, config.filter_stopband_db, True)


def lowpass_taps(config: DemodConfig) -> np.ndarray:
    """Baseband low-pass: flat to the cutoff, stopband from ``lowpass_stopband_hz``."""
    lo, hi = config.lowpass_cutoff_hz, config.lowpass_stopband_hz
    return _kaiser_taps(((lo + hi) / 2,), hi - lo, config.baseband_rate_hz,
                        config.filter_stopband_db, True)


def filter_centered(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Zero-phase FIR filtering along the last axis with odd reflective padding."""
    x = np.asarray(x)
    pad = taps.size // 2
    n = x.shape[-1]
    if n == 0:
        return x.copy()
    if n > pad:
        widths = [(0, 0)] * (x.ndim - 1) + [(pad, pad)]
        xp = np.pad(x, widths, mode="reflect", reflect_type="odd")
    else:
        widths = [(0, 0)] * (x.ndim - 1) + [(pad, pad)]
        xp = np.pad(x, widths, mode="edge")
    shape = [1] * (x.ndim - 1) + [taps.size]
    return fftconvolve(xp, taps.reshape(shape), mode="valid", axes=-1)


# ---------------------------------------------------------------------------
# operations


def _check(carriers: CarrierSet, config: DemodConfig) -> None:
    config.validate()
    f = sorted(carriers.frequencies_hz)
    if any(b - a < 2 * config.bandpass_halfwidth_hz for a, b in zip(f, f[1:])):
        raise DemodConfigError("carriers closer than twice the band-pass half-width")


def bandpass_split(recording: Recording | np.ndarray, carriers: CarrierSet,
                   config: DemodConfig = DemodConfig()) -> np.ndarray:
    """Return an (N, len) array, row i holding the band around carrier i."""
    _check(carriers, config)
    x = recording.samples if isinstance(recording, Recording) else np.asarray(recording, float)
    return np.stack([filter_centered(x, bandpass_taps(f, config))
                     for f in carriers.frequencies_hz])


def coherent_detect(channel: np.ndarray, carrier_hz: float,
                    config: DemodConfig = DemodConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Mix one band down with cos / -sin, low-pass and decimate."""
    config.validate()
    n = np.arange(channel.size)
    ph = tone_phase(carrier_hz, n, config.sample_rate_hz)
    mixed = channel * np.exp(-1j * ph)          # = x*cos + j*x*(-sin)
    z = filter_centered(mixed, antialias_taps(config))[::config.downsample_factor]
    z = filter_centered(z, lowpass_taps(config))
    return z.real.copy(), z.imag.copy()


def edge_guard_samples(carriers: CarrierSet, config: DemodConfig) -> int:
    """Baseband samples at each end touched by start-up transients of the filter chain."""
    full_rate = max(bandpass_taps(f, config).size for f in carriers.frequencies_hz) // 2
    full_rate += antialias_taps(config).size // 2
    return int(np.ceil(full_rate / config.downsample_factor)) + lowpass_taps(config).size // 2


def demodulate(recording: Recording | np.ndarray, carriers: CarrierSet,
               config: DemodConfig = DemodConfig()) -> BasebandFrame:
    """Band-pass, coherently detect and low-pass every carrier.

    With ``config.trim_edges`` the baseband samples within one filter-chain
    support of either end are dropped; ``t0_s`` records the offset.
    """
    bands = bandpass_split(recording, carriers, config)
    iq = [coherent_detect(b, f, config) for b, f in zip(bands, carriers.frequencies_hz)]
    i_ch = np.stack([c[0] for c in iq])
    q_ch = np.stack([c[1] for c in iq])
    t0 = 0.0
    if config.trim_edges:
        g = edge_guard_samples(carriers, config)
        if i_ch.shape[1] <= 2 * g + 1:
            raise DemodConfigError("recording too short for the filter chain")
        i_ch, q_ch = i_ch[:, g:-g], q_ch[:, g:-g]
        t0 = g / config.baseband_rate_hz
    return BasebandFrame(carriers, i_ch, q_ch, config.baseband_rate_hz, t0)


def _fit_circle(z: np.ndarray) -> complex:
    """Algebraic (Kasa) least-squares circle centre of points in the I/Q plane."""
    x, y = z.real, z.imag
    a = np.column_stack([x, y, np.ones_like(x)])
    b = x ** 2 + y ** 2
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    return complex(sol[0] / 2, sol[1] / 2)


def estimate_displacement(frame: BasebandFrame, sound_speed: float = 343.0,
                          remove_static: str = "none", min_snr_db: float = 20.0
                          ) -> DisplacementTrack:
    """Track one-way reflector displacement (mm) from the unwrapped I/Q phase.

    ``remove_static="circle"`` subtracts a fitted circle centre per carrier
    first; use it when static paths are still present in the frame.
    """
    z = frame.complex
    tracks = []
    for k, f in enumerate(frame.carriers.frequencies_hz):
        zk = z[k]
        if remove_static == "circle":
            zk = zk - _fit_circle(zk)
        elif remove_static != "none":
            raise ValueError(f"unknown static removal {remove_static!r}")
        mag = np.abs(zk)
        # a single reflector keeps |I + jQ| constant; noise makes it scatter
        med = np.median(mag)
        spread = 1.4826 * np.median(np.abs(mag - med)) + 1e-12 * (med + 1e-300)
        snr_db = 20 * np.log10(med / spread + 1e-300)
        if snr_db < min_snr_db or mag.min() == 0:
            raise EstimationError(f"carrier {f} Hz: SNR {snr_db:.1f} dB too low to unwrap")
        phase = -np.unwrap(np.angle(zk))             # phi = 2*pi*f*d/v + theta
        dd = sound_speed * (phase - phase[0]) / (2 * np.pi * f)
        tracks.append(dd / 2 * 1e3)
    per = np.stack(tracks)
    return DisplacementTrack(frame.times, per, per.mean(axis=0))
