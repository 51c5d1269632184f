"""Consistency features: spliced-fragment spectrogram and centroid tracks.

Each carrier's complex motion signal I_g + jQ_g is transformed with a 1 s
Hann STFT hopping 125 ms.  Positive and negative Doppler bins are folded onto
|f| (motion toward and away from the phone both count as speed), the
spectrogram is min-max normalised over all its cells, cells outside
[0.03, 0.99] are dropped, and each frame's centroid is the lowest frequency
where the cumulative kept energy reaches half of the frame total.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import get_window

from .segmentation import MotionFragment, band_power, resample_fixed, snr_db

TRACK_LEN = 64


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class StftParams:
    window_s: float = 1.0
    overlap_s: float = 0.875
    window: str = "hann"
    zero_pad: int = 8           # FFT length = zero_pad x window, finer centroid grid

    @property
    def hop_s(self) -> float:
        return self.window_s - self.overlap_s


@dataclass
class EnergyBandFeatures:
    centroid_track: np.ndarray                  # Hz per STFT frame (fused)
    per_carrier: np.ndarray                     # (N, frames)
    stft_params: StftParams = field(default_factory=StftParams)
    energy_clip: tuple = (0.03, 0.99)
    baseband_rate_hz: float = 960.0
    side_tracks: np.ndarray = None              # (2, frames): +f and -f halves, carrier mean

    @property
    def n_frames(self) -> int:
        return self.per_carrier.shape[1]

    def vector(self, length: int = TRACK_LEN, fusion: str = "mean") -> np.ndarray:
        """Length-normalised track used by the consistency classifier."""
        if fusion == "mean":
            return _stretch(self.centroid_track, length)
        if fusion == "concat":
            return np.concatenate([_stretch(t, length) for t in self.per_carrier])
        if fusion == "split":
            return np.concatenate([_stretch(t, length) for t in self.side_tracks])
        if fusion == "all":
            return np.concatenate([_stretch(t, length)
                                   for t in (self.centroid_track, *self.side_tracks)])
        raise FeatureError(f"unknown fusion {fusion!r}")


def _stretch(track: np.ndarray, length: int) -> np.ndarray:
    track = np.asarray(track, dtype=float)
    return resample_fixed(track, length)


def fragment_snr(fragment: MotionFragment | np.ndarray, noise_ref: np.ndarray,
                 baseband_rate_hz: float = 960.0) -> float:
    """SNR (dB) of a fragment against motionless samples, both in the 2-40 Hz band."""
    if isinstance(fragment, MotionFragment):
        x = fragment.raw if fragment.raw is not None else fragment.channels
        baseband_rate_hz = fragment.baseband_rate_hz
    else:
        x = fragment
    return snr_db(band_power(x, baseband_rate_hz), band_power(noise_ref, baseband_rate_hz))


def splice(fragments) -> np.ndarray:
    """Concatenate raw fragments in start-time order -> (2N, total samples)."""
    if not fragments:
        raise FeatureError("nothing to splice")
    ordered = sorted(fragments, key=lambda f: f.start_s)
    return np.concatenate([f.raw if f.raw is not None else f.channels for f in ordered], axis=1)


def centroid_frequency(freqs: np.ndarray, energy: np.ndarray) -> float:
    """Lowest frequency where cumulative energy reaches half the total.

    ``freqs`` must be ascending.  Exact half counts as reached, so two equal
    masses yield the lower one.  Zero total energy gives nan.
    """
    energy = np.asarray(energy, dtype=float)
    total = energy.sum()
    if not total > 0:
        return float("nan")
    c = np.cumsum(energy)
    k = int(np.searchsorted(c, 0.5 * total * (1 - 1e-12), side="left"))
    return float(freqs[min(k, len(freqs) - 1)])


def side_spectrograms(z: np.ndarray, rate: float, params: StftParams = StftParams()
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """|STFT|^2 of a complex series split at DC.

    Returns (freqs, positive, negative), both (frames, bins) over |f| = freqs;
    DC sits in both halves with half its energy each, Nyquist in the positive one.
    """
    win = int(round(params.window_s * rate))
    hop = int(round(params.hop_s * rate))
    if hop <= 0:
        raise FeatureError("overlap must be shorter than the window")
    if z.size < win:
        raise FeatureError(f"spliced signal ({z.size} samples) shorter than one window ({win})")
    nfft = win * max(1, int(params.zero_pad))
    frames = np.lib.stride_tricks.sliding_window_view(z, win)[::hop]
    mag = np.abs(np.fft.fft(frames * get_window(params.window, win), n=nfft, axis=-1)) ** 2
    half = nfft // 2
    pos = mag[:, : half + 1].copy()
    neg = np.zeros_like(pos)
    neg[:, 1: nfft - half] = mag[:, :: -1][:, : nfft - half - 1]   # -1, -2, ... -> 1, 2, ...
    pos[:, 0] *= 0.5
    neg[:, 0] = pos[:, 0]
    return np.arange(half + 1) * rate / nfft, pos, neg


def folded_spectrogram(z: np.ndarray, rate: float, params: StftParams = StftParams()
                       ) -> tuple[np.ndarray, np.ndarray]:
    """|STFT|^2 with +f and -f added together; returns (freqs, (frames, bins))."""
    freqs, pos, neg = side_spectrograms(z, rate, params)
    return freqs, pos + neg


def _normalise(p, energy_clip):
    lo, hi = p.min(), p.max()
    norm = (p - lo) / (hi - lo) if hi > lo else np.zeros_like(p)
    keep = (norm >= energy_clip[0]) & (norm <= energy_clip[1])
    return norm, np.where(keep, norm, 0.0)


def _track(freqs, norm, kept):
    track = np.empty(norm.shape[0])
    for t in range(norm.shape[0]):
        c = centroid_frequency(freqs, kept[t])
        if np.isnan(c):                         # every cell clipped: use the unclipped frame
            c = centroid_frequency(freqs, norm[t])
        track[t] = 0.0 if np.isnan(c) else c
    return track


def carrier_track(z: np.ndarray, rate: float, params: StftParams = StftParams(),
                  energy_clip=(0.03, 0.99)) -> np.ndarray:
    """Centroid per frame of the folded, normalised, clipped spectrogram."""
    freqs, p = folded_spectrogram(z, rate, params)
    return _track(freqs, *_normalise(p, energy_clip))


def carrier_side_tracks(z: np.ndarray, rate: float, params: StftParams = StftParams(),
                        energy_clip=(0.03, 0.99)) -> np.ndarray:
    """(2, frames): centroids of the positive- and negative-Doppler halves.

    Both halves share one min-max normalisation so their levels stay comparable.
    """
    freqs, pos, neg = side_spectrograms(z, rate, params)
    norm, kept = _normalise(np.stack([pos, neg]), energy_clip)
    return np.stack([_track(freqs, norm[k], kept[k]) for k in range(2)])


def energy_band_features(spliced: np.ndarray, params: StftParams = StftParams(),
                         energy_clip=(0.03, 0.99), baseband_rate_hz: float = 960.0
                         ) -> EnergyBandFeatures:
    """Centroid tracks of a spliced (2N, T) signal ordered I_1, Q_1, I_2, Q_2, ..."""
    spliced = np.asarray(spliced, dtype=float)
    if spliced.ndim != 2 or spliced.shape[0] % 2:
        raise FeatureError("expected a (2N, T) array")
    z = spliced[0::2] + 1j * spliced[1::2]
    per = np.stack([carrier_track(zc, baseband_rate_hz, params, energy_clip) for zc in z])
    sides = np.stack([carrier_side_tracks(zc, baseband_rate_hz, params, energy_clip)
                      for zc in z])
    return EnergyBandFeatures(per.mean(axis=0), per, params, tuple(energy_clip),
                              baseband_rate_hz, sides.mean(axis=0))


def extract_features(fragments, params: StftParams = StftParams(), energy_clip=(0.03, 0.99),
                     length: int = TRACK_LEN, fusion: str = "mean") -> np.ndarray:
    """Fragments -> the fixed-length classifier vector."""
    rate = fragments[0].baseband_rate_hz if fragments else 960.0
    return energy_band_features(splice(fragments), params, energy_clip, rate).vector(length, fusion)


def write_features_csv(path, rows) -> None:
    """``rows``: iterable of (user_id, scenario, vector)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        rows = list(rows)
        n = len(rows[0][2]) if rows else TRACK_LEN
        w.writerow(["user_id", "scenario"] + [f"c{k}" for k in range(n)])
        for user, scen, vec in rows:
            w.writerow([user, scen] + [repr(float(v)) for v in vec])


def read_features_csv(path) -> list[tuple[str, str, np.ndarray]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r, None)
        return [(row[0], row[1], np.array([float(v) for v in row[2:]])) for row in r]
