"""Randomized multi-tone probe generation.

A challenge is a sorted tuple of integer-grid tone frequencies inside the
near-ultrasound band with a minimum pairwise spacing.  Sampling is uniform over
the full set of valid tuples: a rank is drawn in ``[0, count)`` and unranked
into a combination, so a seed maps to exactly one challenge.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from math import comb, ceil

import numpy as np

SAMPLE_RATE_HZ = 48000
DEFAULT_BAND_HZ = (18000, 21000)
DEFAULT_MIN_GAP_HZ = 300
DEFAULT_N_TONES = 3
DEFAULT_AMPLITUDE = 0.3


class CarrierError(ValueError):
    """Infeasible band/gap combination or an invalid carrier set."""


class AmplitudeError(ValueError):
    """Superposed probe would clip full scale."""


@dataclass(frozen=True)
class CarrierSet:
    frequencies_hz: tuple[int, ...]
    amplitude: float = DEFAULT_AMPLITUDE
    rng_seed: int | None = None
    band_hz: tuple[int, int] = DEFAULT_BAND_HZ
    min_gap_hz: int = DEFAULT_MIN_GAP_HZ

    @property
    def n_tones(self) -> int:
        return len(self.frequencies_hz)

    def validate(self) -> None:
        lo, hi = self.band_hz
        f = self.frequencies_hz
        if not f:
            raise CarrierError("empty carrier set")
        if any(x < lo or x > hi for x in f):
            raise CarrierError(f"frequencies {f} leave band [{lo}, {hi}]")
        if any(b - a < self.min_gap_hz for a, b in zip(f, f[1:])) or list(f) != sorted(f):
            raise CarrierError(f"frequencies {f} violate {self.min_gap_hz} Hz spacing")
        if self.n_tones * self.amplitude > 1.0 + 1e-12:
            raise AmplitudeError(
                f"{self.n_tones} tones x {self.amplitude} exceeds full scale")

    def to_dict(self) -> dict:
        return {
            "frequencies_hz": list(self.frequencies_hz),
            "amplitude": self.amplitude,
            "n_tones": self.n_tones,
            "rng_seed": self.rng_seed,
            "band_hz": list(self.band_hz),
            "min_gap_hz": self.min_gap_hz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CarrierSet":
        return cls(
            frequencies_hz=tuple(int(x) for x in d["frequencies_hz"]),
            amplitude=float(d.get("amplitude", DEFAULT_AMPLITUDE)),
            rng_seed=d.get("rng_seed"),
            band_hz=tuple(d.get("band_hz", DEFAULT_BAND_HZ)),
            min_gap_hz=int(d.get("min_gap_hz", DEFAULT_MIN_GAP_HZ)),
        )


@dataclass
class ProbeWaveform:
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ
    duration_s: float = field(default=0.0)


def _grid_params(n_tones, band, min_gap, grid):
    if n_tones < 1:
        raise CarrierError("n_tones must be >= 1")
    if grid <= 0:
        raise CarrierError("grid must be positive")
    lo, hi = band
    if hi < lo:
        raise CarrierError(f"empty band [{lo}, {hi}]")
    span = int((hi - lo) // grid)        # grid positions are 0..span
    gap = int(ceil(min_gap / grid)) if n_tones > 1 else 0
    if (n_tones - 1) * gap > span:
        raise CarrierError(
            f"{n_tones} tones with {min_gap} Hz spacing do not fit in [{lo}, {hi}]")
    # shifting the j-th sorted position down by (gap - 1) * j turns the
    # spacing constraint into plain strict ordering on [0, free_span]
    shrink = max(gap - 1, 0)
    free_span = span - shrink * (n_tones - 1)
    return span, gap, shrink, free_span


def count_valid_tuples(n_tones: int, band=DEFAULT_BAND_HZ,
                       min_gap: float = DEFAULT_MIN_GAP_HZ, grid: float = 1) -> int:
    """Exact number of sorted grid tuples in ``band`` with spacing >= ``min_gap``."""
    _, _, _, free_span = _grid_params(n_tones, band, min_gap, grid)
    return comb(free_span + 1, n_tones)


def _unrank_combination(rank: int, n: int, k: int) -> list[int]:
    """Lexicographic unranking of k-subsets of range(n)."""
    out = []
    x = 0
    for i in range(k, 0, -1):
        while True:
            c = comb(n - x - 1, i - 1)
            if rank < c:
                break
            rank -= c
            x += 1
        out.append(x)
        x += 1
    return out


def draw_carriers(seed: int, n_tones: int = DEFAULT_N_TONES, band=DEFAULT_BAND_HZ,
                  min_gap: float = DEFAULT_MIN_GAP_HZ, grid: float = 1,
                  amplitude: float = DEFAULT_AMPLITUDE) -> CarrierSet:
    """Draw a challenge uniformly from all valid tuples; deterministic in ``seed``."""
    _, _, shrink, free_span = _grid_params(n_tones, band, min_gap, grid)
    total = comb(free_span + 1, n_tones)
    rank = random.Random(seed).randrange(total)
    positions = _unrank_combination(rank, free_span + 1, n_tones)
    lo = band[0]
    freqs = tuple(int(round(lo + (p + shrink * j) * grid))
                  for j, p in enumerate(positions))
    cs = CarrierSet(freqs, amplitude=amplitude, rng_seed=seed,
                    band_hz=(int(band[0]), int(band[1])), min_gap_hz=int(min_gap))
    cs.validate()
    return cs


def tone_phase(freq_hz: float, n: np.ndarray, sample_rate: int = SAMPLE_RATE_HZ) -> np.ndarray:
    """2*pi*f*n/fs reduced modulo 2*pi, exact for integer frequencies."""
    if float(freq_hz).is_integer():
        cycles = (np.int64(int(freq_hz)) * n.astype(np.int64)) % sample_rate
        return 2.0 * np.pi * cycles / sample_rate
    return 2.0 * np.pi * np.mod(freq_hz * n / sample_rate, 1.0)


def synthesize_probe(carriers: CarrierSet, duration_s: float,
                     sample_rate: int = SAMPLE_RATE_HZ) -> ProbeWaveform:
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    if carriers.n_tones * carriers.amplitude > 1.0 + 1e-12:
        raise AmplitudeError(
            f"{carriers.n_tones} tones x {carriers.amplitude} exceeds full scale")
    n = np.arange(int(round(duration_s * sample_rate)))
    x = np.zeros(n.size)
    for f in carriers.frequencies_hz:
        x += carriers.amplitude * np.cos(tone_phase(f, n, sample_rate))
    return ProbeWaveform(x, sample_rate, duration_s)
