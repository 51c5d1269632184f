"""Recording container and 16-bit PCM WAV I/O (48 kHz mono)."""
from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .carrier import SAMPLE_RATE_HZ, ProbeWaveform


@dataclass
class Recording:
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def to_pcm16(x: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(x) * 32767.0), -32768, 32767).astype("<i2")


def write_wav(path, signal, sample_rate: int | None = None) -> None:
    """Write a Recording, ProbeWaveform or bare array as mono 16-bit PCM."""
    if isinstance(signal, (Recording, ProbeWaveform)):
        sample_rate = sample_rate or signal.sample_rate_hz
        signal = signal.samples
    sample_rate = sample_rate or SAMPLE_RATE_HZ
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(to_pcm16(signal).tobytes())


def read_wav(path) -> Recording:
    with wave.open(str(Path(path)), "rb") as w:
        if w.getsampwidth() != 2:
            raise ValueError(f"{path}: only 16-bit PCM is supported")
        rate = w.getframerate()
        nch = w.getnchannels()
        raw = np.frombuffer(w.readframes(w.getnframes()), dtype="<i2")
    if nch > 1:
        raw = raw.reshape(-1, nch)[:, 0]
    return Recording(raw.astype(np.float64) / 32767.0, rate)
