import wave

import numpy as np

from liplive.audio import Recording, read_wav, to_pcm16, write_wav
from liplive.carrier import draw_carriers, synthesize_probe


def test_wav_format(tmp_path):
    p = tmp_path / "probe.wav"
    write_wav(p, synthesize_probe(draw_carriers(1), 0.2))
    with wave.open(str(p)) as w:
        assert (w.getnchannels(), w.getsampwidth(), w.getframerate()) == (1, 2, 48000)
        assert w.getnframes() == 9600


def test_wav_roundtrip_quantisation(tmp_path, rng):
    x = rng.uniform(-0.9, 0.9, 4800)
    write_wav(tmp_path / "x.wav", Recording(x))
    back = read_wav(tmp_path / "x.wav")
    assert back.sample_rate_hz == 48000
    assert np.max(np.abs(back.samples - x)) <= 0.5 / 32767 + 1e-12


def test_pcm_clips():
    assert list(to_pcm16(np.array([2.0, -2.0, 0.0]))) == [32767, -32768, 0]
