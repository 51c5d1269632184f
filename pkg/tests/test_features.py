import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liplive.features import (EnergyBandFeatures, FeatureError, StftParams, centroid_frequency,
                              energy_band_features, extract_features, fragment_snr,
                              read_features_csv, splice, write_features_csv)
from liplive.segmentation import MotionFragment, segment_characters

RATE = 960.0


def frag(start, n, seed=0, value=None):
    raw = np.random.default_rng(seed).standard_normal((6, n)) if value is None else np.full((6, n), value)
    return MotionFragment(start, start + (n - 1) / RATE, raw[:, :128], 20.0, raw, RATE)


def test_centroid_flat():
    f = np.arange(41.0)
    assert centroid_frequency(f, np.ones(41)) == 20.0


def test_centroid_point_mass():
    f = np.arange(0, 40.5, 0.5)
    e = np.zeros(f.size)
    e[37] = 3.0
    assert centroid_frequency(f, e) == f[37]


def test_centroid_tie_takes_lower():
    f = np.arange(41.0)
    e = np.zeros(41)
    e[5] = e[35] = 1.0
    assert centroid_frequency(f, e) == 5.0


def test_centroid_empty():
    assert np.isnan(centroid_frequency(np.arange(5.0), np.zeros(5)))


def test_fragment_snr_examples(genuine_signal):
    rng = np.random.default_rng(0)
    noise = rng.standard_normal((6, 2000))
    assert fragment_snr(noise, noise) == pytest.approx(0.0, abs=1e-9)
    other = rng.standard_normal((6, 2000))
    assert fragment_snr(other, noise) <= 3.0
    frags = segment_characters(genuine_signal, expected_count=4)
    lead = genuine_signal.channels[:, :150]
    assert all(fragment_snr(f, lead) > 20 for f in frags)


def test_splice_rules():
    a, b = frag(1.0, 288, 1), frag(0.2, 384, 2)
    assert np.array_equal(splice([a]), a.raw)
    s = splice([a, b])
    assert s.shape[1] == 672 and s.shape[1] / RATE == pytest.approx(0.7)
    assert np.array_equal(s, splice([b, a]))
    assert np.array_equal(s[:, :384], b.raw)
    with pytest.raises(FeatureError):
        splice([])


def test_short_splice_rejected():
    with pytest.raises(FeatureError):
        energy_band_features(np.zeros((6, 500)))


@pytest.mark.parametrize("n", [960, 1000, 1200, 1919, 3000])
def test_track_length(n):
    x = np.random.default_rng(n).standard_normal((6, n))
    feats = energy_band_features(x)
    win, hop = 960, 120
    assert feats.n_frames == (n - win) // hop + 1
    assert feats.centroid_track.shape == (feats.n_frames,)
    assert feats.side_tracks.shape == (2, feats.n_frames)
    assert np.all((feats.per_carrier >= 0) & (feats.per_carrier <= RATE / 2))


@settings(max_examples=15, deadline=None)
@given(st.floats(1e-4, 1e4), st.integers(0, 1000))
def test_amplitude_invariance(c, seed):
    x = np.random.default_rng(seed).standard_normal((6, 1500))
    a, b = energy_band_features(x), energy_band_features(c * x)
    assert np.allclose(a.per_carrier, b.per_carrier, atol=1e-9)
    assert np.allclose(a.side_tracks, b.side_tracks, atol=1e-9)


def test_deterministic():
    x = np.random.default_rng(3).standard_normal((6, 1500))
    a, b = energy_band_features(x), energy_band_features(x.copy())
    assert np.array_equal(a.centroid_track, b.centroid_track)
    assert np.array_equal(a.vector(64, "split"), b.vector(64, "split"))


def test_tone_centroid_and_sides():
    t = np.arange(1920) / RATE
    z = np.exp(2j * np.pi * 12 * t)             # all energy at +12 Hz
    x = np.zeros((6, t.size))
    x[0::2], x[1::2] = z.real, z.imag
    f = energy_band_features(x)
    assert np.allclose(f.centroid_track, 12.0, atol=0.25)
    assert np.allclose(f.side_tracks[0], 12.0, atol=0.25)


def test_vector_fusions():
    f = energy_band_features(np.random.default_rng(1).standard_normal((6, 1500)))
    assert f.vector(64).shape == (64,)
    assert f.vector(64, "split").shape == (128,)
    assert f.vector(64, "concat").shape == (192,)
    assert f.vector(32, "all").shape == (96,)
    with pytest.raises(FeatureError):
        f.vector(64, "median")


def test_extract_and_csv(tmp_path, genuine_signal):
    frags = segment_characters(genuine_signal, expected_count=4)
    vec = extract_features(frags) if sum(f.raw.shape[1] for f in frags) >= 960 else None
    rows = [("u1", "genuine", np.arange(64.0) / 3), ("u2", "imposter", np.ones(64))]
    if vec is not None:
        rows.append(("u1", "genuine", vec))
    write_features_csv(tmp_path / "f.csv", rows)
    back = read_features_csv(tmp_path / "f.csv")
    assert [(u, s) for u, s, _ in back] == [(u, s) for u, s, _ in rows]
    assert all(np.array_equal(a[2], b[2]) for a, b in zip(rows, back))


def test_stft_params():
    assert StftParams().hop_s == pytest.approx(0.125)
    with pytest.raises(FeatureError):
        energy_band_features(np.zeros((6, 2000)), StftParams(overlap_s=1.0))
