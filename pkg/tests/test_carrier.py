import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from liplive.carrier import (AmplitudeError, CarrierError, CarrierSet, count_valid_tuples,
                             draw_carriers, synthesize_probe)


def brute_count(n, lo, hi, gap):
    grid = range(lo, hi + 1)
    return sum(1 for t in itertools.combinations(grid, n)
               if all(b - a >= gap for a, b in zip(t, t[1:])))


def test_full_band_count():
    assert count_valid_tuples(3, (18000, 21000), 300, 1) == comb(2403, 3) == 2_309_764_401


@pytest.mark.parametrize("n,lo,hi,gap", [(3, 0, 40, 7), (2, 0, 30, 10), (3, 100, 130, 5),
                                         (4, 0, 25, 3), (1, 0, 17, 300), (2, 0, 300, 300)])
def test_count_matches_brute_force(n, lo, hi, gap):
    assert count_valid_tuples(n, (lo, hi), gap, 1) == brute_count(n, lo, hi, gap)


def test_trivial_counts():
    assert count_valid_tuples(1, (18000, 21000), 300, 1) == 3001
    assert count_valid_tuples(2, (0, 300), 300, 1) == 1


def test_infeasible_band():
    with pytest.raises(CarrierError):
        count_valid_tuples(3, (0, 500), 300)
    with pytest.raises(CarrierError):
        draw_carriers(0, 4, (18000, 18800), 300)


def test_seed_determinism():
    a, b = draw_carriers(7), draw_carriers(7)
    assert a == b
    a.validate()
    assert draw_carriers(8) != a


def test_single_tone_in_band():
    c = draw_carriers(123, 1)
    assert c.n_tones == 1 and 18000 <= c.frequencies_hz[0] <= 21000


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_draws_satisfy_invariants(seed):
    c = draw_carriers(seed)
    f = c.frequencies_hz
    assert len(f) == c.n_tones == 3
    assert all(18000 <= x <= 21000 for x in f)
    assert all(b - a >= 300 for a, b in zip(f, f[1:]))
    assert c.n_tones * c.amplitude <= 1


def test_many_draws_valid():
    for seed in range(5000):
        draw_carriers(seed).validate()


def test_draws_uniform_on_tiny_band():
    lo, hi, gap = 0, 605, 300
    tuples = [(a, b, c) for a in range(lo, hi + 1) for b in range(a + gap, hi + 1)
              for c in range(b + gap, hi + 1)]
    assert len(tuples) == count_valid_tuples(3, (lo, hi), gap) == 56
    index = {t: i for i, t in enumerate(tuples)}
    obs = np.zeros(len(tuples))
    for s in range(20000):
        obs[index[draw_carriers(s, 3, (lo, hi), gap).frequencies_hz]] += 1
    assert chisquare(obs).pvalue > 0.01


def test_probe_closed_form():
    c = CarrierSet((18200, 19100, 20400))
    p = synthesize_probe(c, 0.05)
    n = np.arange(p.samples.size)
    ref = sum(0.3 * np.cos(2 * np.pi * f * n / 48000) for f in c.frequencies_hz)
    assert p.samples.size == round(0.05 * 48000)
    assert np.max(np.abs(p.samples - ref)) < 1e-12
    assert np.max(np.abs(p.samples)) <= 0.9 + 1e-12


def test_probe_single_tone_spectrum():
    p = synthesize_probe(CarrierSet((20000,), amplitude=1.0), 1.0)
    assert p.samples[0] == pytest.approx(1.0)
    mag = np.abs(np.fft.rfft(p.samples))
    assert mag.argmax() == 20000
    others = np.delete(mag, 20000)
    assert 20 * np.log10(others.max() / mag[20000]) < -100


def test_probe_periodic():
    # 18000 and 20000 Hz both divide 48 kHz into a common period of 24 samples
    p = synthesize_probe(CarrierSet((18000, 20000), amplitude=0.5), 0.01).samples
    assert np.allclose(p[:-24], p[24:], atol=1e-12)


def test_probe_clipping_rejected():
    with pytest.raises(AmplitudeError):
        synthesize_probe(CarrierSet((18000, 18500, 19000, 19500), amplitude=0.3), 0.1)
    with pytest.raises(ValueError):
        synthesize_probe(draw_carriers(0), 0.0)


def test_carrier_roundtrip():
    c = draw_carriers(99)
    assert CarrierSet.from_dict(c.to_dict()) == c
