"""Synthetic training material: lip / non-lip fragments and background feature vectors."""
from __future__ import annotations

import numpy as np

from ..carrier import draw_carriers
from ..segmentation import MotionFragment, resample_fixed
from ..simulator import (background_speakers, make_attack_scene, make_genuine_scene,
                         random_speaker, simulate)
from .pipeline import PipelineConfig, consistency_vector, gated_fragments, motion_signal


def lip_fragments(n: int, seed: int, config: PipelineConfig = PipelineConfig()
                  ) -> list[MotionFragment]:
    """At least ``n`` SNR-gated fragments from genuine scenes of random speakers."""
    rng = np.random.default_rng([seed, 0x1F])
    out: list[MotionFragment] = []
    k = 0
    while len(out) < n:
        sp = random_speaker(rng)
        scene = make_genuine_scene(int(rng.integers(2, 7)), sp, seed=int(rng.integers(2**31)),
                                   body_clutter=bool(rng.random() < 0.5),
                                   noise_floor_db=float(rng.uniform(-85, -70)))
        _, sig = motion_signal(simulate(scene), scene.carriers, config)
        out += gated_fragments(sig, config)[1]
        k += 1
    return out[:n]


def noise_fragments(n: int, seed: int, config: PipelineConfig = PipelineConfig(),
                    per_scene: int = 6) -> list[MotionFragment]:
    """Random fragment-sized windows of motionless (visual-only) scenes."""
    rng = np.random.default_rng([seed, 0x2F])
    out: list[MotionFragment] = []
    while len(out) < n:
        scene = make_attack_scene("visual", seed=int(rng.integers(2**31)),
                                  noise_floor_db=float(rng.uniform(-85, -70)))
        _, sig = motion_signal(simulate(scene), scene.carriers, config)
        x = sig.channels
        rate = sig.baseband_rate_hz
        for _ in range(per_scene):
            length = int(rng.uniform(0.2, 0.45) * rate)
            s = int(rng.integers(0, x.shape[1] - length))
            raw = x[:, s:s + length]
            out.append(MotionFragment(float(sig.times[s]), float(sig.times[s + length - 1]),
                                      resample_fixed(raw, config.segmentation.resample_len),
                                      float("nan"), raw.copy(), rate))
    return out[:n]


def background_features(n_speakers: int, per_speaker: int, seed: int,
                        config: PipelineConfig = PipelineConfig(), passcode_len: int = 4
                        ) -> list[np.ndarray]:
    """Consistency vectors of a population of other speakers (shipped negatives)."""
    out = []
    for u, sp in enumerate(background_speakers(n_speakers, seed)):
        for a in range(per_speaker):
            s = int(np.random.SeedSequence([seed, u, a]).generate_state(1)[0])
            scene = make_genuine_scene(passcode_len, sp, seed=s, carriers=draw_carriers(s),
                                       body_clutter=bool(a % 2))
            _, sig = motion_signal(simulate(scene), scene.carriers, config)
            kept = gated_fragments(sig, config, passcode_len)[1]
            if kept:
                out.append(consistency_vector(kept, config))
    return out
