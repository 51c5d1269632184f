"""Shipped assets: the pretrained motion verifier and the background negatives.

Both are plain JSON under ``liplive/data``.  When a file is missing it is
rebuilt deterministically from the simulator and written to the asset
directory (``LIPLIVE_ASSET_DIR`` overrides the location).
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

MOTION_MODEL_FILE = "motion_model.json"
BACKGROUND_FILE = "background_features.json"

MOTION_SEED = 0
MOTION_TRAIN_SIZE = 500                 # per class
BACKGROUND_SEED = 777
BACKGROUND_SPEAKERS = 25
BACKGROUND_PER_SPEAKER = 2


def asset_dir() -> Path:
    env = os.environ.get("LIPLIVE_ASSET_DIR")
    return Path(env) if env else Path(__file__).parent / "data"


def build_motion_model(seed: int = MOTION_SEED, n: int = MOTION_TRAIN_SIZE, log=None):
    from .harness.training import lip_fragments, noise_fragments
    from .verification.motion_net import train_motion_verifier

    pos = lip_fragments(n, seed + 1)
    neg = noise_fragments(n, seed + 2)
    return train_motion_verifier(pos, neg, seed=seed, log=log)


def build_background(seed: int = BACKGROUND_SEED, n_speakers: int = BACKGROUND_SPEAKERS,
                     per_speaker: int = BACKGROUND_PER_SPEAKER, config=None) -> list[np.ndarray]:
    from .harness.pipeline import PipelineConfig
    from .harness.training import background_features

    return background_features(n_speakers, per_speaker, seed, config or PipelineConfig())


def load_motion_model(path=None, rebuild: bool = True):
    from .verification.motion_net import MotionVerifierModel

    p = Path(path) if path else asset_dir() / MOTION_MODEL_FILE
    if not p.exists():
        if not rebuild:
            raise FileNotFoundError(p)
        model = build_motion_model()
        p.parent.mkdir(parents=True, exist_ok=True)
        model.save(p)
        return model
    return MotionVerifierModel.load(p)


def save_background(vectors, path) -> None:
    Path(path).write_text(json.dumps(
        {"version": 1, "vectors": [np.asarray(v, float).tolist() for v in vectors]}))


def load_background(path=None, rebuild: bool = True) -> list[np.ndarray]:
    p = Path(path) if path else asset_dir() / BACKGROUND_FILE
    if not p.exists():
        if not rebuild:
            raise FileNotFoundError(p)
        vecs = build_background()
        p.parent.mkdir(parents=True, exist_ok=True)
        save_background(vecs, p)
        return vecs
    return [np.asarray(v, float) for v in json.loads(p.read_text())["vectors"]]
