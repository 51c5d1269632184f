"""Dataset-level enrollment and evaluation."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..audio import read_wav
from ..carrier import CarrierSet
from ..verification.profile import UserProfile, enroll
from .dataset import load_manifest
from .metrics import MetricReport, compute_metrics
from .pipeline import DetectionOutcome, PipelineConfig, enrollment_vector, run_detection


def read_sidecar(wav_path) -> dict:
    side = Path(wav_path).with_suffix(".json")
    if not side.exists():
        raise FileNotFoundError(f"no sidecar next to {wav_path}")
    return json.loads(side.read_text())


def sidecar_carriers(wav_path) -> CarrierSet:
    return CarrierSet.from_dict(read_sidecar(wav_path)["carriers"])


def enroll_from_recordings(user_id: str, wav_paths, background, config=PipelineConfig(),
                           passcode_len: int | None = None, **profile_kw) -> UserProfile:
    """Profile from enrollment WAVs whose carriers come from the sidecars."""
    vecs = []
    for p in sorted(map(str, wav_paths)):
        n = passcode_len or read_sidecar(p).get("passcode_len")
        vecs.append(enrollment_vector(read_wav(p), sidecar_carriers(p), config, n))
    return enroll(user_id, vecs, background, **profile_kw)


def _detect_entry(args) -> DetectionOutcome:
    path, entry, profile, model, config, n = args
    return run_detection(read_wav(path), CarrierSet.from_dict({"frequencies_hz": entry["carriers"]}),
                         profile, model, config, n, entry["scenario"])


def evaluate_dataset(dataset_dir, motion_model, background, config=PipelineConfig(),
                     workers: int = 1, profile_kw: dict | None = None
                     ) -> tuple[list[DetectionOutcome], MetricReport, dict]:
    """Enroll every user from the ``enroll`` recordings, detect every ``test`` one."""
    d = Path(dataset_dir)
    man = load_manifest(d)
    n = man["passcode_len"]
    by_user: dict = {}
    for e in man["recordings"]:
        if e["role"] == "enroll":
            by_user.setdefault(e["user_id"], []).append(d / e["file"])
    profiles = {u: enroll_from_recordings(u, paths, background, config, n, **(profile_kw or {}))
                for u, paths in sorted(by_user.items())}
    jobs = [(d / e["file"], e, profiles.get(e["user_id"]), motion_model, config, n)
            for e in man["recordings"] if e["role"] == "test"]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            outcomes = list(ex.map(_detect_entry, jobs))
    else:
        outcomes = [_detect_entry(j) for j in jobs]
    return outcomes, compute_metrics(outcomes), profiles
