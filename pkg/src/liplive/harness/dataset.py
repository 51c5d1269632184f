"""Deterministic synthetic dataset: WAV recordings, ground-truth sidecars, manifest.

Every recording gets its own seed derived from the dataset seed and its index,
so a dataset can be regenerated byte for byte.  The manifest holds no
timestamps or absolute paths.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..audio import write_wav
from ..carrier import draw_carriers
from ..simulator import (SCENARIOS, background_speakers, ground_truth, make_attack_scene,
                         make_genuine_scene, simulate, speaker_population)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


class DatasetError(ValueError):
    pass


def _seed(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def mix_counts(total: int, mix: dict) -> dict:
    """Exact integer counts per scenario (largest remainder, ties by scenario order)."""
    if total < 1:
        raise DatasetError("need at least one attempt")
    unknown = set(mix) - set(SCENARIOS)
    if unknown:
        raise DatasetError(f"unknown scenarios {sorted(unknown)}")
    w = {k: float(v) for k, v in mix.items() if v > 0}
    if not w:
        raise DatasetError("scenario mix is empty")
    s = sum(w.values())
    quota = {k: total * v / s for k, v in w.items()}
    counts = {k: int(np.floor(q)) for k, q in quota.items()}
    left = total - sum(counts.values())
    order = sorted(w, key=lambda k: (-(quota[k] - counts[k]), SCENARIOS.index(k)))
    for k in order[:left]:
        counts[k] += 1
    return {k: counts[k] for k in SCENARIOS if k in counts}


def parse_mix(text: str) -> dict:
    """``"genuine=0.75,visual-only=0.25"`` -> dict."""
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        k, _, v = part.partition("=")
        k = {"visual": "visual-only"}.get(k.strip(), k.strip())
        out[k] = float(v) if v else 1.0
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _fresh_carriers(seed: int, avoid):
    c = draw_carriers(seed)
    k = 1
    while avoid is not None and c.frequencies_hz == avoid.frequencies_hz:
        c = draw_carriers(_seed(seed, k))
        k += 1
    return c


def build_scene(scenario: str, speakers, user: int, seed: int, passcode_len: int = 4):
    """Scene of one attempt against ``speakers[user]``."""
    target = speakers[user]
    clutter = bool(seed % 2)
    if scenario == "genuine":
        return make_genuine_scene(passcode_len, target, seed=seed, carriers=draw_carriers(seed),
                                  body_clutter=clutter)
    if scenario == "visual-only":
        return make_attack_scene("visual", seed=seed, carriers=draw_carriers(seed))
    if scenario == "replay":
        # a genuine attempt captured earlier, played back against a fresh challenge
        s0 = _seed(seed, 0x9E)
        old = make_genuine_scene(passcode_len, target, seed=s0, carriers=draw_carriers(s0),
                                 body_clutter=clutter)
        return make_attack_scene("replay", seed=seed, carriers=_fresh_carriers(seed, old.carriers),
                                 prior=simulate(old), prior_carriers=old.carriers)
    if scenario == "imposter":
        if len(speakers) > 1:
            others = [i for i in range(len(speakers)) if i != user]
            imp = speakers[others[seed % len(others)]]
        else:
            imp = background_speakers(1, seed)[0]
        return make_attack_scene("imposter", seed=seed, carriers=draw_carriers(seed),
                                 target_params=target, imposter_params=imp,
                                 passcode_len=passcode_len)
    raise DatasetError(f"unknown scenario {scenario!r}")


def generate_dataset(out_dir, n_speakers: int, attempts: int, mix: dict | None = None,
                     seed: int = 0, passcode_len: int = 4, enroll_per_speaker: int = 0,
                     min_separation: float = 0.3) -> dict:
    """Write ``n_speakers * attempts`` test recordings (+ enrollment ones) and a manifest.

    ``mix`` maps scenario -> weight over the test attempts; counts are exact.
    Test attempts are assigned round-robin to target users after a seeded
    shuffle of the scenario labels.
    """
    if n_speakers < 1 or attempts < 1 or enroll_per_speaker < 0:
        raise DatasetError("speaker and attempt counts must be >= 1")
    mix = mix or {"genuine": 1.0}
    total = n_speakers * attempts
    counts = mix_counts(total, mix)
    labels = [k for k, c in counts.items() for _ in range(c)]
    np.random.default_rng([seed, 0xD5]).shuffle(labels)
    speakers = speaker_population(n_speakers, seed, min_separation)

    jobs = []
    for u in range(n_speakers):
        for a in range(enroll_per_speaker):
            jobs.append(("enroll", u, "genuine"))
    for i, lab in enumerate(labels):
        jobs.append(("test", i % n_speakers, lab))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for idx, (role, u, lab) in enumerate(jobs):
        s = _seed(seed, idx, 0x5C)
        scene = build_scene(lab, speakers, u, s, passcode_len)
        rec = simulate(scene)
        name = f"rec_{idx:05d}"
        wav, side = out / f"{name}.wav", out / f"{name}.json"
        write_wav(wav, rec)
        doc = ground_truth(scene)
        doc.update(user_id=f"user{u:03d}", role=role, seed=s, passcode_len=passcode_len,
                   scene=scene.to_dict())
        side.write_text(json.dumps(doc, sort_keys=True))
        entries.append({"file": wav.name, "sidecar": side.name, "user_id": f"user{u:03d}",
                        "role": role, "scenario": lab, "seed": s,
                        "carriers": list(scene.carriers.frequencies_hz),
                        "wav_sha256": _sha256(wav), "sidecar_sha256": _sha256(side)})
    manifest = {
        "version": MANIFEST_VERSION, "seed": seed, "n_speakers": n_speakers,
        "attempts": attempts, "enroll_per_speaker": enroll_per_speaker,
        "passcode_len": passcode_len, "min_separation": min_separation,
        "mix": {k: float(v) for k, v in sorted(mix.items())}, "counts": counts,
        "speakers": [{"user_id": f"user{u:03d}", **sp.__dict__} for u, sp in enumerate(speakers)],
        "recordings": entries,
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest


def load_manifest(dataset_dir) -> dict:
    p = Path(dataset_dir) / MANIFEST_NAME
    if not p.exists():
        raise DatasetError(f"no manifest in {dataset_dir}")
    return json.loads(p.read_text())


def scenario_counts(manifest: dict, role: str = "test") -> dict:
    out: dict = {}
    for e in manifest["recordings"]:
        if e["role"] == role:
            out[e["scenario"]] = out.get(e["scenario"], 0) + 1
    return out
