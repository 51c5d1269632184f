"""Acoustic scene simulator.

Each propagation path k contributes, at every carrier f_i,

    gain_k * 2A * cos(2*pi*f_i*t - 2*pi*f_i*d_k(t)/v_k - theta_k)

to the microphone signal, where ``d_k`` is the total (out and back) path
length.  Lips are a moving reflector whose one-way displacement x(t) adds
2*x(t) to the lip path length.  Recordings come with a ground-truth sidecar
(segment boundaries, trajectory samples, scenario label).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .audio import Recording, read_wav
from .carrier import SAMPLE_RATE_HZ, CarrierSet, draw_carriers, tone_phase

SCENE_SCHEMA_VERSION = 1
SOUND_SPEED_MPS = 343.0
LIP_DOPPLER_LIMIT_HZ = 40.0
BODY_DOPPLER_RANGE_HZ = (50.0, 200.0)
MIN_SILENCE_S = 0.1
PATH_KINDS = ("structure-borne", "air-borne", "static-reflector", "lip", "body-clutter")
SCENARIOS = ("genuine", "visual-only", "replay", "imposter")


class SceneError(ValueError):
    pass


class ConfigurationError(ValueError):
    """Attack scene requested without its prerequisite artifacts."""


@dataclass(frozen=True)
class SpeakerParams:
    peak_open_mm: float = 3.0
    syllable_rate_hz: float = 5.0
    asymmetry: float = 0.0
    modulation_depth: float = 0.3
    char_duration_s: float = 0.36           # typical open-close time of one character

    def jittered(self, rng: np.random.Generator, scale: float = 0.05) -> "SpeakerParams":
        return SpeakerParams(
            peak_open_mm=self.peak_open_mm * (1 + scale * rng.standard_normal()),
            syllable_rate_hz=self.syllable_rate_hz * (1 + scale * rng.standard_normal()),
            asymmetry=float(np.clip(self.asymmetry + scale * rng.standard_normal(), -0.6, 0.6)),
            modulation_depth=float(np.clip(
                self.modulation_depth * (1 + scale * rng.standard_normal()), 0.0, 0.9)),
            char_duration_s=self.char_duration_s * (1 + scale * rng.standard_normal()),
        )


@dataclass(frozen=True)
class CharacterSegment:
    onset_s: float
    duration_s: float
    params: SpeakerParams

    @property
    def end_s(self) -> float:
        return self.onset_s + self.duration_s


def _pulse_shape(u: np.ndarray, split: float) -> np.ndarray:
    """Asymmetric raised cosine on [0, 1]: open until ``split``, then close."""
    rise = 0.5 * (1 - np.cos(np.pi * np.clip(u / split, 0, 1)))
    fall = 0.5 * (1 + np.cos(np.pi * np.clip((u - split) / (1 - split), 0, 1)))
    return np.where(u < split, rise, fall)


@dataclass
class LipTrajectory:
    segments: list[CharacterSegment]
    speaker_params: SpeakerParams

    def displacement_mm(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = np.zeros_like(t)
        for seg in self.segments:
            lo = np.searchsorted(t, seg.onset_s)
            hi = np.searchsorted(t, seg.end_s)
            if hi <= lo:
                continue
            tau = t[lo:hi] - seg.onset_s
            p = seg.params
            split = 0.5 + 0.5 * float(np.clip(p.asymmetry, -0.6, 0.6))
            env = _pulse_shape(tau / seg.duration_s, split)
            wobble = 1 - p.modulation_depth * np.sin(np.pi * p.syllable_rate_hz * tau) ** 2
            x[lo:hi] += p.peak_open_mm * env * wobble
        return x

    def boundaries(self) -> list[tuple[float, float]]:
        return [(s.onset_s, s.end_s) for s in self.segments]

    @property
    def end_s(self) -> float:
        return max((s.end_s for s in self.segments), default=0.0)

    def max_doppler_hz(self, carrier_hz: float, sound_speed=SOUND_SPEED_MPS,
                       rate=SAMPLE_RATE_HZ) -> float:
        if not self.segments:
            return 0.0
        t = np.arange(0, self.end_s + 0.01, 1.0 / rate)
        v = np.abs(np.diff(self.displacement_mm(t))) * 1e-3 * rate   # one-way m/s
        return float(2 * v.max() * carrier_hz / sound_speed)

    def validate(self) -> None:
        segs = sorted(self.segments, key=lambda s: s.onset_s)
        for a, b in zip(segs, segs[1:]):
            if b.onset_s - a.end_s < MIN_SILENCE_S - 1e-9:
                raise SceneError("lip segments must be separated by >= 100 ms silence")
        if self.max_doppler_hz(21000.0) >= LIP_DOPPLER_LIMIT_HZ:
            raise SceneError("lip trajectory exceeds the 40 Hz Doppler bound")

    def to_dict(self) -> dict:
        return {"speaker_params": asdict(self.speaker_params),
                "segments": [{"onset_s": s.onset_s, "duration_s": s.duration_s,
                              "params": asdict(s.params)} for s in self.segments]}

    @classmethod
    def from_dict(cls, d: dict) -> "LipTrajectory":
        return cls([CharacterSegment(s["onset_s"], s["duration_s"], SpeakerParams(**s["params"]))
                    for s in d["segments"]], SpeakerParams(**d["speaker_params"]))


@dataclass
class PathModel:
    kind: str
    amplitude: float
    base_length_m: float
    sound_speed_mps: float = SOUND_SPEED_MPS
    system_phase_rad: float = 0.0
    velocity_mps: float = 0.0           # d/dt of total path length
    trajectory: LipTrajectory | None = None
    sway_amp_mm: float = 0.0            # slow one-way head drift
    sway_hz: float = 0.0
    amplitude_mod_depth: float = 0.0    # lip reflection amplitude modulation (off by default)

    def __post_init__(self):
        if self.kind not in PATH_KINDS:
            raise SceneError(f"unknown path kind {self.kind!r}")
        if self.amplitude < 0 or self.sound_speed_mps <= 0:
            raise SceneError("path amplitude must be >= 0 and sound speed > 0")

    def path_length(self, t: np.ndarray) -> np.ndarray:
        d = self.base_length_m + self.velocity_mps * t
        if self.trajectory is not None:
            d = d + 2e-3 * self.trajectory.displacement_mm(t)
        if self.sway_amp_mm:
            d = d + 2e-3 * self.sway_amp_mm * np.sin(2 * np.pi * self.sway_hz * t)
        return d

    def gain(self, t: np.ndarray):
        if self.amplitude_mod_depth and self.trajectory is not None:
            x = self.trajectory.displacement_mm(t)
            peak = max(self.trajectory.speaker_params.peak_open_mm, 1e-9)
            return self.amplitude * (1 - self.amplitude_mod_depth * x / peak)
        return self.amplitude

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "trajectory"}
        d["trajectory"] = self.trajectory.to_dict() if self.trajectory else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PathModel":
        d = dict(d)
        traj = d.pop("trajectory", None)
        return cls(**d, trajectory=LipTrajectory.from_dict(traj) if traj else None)


@dataclass
class Scene:
    paths: list[PathModel]
    carriers: CarrierSet
    noise_floor_db: float = -80.0
    scenario: str = "genuine"
    duration_s: float = 3.0
    noise_seed: int = 0
    prior_recording: str | None = None      # replay: WAV path of the stored attempt
    prior_carriers: CarrierSet | None = None
    prior_samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def lip_paths(self) -> list[PathModel]:
        return [p for p in self.paths if p.kind == "lip"]

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise SceneError(f"unknown scenario {self.scenario!r}")
        nlip = len(self.lip_paths)
        if self.scenario in ("genuine", "imposter") and nlip != 1:
            raise SceneError(f"{self.scenario} scene needs exactly one lip path")
        if self.scenario == "visual-only" and nlip:
            raise SceneError("visual-only scene cannot contain a lip path")
        if self.scenario == "replay" and self.prior_recording is None and self.prior_samples is None:
            raise SceneError("replay scene must reference a prior recording")
        for p in self.lip_paths:
            p.trajectory.validate()
        for p in self.paths:
            if p.kind == "lip" and p.trajectory.end_s > self.duration_s:
                raise SceneError("trajectory extends past the scene duration")

    def trajectory(self) -> LipTrajectory | None:
        lips = self.lip_paths
        return lips[0].trajectory if lips else None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCENE_SCHEMA_VERSION,
            "scenario": self.scenario,
            "duration_s": self.duration_s,
            "noise_floor_db": self.noise_floor_db,
            "noise_seed": self.noise_seed,
            "carriers": self.carriers.to_dict(),
            "paths": [p.to_dict() for p in self.paths],
            "prior_recording": self.prior_recording,
            "prior_carriers": self.prior_carriers.to_dict() if self.prior_carriers else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        ver = d.get("schema_version", SCENE_SCHEMA_VERSION)
        if ver != SCENE_SCHEMA_VERSION:
            raise SceneError(f"unsupported scene schema version {ver}")
        pc = d.get("prior_carriers")
        return cls(
            paths=[PathModel.from_dict(p) for p in d["paths"]],
            carriers=CarrierSet.from_dict(d["carriers"]),
            noise_floor_db=d.get("noise_floor_db", -80.0),
            scenario=d.get("scenario", "genuine"),
            duration_s=d["duration_s"],
            noise_seed=d.get("noise_seed", 0),
            prior_recording=d.get("prior_recording"),
            prior_carriers=CarrierSet.from_dict(pc) if pc else None,
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "Scene":
        return cls.from_dict(json.loads(Path(path).read_text()))


def simulate(scene: Scene, duration_s: float | None = None,
             sample_rate: int = SAMPLE_RATE_HZ) -> Recording:
    duration_s = scene.duration_s if duration_s is None else duration_s
    n_samples = int(round(duration_s * sample_rate))
    traj = scene.trajectory()
    if traj is not None and traj.end_s > duration_s + 1e-9:
        raise SceneError("trajectory extends past the requested duration")

    if scene.scenario == "replay":
        prior = scene.prior_samples
        if prior is None:
            if scene.prior_recording is None:
                raise ConfigurationError("replay scene has no stored recording")
            prior = read_wav(scene.prior_recording).samples
        out = np.zeros(n_samples)
        m = min(n_samples, prior.size)
        out[:m] = prior[:m]
        return Recording(out, sample_rate)

    n = np.arange(n_samples)
    t = n / sample_rate
    x = np.zeros(n_samples)
    amp = scene.carriers.amplitude
    for path in scene.paths:
        d = path.path_length(t)
        if np.any(d < 0):
            raise SceneError(f"{path.kind} path length goes negative")
        g = path.gain(t)
        for f in scene.carriers.frequencies_hz:
            prop = 2 * np.pi * f * d / path.sound_speed_mps
            x += g * amp * np.cos(tone_phase(f, n, sample_rate) - prop - path.system_phase_rad)
    if np.isfinite(scene.noise_floor_db):
        rng = np.random.default_rng(scene.noise_seed)
        x += 10 ** (scene.noise_floor_db / 20) * rng.standard_normal(n_samples)
    return Recording(x, sample_rate)


def ground_truth(scene: Scene, rate: float = 960.0) -> dict:
    """Sidecar document: boundaries, trajectory samples and labels."""
    traj = scene.trajectory()
    t = np.arange(int(round(scene.duration_s * rate))) / rate
    disp = traj.displacement_mm(t) if traj is not None else np.zeros_like(t)
    return {
        "schema_version": SCENE_SCHEMA_VERSION,
        "scenario": scene.scenario,
        "carriers": scene.carriers.to_dict(),
        "prior_carriers": scene.prior_carriers.to_dict() if scene.prior_carriers else None,
        "duration_s": scene.duration_s,
        "segments": traj.boundaries() if traj is not None else [],
        "speaker_params": asdict(traj.speaker_params) if traj is not None else None,
        "trajectory_rate_hz": rate,
        "displacement_mm": [round(float(v), 6) for v in disp],
    }


# ---------------------------------------------------------------------------
# scene builders


def random_speaker(rng: np.random.Generator) -> SpeakerParams:
    """Draw speaker traits; redraws until the lip Doppler stays inside the 40 Hz bound."""
    while True:
        p = SpeakerParams(
            peak_open_mm=float(rng.uniform(2.0, 9.0)),
            syllable_rate_hz=float(rng.uniform(3.0, 7.0)),
            asymmetry=float(rng.uniform(-0.3, 0.3)),
            modulation_depth=float(rng.uniform(0.1, 0.35)),
            char_duration_s=float(rng.uniform(0.25, 0.5)),
        )
        traj = LipTrajectory([CharacterSegment(0.0, p.char_duration_s * 0.85, p)], p)
        if traj.max_doppler_hz(21000.0) < 0.7 * LIP_DOPPLER_LIMIT_HZ:
            return p


def speaker_signature(p: SpeakerParams, carrier_hz: float = 19500.0, rate: float = 960.0
                      ) -> np.ndarray:
    """Noise-free proxy of the consistency feature.

    Four jitter-free characters are rendered straight to an ideal baseband
    phasor, differentiated, spliced and passed through the feature extractor.
    Returns the log mean centroids (Hz) of the positive and negative Doppler
    halves.
    """
    from .features import energy_band_features

    traj = make_trajectory(4, p, np.random.default_rng(0), jitter=0.0, gap_s=(0.2, 0.2))
    t = np.arange(0.0, traj.end_s + 0.1, 1.0 / rate)
    phi = 2 * np.pi * carrier_hz * 2e-3 * traj.displacement_mm(t) / SOUND_SPEED_MPS
    g = np.diff(np.exp(-1j * phi)) * rate
    tm = t[1:]
    keep = np.zeros(tm.size, dtype=bool)
    for a, b in traj.boundaries():
        keep |= (tm >= a) & (tm <= b)
    z = g[keep]
    if z.size < rate:
        z = np.pad(z, (0, int(rate) - z.size))
    feats = energy_band_features(np.stack([z.real, z.imag]), baseband_rate_hz=rate)
    return np.log(np.maximum(feats.side_tracks.mean(axis=1), 1e-3))


def speaker_population(n: int, seed: int, min_separation: float = 0.3,
                       max_tries: int = 20000) -> list[SpeakerParams]:
    """``n`` speakers separable by construction.

    Candidates are drawn at random and kept only if their feature proxy lies
    at least ``min_separation`` (Euclidean, log Hz) from every kept speaker.
    """
    rng = np.random.default_rng(seed)
    out: list[SpeakerParams] = []
    sigs: list[np.ndarray] = []
    for _ in range(max_tries):
        if len(out) == n:
            break
        cand = random_speaker(rng)
        sig = speaker_signature(cand)
        if all(np.linalg.norm(sig - o) >= min_separation for o in sigs):
            out.append(cand)
            sigs.append(sig)
    if len(out) < n:
        raise SceneError(f"could not place {n} speakers {min_separation} apart")
    return out


def background_speakers(n: int, seed: int) -> list[SpeakerParams]:
    """Unconstrained random speakers, e.g. the population behind shipped negatives."""
    rng = np.random.default_rng([seed, 0xB6])
    return [random_speaker(rng) for _ in range(n)]


def make_trajectory(passcode_len: int, speaker: SpeakerParams, rng: np.random.Generator,
                    lead_in_s: float = 0.5, jitter: float = 0.02,
                    char_duration_s=None, gap_s=(0.15, 0.3)) -> LipTrajectory:
    """Character durations follow the speaker's own tempo unless a (lo, hi) range is given."""
    segs = []
    t = lead_in_s
    for k in range(passcode_len):
        params = speaker.jittered(rng, jitter) if jitter else speaker
        if char_duration_s is None:
            dur = float(params.char_duration_s)
        else:
            dur = float(rng.uniform(*char_duration_s))
        segs.append(CharacterSegment(round(t, 6), round(dur, 6), params))
        t += dur
        if k < passcode_len - 1:
            t += float(rng.uniform(*gap_s))
    return LipTrajectory(segs, speaker)


def _static_paths(rng: np.random.Generator) -> list[PathModel]:
    ph = lambda: float(rng.uniform(0, 2 * np.pi))
    return [
        PathModel("structure-borne", float(rng.uniform(0.4, 0.5)), float(rng.uniform(0.1, 0.14)),
                  sound_speed_mps=1500.0, system_phase_rad=ph()),
        PathModel("air-borne", float(rng.uniform(0.15, 0.25)), float(rng.uniform(0.12, 0.16)),
                  system_phase_rad=ph()),
        PathModel("static-reflector", float(rng.uniform(0.04, 0.08)), float(rng.uniform(0.5, 0.7)),
                  system_phase_rad=ph()),
    ]


def body_clutter_path(carriers: CarrierSet, rng: np.random.Generator,
                      duration_s: float, amplitude: float = 0.02) -> PathModel:
    """Moving body whose Doppler stays inside 50-200 Hz on every carrier."""
    f_lo, f_hi = min(carriers.frequencies_hz), max(carriers.frequencies_hz)
    lo = BODY_DOPPLER_RANGE_HZ[0] * f_hi / f_lo * 1.05
    hi = BODY_DOPPLER_RANGE_HZ[1] * 0.95
    doppler_at_hi = float(rng.uniform(lo, hi))
    v = doppler_at_hi * SOUND_SPEED_MPS / f_hi
    if rng.random() < 0.5:
        v = -v
    base = 1.0 + (abs(v) * duration_s if v < 0 else 0.0)
    return PathModel("body-clutter", amplitude, base, velocity_mps=v,
                     system_phase_rad=float(rng.uniform(0, 2 * np.pi)))


def make_lip_path(trajectory: LipTrajectory, rng: np.random.Generator,
                  sway_mm: float = 0.3) -> PathModel:
    return PathModel("lip", float(rng.uniform(0.025, 0.035)), 2 * float(rng.uniform(0.25, 0.35)),
                     system_phase_rad=float(rng.uniform(0, 2 * np.pi)), trajectory=trajectory,
                     sway_amp_mm=sway_mm, sway_hz=float(rng.uniform(0.1, 0.3)))


def make_genuine_scene(passcode_len: int, speaker_params: SpeakerParams | None = None,
                       seed: int = 0, carriers: CarrierSet | None = None,
                       body_clutter: bool = False, noise_floor_db: float = -80.0,
                       jitter: float = 0.02, tail_s: float = 0.4,
                       scenario: str = "genuine") -> Scene:
    if not 2 <= passcode_len <= 6:
        raise SceneError("passcode length must be in [2, 6]")
    rng = np.random.default_rng([seed, 0x11B])
    speaker_params = speaker_params or SpeakerParams()
    carriers = carriers or draw_carriers(seed)
    traj = make_trajectory(passcode_len, speaker_params, rng, jitter=jitter)
    duration = round(traj.end_s + tail_s, 3)
    paths = _static_paths(rng) + [make_lip_path(traj, rng)]
    if body_clutter:
        paths.append(body_clutter_path(carriers, rng, duration))
    scene = Scene(paths, carriers, noise_floor_db, scenario, duration,
                  noise_seed=int(rng.integers(2**31)))
    scene.validate()
    return scene


def make_attack_scene(kind: str, seed: int = 0, carriers: CarrierSet | None = None,
                      target_params: SpeakerParams | None = None,
                      imposter_params: SpeakerParams | None = None,
                      prior: Recording | str | None = None,
                      prior_carriers: CarrierSet | None = None,
                      passcode_len: int = 4, duration_s: float = 3.0,
                      noise_floor_db: float = -80.0) -> Scene:
    """Build a visual-only, replay or imposter scene against a target user."""
    kind = {"visual": "visual-only"}.get(kind, kind)
    carriers = carriers or draw_carriers(seed)
    rng = np.random.default_rng([seed, 0xA77])
    if kind == "visual-only":
        paths = _static_paths(rng)
        # the forged face on a screen is just one more fixed reflector
        paths.append(PathModel("static-reflector", float(rng.uniform(0.03, 0.06)),
                               2 * float(rng.uniform(0.25, 0.35)),
                               system_phase_rad=float(rng.uniform(0, 2 * np.pi))))
        scene = Scene(paths, carriers, noise_floor_db, "visual-only", duration_s,
                      noise_seed=int(rng.integers(2**31)))
    elif kind == "replay":
        if prior is None:
            raise ConfigurationError("replay attack needs a stored prior recording")
        scene = Scene([], carriers, noise_floor_db, "replay", duration_s,
                      noise_seed=int(rng.integers(2**31)), prior_carriers=prior_carriers)
        if isinstance(prior, Recording):
            scene.prior_samples = prior.samples
            scene.duration_s = prior.duration_s
        else:
            scene.prior_recording = str(prior)
            scene.duration_s = read_wav(prior).duration_s
    elif kind == "imposter":
        if imposter_params is None:
            raise ConfigurationError("imposter attack needs the imposter's speaker params")
        if target_params is not None and imposter_params == target_params:
            raise ConfigurationError("imposter params must differ from the target's")
        scene = make_genuine_scene(passcode_len, imposter_params, seed, carriers,
                                   noise_floor_db=noise_floor_db, scenario="imposter")
    else:
        raise ConfigurationError(f"unknown attack kind {kind!r}")
    scene.validate()
    return scene
