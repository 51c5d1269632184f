"""End-to-end detection: recording + fresh challenge -> accept / reject."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..audio import Recording
from ..carrier import CarrierSet
from ..demodulation import DemodConfig, demodulate
from ..features import StftParams, energy_band_features, splice
from ..interference import MotionSignal, mmse_detrend, gradient
from ..segmentation import SegmentationConfig, segment_characters
from ..verification.motion_net import MotionVerifierModel, verify_motion
from ..verification.profile import UserProfile, verify_consistency


@dataclass(frozen=True)
class PipelineConfig:
    demod: DemodConfig = DemodConfig()
    detrend_window_s: float = 0.5
    segmentation: SegmentationConfig = SegmentationConfig()
    snr_gate_db: float = 6.0
    carrier_gate_db: float = -20.0
    stft: StftParams = StftParams()
    energy_clip: tuple = (0.03, 0.99)
    feature_len: int = 64
    fusion: str = "split"
    motion_threshold: float = 0.5
    consistency_threshold: float | None = None      # None: the profile's threshold
    pad_short_splice: bool = True
    run_all_stages: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DetectionOutcome:
    scenario: str
    motion_pass: bool
    consistency_pass: bool
    scores: dict = field(default_factory=dict)
    stage: str = "done"             # where the attempt stopped
    error: str | None = None

    @property
    def final(self) -> bool:
        return self.motion_pass and self.consistency_pass and self.error is None

    @property
    def score(self) -> float:
        """Consistency score of attempts that passed motion, -inf otherwise (for ROC sweeps)."""
        s = self.scores.get("consistency")
        if not self.motion_pass or s is None or self.error is not None:
            return float("-inf")
        return float(s)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "motion_pass": self.motion_pass,
                "consistency_pass": self.consistency_pass, "final": self.final,
                "scores": self.scores, "stage": self.stage, "error": self.error}


def carrier_levels_db(frame, recording: Recording) -> np.ndarray:
    """Per-carrier baseband power against the per-tone share of the recording power."""
    p_rec = float(np.mean(recording.samples ** 2))
    p_bb = np.mean(np.abs(frame.complex) ** 2, axis=1)
    n = len(frame.carriers.frequencies_hz)
    with np.errstate(divide="ignore"):
        return 10 * np.log10(p_bb / (p_rec / n)) if p_rec > 0 else np.full(n, -np.inf)


def motion_signal(recording: Recording, carriers: CarrierSet,
                  config: PipelineConfig = PipelineConfig()):
    frame = demodulate(recording, carriers, config.demod)
    return frame, mmse_detrend(gradient(frame), config.detrend_window_s)


def consistency_vector(fragments, config: PipelineConfig = PipelineConfig()) -> np.ndarray:
    x = splice(fragments)
    rate = fragments[0].baseband_rate_hz
    win = int(round(config.stft.window_s * rate))
    if config.pad_short_splice and x.shape[1] < win:
        x = np.pad(x, ((0, 0), (0, win - x.shape[1])))
    feats = energy_band_features(x, config.stft, config.energy_clip, rate)
    return feats.vector(config.feature_len, config.fusion)


def gated_fragments(signal: MotionSignal, config: PipelineConfig, expected_count=None):
    frags = segment_characters(signal, config.segmentation, expected_count)
    return frags, [f for f in frags if f.snr_db >= config.snr_gate_db]


def run_detection(recording: Recording, carriers: CarrierSet, profile: UserProfile | None,
                  motion_model: MotionVerifierModel, config: PipelineConfig = PipelineConfig(),
                  expected_count: int = 4, scenario: str = "unknown") -> DetectionOutcome:
    """Motion verification first, consistency second; any stage error rejects."""
    out = DetectionOutcome(scenario, False, False)
    try:
        frame, signal = motion_signal(recording, carriers, config)
        levels = carrier_levels_db(frame, recording)
        out.scores["carrier_db"] = [float(v) for v in levels]
        if not np.all(levels > config.carrier_gate_db):
            out.stage = "carrier"
            return out
        frags, kept = gated_fragments(signal, config, expected_count)
        out.scores["n_fragments"] = len(frags)
        out.scores["n_gated"] = len(kept)
        out.scores["snr_db"] = [float(f.snr_db) for f in frags]
        md = verify_motion(motion_model, kept, expected_count, config.motion_threshold)
        out.motion_pass = md.passed
        out.scores["motion"] = md.scores
        out.scores["motion_valid"] = md.n_valid
        if not md.passed and not config.run_all_stages:
            out.stage = "motion"
            return out
        if not kept:
            out.stage = "motion"
            return out
        if profile is None:
            raise ValueError("no enrolled profile")
        vec = consistency_vector(kept, config)
        cd = verify_consistency(profile, vec, config.consistency_threshold)
        out.consistency_pass = cd.passed
        out.scores["consistency"] = cd.score
        out.stage = "done" if md.passed else "motion"
    except Exception as exc:            # any stage failure is a reject
        out.motion_pass = out.consistency_pass = False
        out.error = f"{type(exc).__name__}: {exc}"
        out.stage = "error"
    return out


def enrollment_vector(recording: Recording, carriers: CarrierSet,
                      config: PipelineConfig = PipelineConfig(), expected_count: int | None = None
                      ) -> np.ndarray:
    """Consistency vector of one enrollment attempt (no motion check)."""
    _, signal = motion_signal(recording, carriers, config)
    _, kept = gated_fragments(signal, config, expected_count)
    if not kept:
        raise ValueError("no lip-motion fragments in the enrollment recording")
    return consistency_vector(kept, config)
