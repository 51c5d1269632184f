"""Per-user consistency profile: enrolled feature samples plus a cubic SVM."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .svm import SVMModel, train_svm

PROFILE_VERSION = 1
MIN_ENROLL = 5


class EnrollmentError(ValueError):
    pass


class ProfileStateError(RuntimeError):
    pass


@dataclass
class UserProfile:
    user_id: str
    positive_features: list = field(default_factory=list)
    negative_features: list = field(default_factory=list)
    svm: SVMModel | None = None
    C: float = 1.0
    degree: int = 3
    cap: int = 100
    threshold: float = 0.0
    class_weight: str | None = "balanced"

    @property
    def trained(self) -> bool:
        return self.svm is not None

    def to_dict(self) -> dict:
        return {"version": PROFILE_VERSION, "user_id": self.user_id,
                "C": self.C, "degree": self.degree, "cap": self.cap,
                "threshold": self.threshold, "class_weight": self.class_weight,
                "positive_features": [np.asarray(v, float).tolist() for v in self.positive_features],
                "negative_features": [np.asarray(v, float).tolist() for v in self.negative_features],
                "svm": self.svm.to_dict() if self.svm else None}

    @classmethod
    def from_dict(cls, d: dict) -> "UserProfile":
        if d.get("version") != PROFILE_VERSION:
            raise ProfileStateError(f"unsupported profile version {d.get('version')!r}")
        return cls(d["user_id"],
                   [np.asarray(v, float) for v in d["positive_features"]],
                   [np.asarray(v, float) for v in d["negative_features"]],
                   SVMModel.from_dict(d["svm"]) if d["svm"] else None,
                   d["C"], d["degree"], d["cap"], d["threshold"], d.get("class_weight"))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "UserProfile":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _fit(profile: UserProfile) -> UserProfile:
    svm = train_svm(np.array(profile.positive_features), np.array(profile.negative_features),
                    kernel="poly", C=profile.C, degree=profile.degree,
                    class_weight=profile.class_weight)
    return replace(profile, svm=svm)


def enroll(user_id: str, feature_samples, shipped_negatives, C: float = 1.0, degree: int = 3,
           cap: int = 100, threshold: float = 0.0, class_weight: str | None = "balanced"
           ) -> UserProfile:
    """Train a fresh profile from >= 5 enrollment vectors against other users' vectors."""
    pos = [np.asarray(v, float) for v in feature_samples]
    neg = [np.asarray(v, float) for v in shipped_negatives]
    if len(pos) < MIN_ENROLL:
        raise EnrollmentError(f"need at least {MIN_ENROLL} enrollment samples, got {len(pos)}")
    if not neg:
        raise EnrollmentError("need negative samples from other users")
    return _fit(UserProfile(user_id, pos[-cap:], neg[-cap:], None, C, degree, cap, threshold,
                            class_weight))


@dataclass
class ConsistencyDecision:
    passed: bool
    score: float


def verify_consistency(profile: UserProfile, features, threshold: float | None = None
                       ) -> ConsistencyDecision:
    if not profile.trained:
        raise ProfileStateError(f"profile {profile.user_id!r} has no trained classifier")
    score = float(profile.svm.decision_function(np.asarray(features, float))[0])
    thr = profile.threshold if threshold is None else threshold
    return ConsistencyDecision(score > thr, score)


def update_profile(profile: UserProfile, features, accepted: bool) -> UserProfile:
    """Append the attempt to positives (accepted) or negatives, keep the newest ``cap``, refit."""
    v = np.asarray(features, float)
    pos, neg = list(profile.positive_features), list(profile.negative_features)
    (pos if accepted else neg).append(v)
    return _fit(replace(profile, positive_features=pos[-profile.cap:],
                        negative_features=neg[-profile.cap:]))
