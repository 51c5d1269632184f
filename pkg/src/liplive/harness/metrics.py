"""ROC, AUC and EER from genuine/attack scores."""
from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    pass


def roc_points(genuine, attack) -> list[tuple[float, float]]:
    """(FAR, TAR) while lowering an accept-if-score>=t threshold; tied scores move together."""
    g = np.asarray(genuine, dtype=float)
    a = np.asarray(attack, dtype=float)
    if g.size == 0 or a.size == 0:
        raise MetricError("both genuine and attack scores are required")
    pts = [(0.0, 0.0)]
    finite = np.concatenate([g, a])
    finite = finite[np.isfinite(finite) | (finite == np.inf)]
    for t in np.unique(finite)[::-1]:
        pts.append((float(np.mean(a >= t)), float(np.mean(g >= t))))
    if pts[-1] != (1.0, 1.0):
        pts.append((1.0, 1.0))
    return pts


def auc_trapezoid(points) -> float:
    far = np.array([p[0] for p in points])
    tar = np.array([p[1] for p in points])
    return float(np.sum((far[1:] - far[:-1]) * (tar[1:] + tar[:-1]) / 2))


def eer_from_roc(points) -> float:
    """Rate where FAR = FRR, interpolating linearly along the ROC polyline."""
    d_prev, p_prev = None, None
    for far, tar in points:
        d = far - (1.0 - tar)
        if d >= 0:
            if d == 0 or p_prev is None:
                return float(far)
            lam = -d_prev / (d - d_prev)
            return float(p_prev[0] + lam * (far - p_prev[0]))
        d_prev, p_prev = d, (far, tar)
    return 1.0


@dataclass
class MetricReport:
    roc: list
    auc: float
    eer: float
    accuracy: float
    tar: float
    far: float
    frr: float
    counts: dict = field(default_factory=dict)
    accepted: dict = field(default_factory=dict)
    genuine_scores: list = field(default_factory=list)
    attack_scores: list = field(default_factory=list)

    def to_dict(self) -> dict:
        enc = lambda v: v if np.isfinite(v) else ("inf" if v > 0 else "-inf")
        return {"roc": [list(p) for p in self.roc], "auc": self.auc, "eer": self.eer,
                "accuracy": self.accuracy, "tar": self.tar, "far": self.far, "frr": self.frr,
                "counts": self.counts, "accepted": self.accepted,
                "genuine_scores": [enc(v) for v in self.genuine_scores],
                "attack_scores": [enc(v) for v in self.attack_scores]}

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_roc_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["far", "tar"])
            w.writerows(self.roc)


def compute_metrics(outcomes, genuine_label: str = "genuine") -> MetricReport:
    """Outcomes need ``scenario``, ``final`` and ``score`` attributes."""
    outcomes = list(outcomes)
    gen = [o for o in outcomes if o.scenario == genuine_label]
    att = [o for o in outcomes if o.scenario != genuine_label]
    if not gen or not att:
        raise MetricError("metrics need both genuine and attack outcomes")
    gs = [o.score for o in gen]
    ats = [o.score for o in att]
    roc = roc_points(gs, ats)
    tar = float(np.mean([o.final for o in gen]))
    far = float(np.mean([o.final for o in att]))
    correct = sum(o.final for o in gen) + sum(not o.final for o in att)
    counts = dict(sorted(Counter(o.scenario for o in outcomes).items()))
    accepted = dict(sorted(Counter(o.scenario for o in outcomes if o.final).items()))
    return MetricReport(roc, auc_trapezoid(roc), eer_from_roc(roc), correct / len(outcomes),
                        tar, far, 1.0 - tar, counts, accepted, gs, ats)
