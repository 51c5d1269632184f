"""Soft-margin kernel SVM trained by SMO on a precomputed kernel matrix."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels


class SVMError(ValueError):
    pass


class DegenerateDataError(SVMError):
    """All training points coincide; no margin can be defined."""


@dataclass
class SVMModel:
    kernel: str
    degree: int
    gamma: float
    coef0: float
    C: float
    support_vectors: np.ndarray         # standardised, (n_sv, d)
    dual_coef: np.ndarray               # alpha_i * y_i, (n_sv,)
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    kkt_gap: float = 0.0
    iterations: int = 0
    training_accuracy: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def separable(self) -> bool:
        return self.training_accuracy == 1.0

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = (x - self.mean) / self.scale
        k = kernel_matrix(z, self.support_vectors, self.kernel, self.degree, self.gamma, self.coef0)
        return k @ self.dual_coef + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.where(self.decision_function(x) > 0, 1, -1)

    def to_dict(self) -> dict:
        return {"kernel": self.kernel, "degree": self.degree, "gamma": self.gamma,
                "coef0": self.coef0, "C": self.C,
                "support_vectors": self.support_vectors.tolist(),
                "dual_coef": self.dual_coef.tolist(), "bias": self.bias,
                "mean": self.mean.tolist(), "scale": self.scale.tolist(),
                "kkt_gap": self.kkt_gap, "iterations": self.iterations,
                "training_accuracy": self.training_accuracy}

    @classmethod
    def from_dict(cls, d: dict) -> "SVMModel":
        d = dict(d)
        for k in ("support_vectors", "dual_coef", "mean", "scale"):
            d[k] = np.asarray(d[k], dtype=float)
        d["support_vectors"] = d["support_vectors"].reshape(len(d["dual_coef"]), -1)
        return cls(**d)


def kernel_matrix(a: np.ndarray, b: np.ndarray, kernel: str = "poly", degree: int = 3,
                  gamma: float = 1.0, coef0: float = 1.0) -> np.ndarray:
    g = a @ b.T
    if kernel == "linear":
        return g
    if kernel == "poly":
        return (gamma * g + coef0) ** degree
    raise SVMError(f"unknown kernel {kernel!r}")


def dual_objective(alpha, K, y) -> float:
    """sum(alpha) - 0.5 alpha'Qa (to be maximised)."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def primal_objective(alpha, bias, K, y, C) -> float:
    """0.5 |w|^2 + sum C_i hinge_i with w = sum alpha_i y_i phi(x_i)."""
    ay = alpha * y
    f = K @ ay + bias
    return float(0.5 * ay @ K @ ay + np.sum(C * np.maximum(0.0, 1 - y * f)))


def train_svm(positives, negatives, kernel: str = "poly", C: float = 1.0, degree: int = 3,
              gamma: float | None = None, coef0: float = 1.0, standardize: bool = True,
              tol: float = 1e-4, max_iter: int = 200_000,
              class_weight: str | None = None) -> SVMModel:
    """Fit +1 (positives) against -1 (negatives).

    ``gamma`` defaults to 1/d.  With ``standardize`` each feature is z-scored
    with the training statistics, which are stored in the model.
    ``class_weight="balanced"`` scales the box bound of the smaller class by
    the class-size ratio, so the larger class keeps bound ``C`` and both
    classes get the same total budget.
    """
    pos = np.atleast_2d(np.asarray(positives, dtype=float))
    neg = np.atleast_2d(np.asarray(negatives, dtype=float))
    if pos.size == 0 or neg.size == 0:
        raise SVMError("both classes need at least one sample")
    if pos.shape[1] != neg.shape[1]:
        raise SVMError("feature dimensions differ between classes")
    x = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    if np.all(x == x[0]):
        raise DegenerateDataError("all training points are identical; margin is degenerate")
    if not np.all(np.isfinite(x)):
        raise SVMError("non-finite feature values")
    d = x.shape[1]
    mean = x.mean(axis=0) if standardize else np.zeros(d)
    scale = x.std(axis=0) if standardize else np.ones(d)
    scale = np.where(scale > 0, scale, 1.0)
    z = (x - mean) / scale
    gamma = 1.0 / d if gamma is None else float(gamma)
    K = kernel_matrix(z, z, kernel, degree, gamma, coef0)
    box = box_constraints(y, C, class_weight)
    alpha, bias, iters, gap = _kernels.smo_solve(K, y, box, float(tol), int(max_iter))
    sv = alpha > 0
    model = SVMModel(kernel, degree, gamma, coef0, float(C), z[sv].copy(), (alpha * y)[sv],
                     float(bias), mean, scale, float(gap), int(iters))
    f = K[:, sv] @ model.dual_coef + model.bias
    model.training_accuracy = float(np.mean(np.where(f > 0, 1, -1) == y))
    model.extra = {"n_train": int(len(y)), "dual": dual_objective(alpha, K, y),
                   "primal": primal_objective(alpha, bias, K, y, box),
                   "class_weight": class_weight}
    return model


def box_constraints(y: np.ndarray, C: float, class_weight: str | None = None) -> np.ndarray:
    if class_weight is None:
        return np.full(y.size, float(C))
    if class_weight != "balanced":
        raise SVMError(f"unknown class weighting {class_weight!r}")
    n_pos = int(np.sum(y > 0))
    n_neg = y.size - n_pos
    big = max(n_pos, n_neg)
    return np.where(y > 0, C * big / n_pos, C * big / n_neg)
