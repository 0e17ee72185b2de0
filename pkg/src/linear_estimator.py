"""Tactile features and the linear direction/magnitude estimators fitted on them.

Feature layout (FEATURE_DIM = 114):
  [0, 96)    per frame (8) x pad (2) x FRAME_STATS (6)
  [96, 108)  per pad x FRAME_STATS summed over the 8 frames
  [108, 114) per pad x PIVOT_STATS (3), from frame 8
The pivot statistics re-express the pad means so that the pivot side,
lever and out-of-plane tilt enter linearly.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_softmax, softmax

from contact import ContractError
from estimation import (
    CLASS_COUNT,
    ClassifierThresholds,
    DirectionClass,
    ErrorEstimate,
    label_contact,
)
from geometry import ErrorState
from tactile import FRAME_COUNT, TactileSequence

logger = logging.getLogger(__name__)

FRAME_STATS = ("shear_x_mean", "shear_z_mean", "shear_abs_mean", "pressure_mean", "pressure_abs_max", "pressure_sum")
PIVOT_STATS = ("side_descent", "lever_moment", "pressure_side")
FEATURE_DIM = FRAME_COUNT * 2 * len(FRAME_STATS) + 2 * len(FRAME_STATS) + 2 * len(PIVOT_STATS)
WEIGHTS_VERSION = 1

# sign each statistic takes when the contact is mirrored (pads swapped)
_FRAME_MIRROR = np.array([-1.0, 1.0, 1.0, -1.0, 1.0, -1.0])
_PIVOT_MIRROR = np.array([-1.0, -1.0, 1.0])


class FitError(ValueError):
    """Raised when an estimator cannot be fitted to a dataset."""


def _frame_stats(seq: TactileSequence) -> np.ndarray:
    shear, pressure = seq.shear, seq.pressure
    return np.stack([
        shear[..., 0].mean(axis=(2, 3)),
        shear[..., 1].mean(axis=(2, 3)),
        np.linalg.norm(shear, axis=-1).mean(axis=(2, 3)),
        pressure.mean(axis=(2, 3)),
        np.abs(pressure).max(axis=(2, 3)),
        pressure.sum(axis=(2, 3)),
    ], axis=-1)


def extract_features(seq: TactileSequence) -> np.ndarray:
    """Fixed-length summary of a tactile sequence (see module docstring)."""
    stats = _frame_stats(seq)
    cumulative = stats.sum(axis=0)

    last = stats[-1]
    mean_x, mean_z, pressure_sum = last[:, 0], last[:, 1], last[:, 5]
    side = np.sign(mean_x)
    abs_x = np.abs(mean_x)
    lever = np.divide(mean_z ** 2, abs_x, out=np.zeros_like(abs_x), where=abs_x > 0)
    pivot = np.stack([np.abs(mean_z) * side, lever * side, pressure_sum * side], axis=-1)

    return np.concatenate([stats.ravel(), cumulative.ravel(), pivot.ravel()])


def mirror_features(features: np.ndarray) -> np.ndarray:
    """Features of the mirror-image contact: pads swapped, odd statistics negated."""
    features = np.asarray(features, dtype=float)
    n_frame = FRAME_COUNT * 2 * len(FRAME_STATS)
    n_cum = 2 * len(FRAME_STATS)
    frames = features[:n_frame].reshape(FRAME_COUNT, 2, -1)[:, ::-1] * _FRAME_MIRROR
    cumulative = features[n_frame:n_frame + n_cum].reshape(2, -1)[::-1] * _FRAME_MIRROR
    pivot = features[n_frame + n_cum:].reshape(2, -1)[::-1] * _PIVOT_MIRROR
    return np.concatenate([frames.ravel(), cumulative.ravel(), pivot.ravel()])


@dataclass
class LinearEstimator:
    """Softmax direction classifier and least-squares magnitude regressor, raw-feature space."""
    feature_dim: int
    class_weights: np.ndarray
    class_bias: np.ndarray
    magnitude_weights: np.ndarray
    magnitude_bias: np.ndarray

    def class_scores(self, features: np.ndarray) -> np.ndarray:
        return features @ self.class_weights.T + self.class_bias

    def magnitudes(self, features: np.ndarray) -> np.ndarray:
        return features @ self.magnitude_weights.T + self.magnitude_bias

    def check_dim(self, features: np.ndarray) -> None:
        if features.shape[-1] != self.feature_dim:
            raise ContractError(
                f"feature dimension {features.shape[-1]} does not match estimator ({self.feature_dim})"
            )


def _design(samples: Sequence[Tuple[np.ndarray, DirectionClass, ErrorState]]):
    if len(samples) == 0:
        raise FitError("cannot fit an estimator on an empty dataset")
    X = np.array([np.asarray(f, dtype=float) for f, _, _ in samples])
    y = np.array([int(c) - 1 for _, c, _ in samples])
    T = np.array([[e.dx, e.dtheta] for _, _, e in samples])
    if not np.all(np.isfinite(X)):
        raise FitError("feature matrix contains non-finite values")
    return X, y, T


def _fit_classifier(Z: np.ndarray, y: np.ndarray, reg_lambda: float, max_iter: int) -> Tuple[np.ndarray, np.ndarray]:
    """Multinomial logistic regression, L2 on weights, L-BFGS from the class prior."""
    n, d = Z.shape
    onehot = np.zeros((n, CLASS_COUNT))
    onehot[np.arange(n), y] = 1.0
    prior = np.log((onehot.sum(axis=0) + 1.0) / (n + CLASS_COUNT))

    def objective(theta):
        W = theta[:CLASS_COUNT * d].reshape(CLASS_COUNT, d)
        b = theta[CLASS_COUNT * d:]
        log_p = log_softmax(Z @ W.T + b, axis=1)
        loss = -np.sum(onehot * log_p) / n + 0.5 * reg_lambda * np.sum(W ** 2)
        residual = (np.exp(log_p) - onehot) / n
        grad_W = residual.T @ Z + reg_lambda * W
        grad_b = residual.sum(axis=0)
        return loss, np.concatenate([grad_W.ravel(), grad_b])

    result = minimize(
        objective,
        np.concatenate([np.zeros(CLASS_COUNT * d), prior]),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter},
    )
    if not result.success:
        logger.warning(f"Classifier optimisation stopped early: {result.message}")
    theta = result.x
    return theta[:CLASS_COUNT * d].reshape(CLASS_COUNT, d), theta[CLASS_COUNT * d:]


def fit_linear_estimator(
    dataset: Sequence[Tuple[np.ndarray, DirectionClass, ErrorState]],
    reg_lambda: float = 1e-3,
    max_iter: int = 500,
) -> LinearEstimator:
    """Fit both estimators independently on (features, class, error) samples."""
    if reg_lambda < 0:
        raise ValueError(f"reg_lambda must be >= 0, got {reg_lambda}")
    X, y, T = _design(dataset)
    n, d = X.shape

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    varying = scale > 1e-12
    if not np.any(varying):
        raise FitError("degenerate feature matrix: no feature varies across the dataset")
    scale[~varying] = 1.0
    Z = (X - mean) / scale

    # ridge with an unpenalised intercept (Z is centred)
    target_mean = T.mean(axis=0)
    augmented = np.vstack([Z, np.sqrt(reg_lambda * n) * np.eye(d)])
    rhs = np.vstack([T - target_mean, np.zeros((d, 2))])
    M, *_ = np.linalg.lstsq(augmented, rhs, rcond=None)
    M = M.T

    W, b = _fit_classifier(Z, y, reg_lambda, max_iter)

    # fold the standardisation into raw-feature weights
    class_weights = W / scale
    magnitude_weights = M / scale
    estimator = LinearEstimator(
        feature_dim=d,
        class_weights=class_weights,
        class_bias=b - class_weights @ mean,
        magnitude_weights=magnitude_weights,
        magnitude_bias=target_mean - magnitude_weights @ mean,
    )

    train_accuracy = float(np.mean(np.argmax(estimator.class_scores(X), axis=1) == y))
    logger.info(f"Fitted linear estimator on {n} samples (dim {d}), train accuracy {train_accuracy:.3f}")
    return estimator


def predict_features(
    est: LinearEstimator, features: np.ndarray, thr: ClassifierThresholds = ClassifierThresholds()
) -> Tuple[DirectionClass, ErrorEstimate]:
    """Class and magnitude from a feature vector.

    NoError never labels a blocked contact, so a NoError argmax falls back to
    the threshold reading of the magnitude estimate.
    """
    features = np.asarray(features, dtype=float)
    est.check_dim(features)
    probs = softmax(est.class_scores(features))
    dx_e, dtheta_e = est.magnitudes(features)
    predicted = DirectionClass(int(np.argmax(probs)) + 1)
    if predicted == DirectionClass.NO_ERROR:
        predicted, _ = label_contact(ErrorState(float(dx_e), float(dtheta_e)), thr, blocked=True)
    return predicted, ErrorEstimate(float(dx_e), float(dtheta_e), tuple(float(p) for p in probs))


def predict(
    est: LinearEstimator, seq: TactileSequence, thr: ClassifierThresholds = ClassifierThresholds()
) -> Tuple[DirectionClass, ErrorEstimate]:
    return predict_features(est, extract_features(seq), thr)


def evaluate_estimator(
    est: LinearEstimator,
    dataset: Sequence[Tuple[np.ndarray, DirectionClass, ErrorState]],
    thr: ClassifierThresholds = ClassifierThresholds(),
) -> Dict:
    """Direction accuracy, magnitude MAE and confusion matrix (rows = truth)."""
    X, y, T = _design(dataset)
    est.check_dim(X)
    confusion = np.zeros((CLASS_COUNT, CLASS_COUNT), dtype=int)
    predicted_T = np.zeros_like(T)
    for i, features in enumerate(X):
        predicted, estimate = predict_features(est, features, thr)
        confusion[y[i], int(predicted) - 1] += 1
        predicted_T[i] = (estimate.dx_e, estimate.dtheta_e)

    errors = np.abs(predicted_T - T)
    return {
        "samples": len(X),
        "direction_accuracy": float(np.trace(confusion) / len(X)),
        "mae_x": float(errors[:, 0].mean()),
        "mae_theta": float(errors[:, 1].mean()),
        "confusion": confusion,
    }


def save_weights(est: LinearEstimator, path: str) -> Path:
    """Versioned text weight file: header, then row-major [bias, weights...] rows."""
    out_path = Path(path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as f:
        f.write(f"tactile-pack-linear-estimator {WEIGHTS_VERSION}\n")
        f.write(f"feature_dim {est.feature_dim}\n")
        f.write(f"classes {CLASS_COUNT}\n")
        f.write("class_weights\n")
        np.savetxt(f, np.column_stack([est.class_bias, est.class_weights]), fmt="%.17g")
        f.write("magnitude_weights\n")
        np.savetxt(f, np.column_stack([est.magnitude_bias, est.magnitude_weights]), fmt="%.17g")
    logger.info(f"Estimator weights written to {out_path}")
    return out_path


def load_weights(path: str) -> LinearEstimator:
    """Read a weight file written by save_weights."""
    in_path = Path(path)
    if not in_path.exists():
        raise FileNotFoundError(f"Weights file not found: {in_path}")

    lines = in_path.read_text().splitlines()
    try:
        magic, version = lines[0].split()
        feature_dim = int(lines[1].split()[1])
        classes = int(lines[2].split()[1])
    except (IndexError, ValueError):
        raise ValueError(f"{in_path}: malformed weights header") from None
    if magic != "tactile-pack-linear-estimator" or int(version) != WEIGHTS_VERSION:
        raise ValueError(f"{in_path}: unsupported weights format '{lines[0]}'")
    if classes != CLASS_COUNT:
        raise ValueError(f"{in_path}: expected {CLASS_COUNT} classes, found {classes}")

    class_rows = np.loadtxt(lines[4:4 + classes], ndmin=2)
    magnitude_rows = np.loadtxt(lines[5 + classes:7 + classes], ndmin=2)
    if class_rows.shape != (classes, feature_dim + 1) or magnitude_rows.shape != (2, feature_dim + 1):
        raise ValueError(f"{in_path}: weight rows do not match feature_dim {feature_dim}")

    return LinearEstimator(
        feature_dim=feature_dim,
        class_weights=class_rows[:, 1:],
        class_bias=class_rows[:, 0],
        magnitude_weights=magnitude_rows[:, 1:],
        magnitude_bias=magnitude_rows[:, 0],
    )

