"""Error-direction taxonomy and the oracle / calibrated-noise estimators."""
import logging
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from geometry import ErrorState

logger = logging.getLogger(__name__)

CLASS_COUNT = 9


class DirectionClass(IntEnum):
    """Region of the (dx, dtheta) error plane; value - 1 is the probability index."""
    MINUS_X = 1
    PLUS_X = 2
    MINUS_X_PLUS_THETA = 3
    MINUS_X_MINUS_THETA = 4
    PLUS_X_PLUS_THETA = 5
    PLUS_X_MINUS_THETA = 6
    MINUS_THETA = 7
    PLUS_THETA = 8
    NO_ERROR = 9

    @property
    def label(self) -> str:
        return "none" if self is DirectionClass.NO_ERROR else str(int(self))

    @classmethod
    def from_label(cls, label: str) -> "DirectionClass":
        return cls.NO_ERROR if label == "none" else cls(int(label))


@dataclass(frozen=True)
class SignPair:
    s_x: int
    s_theta: int


_SIGNS: Dict[DirectionClass, SignPair] = {
    DirectionClass.MINUS_X: SignPair(-1, 0),
    DirectionClass.PLUS_X: SignPair(1, 0),
    DirectionClass.MINUS_X_PLUS_THETA: SignPair(-1, 1),
    DirectionClass.MINUS_X_MINUS_THETA: SignPair(-1, -1),
    DirectionClass.PLUS_X_PLUS_THETA: SignPair(1, 1),
    DirectionClass.PLUS_X_MINUS_THETA: SignPair(1, -1),
    DirectionClass.MINUS_THETA: SignPair(0, -1),
    DirectionClass.PLUS_THETA: SignPair(0, 1),
    DirectionClass.NO_ERROR: SignPair(0, 0),
}
_CLASSES: Dict[SignPair, DirectionClass] = {signs: c for c, signs in _SIGNS.items()}


@dataclass(frozen=True)
class ClassifierThresholds:
    t_x: float = 2.5
    t_theta: float = 5.0

    def __post_init__(self):
        if self.t_x <= 0 or self.t_theta <= 0:
            raise ValueError(f"thresholds must be > 0, got ({self.t_x}, {self.t_theta})")


@dataclass(frozen=True)
class ErrorEstimate:
    dx_e: float
    dtheta_e: float
    class_probs: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.class_probs is not None:
            probs = np.asarray(self.class_probs)
            if len(probs) != CLASS_COUNT or np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
                raise ValueError("class_probs must be 9 nonnegative probabilities summing to 1")


@dataclass(frozen=True)
class NoiseModel:
    """Surrogate for a trained estimator with known accuracy and error band."""
    direction_accuracy: float = 0.744
    half_width_x: float = 1.9
    half_width_theta: float = 1.9
    distribution: str = "uniform"

    def __post_init__(self):
        if not 0 < self.direction_accuracy <= 1:
            raise ValueError(f"direction_accuracy must be in (0, 1], got {self.direction_accuracy}")
        if self.half_width_x < 0 or self.half_width_theta < 0:
            raise ValueError("magnitude half-widths must be >= 0")
        if self.distribution not in ("uniform", "gaussian"):
            raise ValueError(f"unknown noise distribution '{self.distribution}'")


def _sign(value: float) -> int:
    return (value > 0) - (value < 0)


def class_to_signs(c: DirectionClass) -> SignPair:
    return _SIGNS[DirectionClass(c)]


def signs_to_class(signs: SignPair) -> DirectionClass:
    try:
        return _CLASSES[signs]
    except KeyError:
        raise ValueError(f"invalid sign pair {signs}") from None


def classify_direction_truth(error: ErrorState, thr: ClassifierThresholds = ClassifierThresholds()) -> DirectionClass:
    """Region of the error plane given the per-axis thresholds."""
    s_x = _sign(error.dx) if abs(error.dx) > thr.t_x else 0
    s_theta = _sign(error.dtheta) if abs(error.dtheta) > thr.t_theta else 0
    return signs_to_class(SignPair(s_x, s_theta))


def label_contact(
    error: ErrorState, thr: ClassifierThresholds = ClassifierThresholds(), blocked: bool = True
) -> Tuple[DirectionClass, bool]:
    """Class label for a contact, plus whether the dominant-component rule was used.

    A blocked contact below both thresholds has no region; it takes the sign of
    its larger threshold-normalized component.
    """
    truth = classify_direction_truth(error, thr)
    if truth != DirectionClass.NO_ERROR or not blocked:
        return truth, False

    rx, rtheta = abs(error.dx) / thr.t_x, abs(error.dtheta) / thr.t_theta
    if rx == 0 and rtheta == 0:
        return truth, False
    if rx >= rtheta:
        signs = SignPair(_sign(error.dx), 0)
    else:
        signs = SignPair(0, _sign(error.dtheta))
    return signs_to_class(signs), True


def oracle_estimate(error: ErrorState) -> ErrorEstimate:
    """Perfect-information estimate."""
    return ErrorEstimate(dx_e=error.dx, dtheta_e=error.dtheta)


def admissible_confusions(truth: DirectionClass) -> List[DirectionClass]:
    """Classes a sign-safe misclassification of `truth` may land on.

    A confusion keeps at least one nonzero sign of the truth and never flips a
    nonzero sign.
    """
    t = class_to_signs(truth)
    result = []
    for c, s in _SIGNS.items():
        if c == truth:
            continue
        if t.s_x != 0 and s.s_x not in (t.s_x, 0):
            continue
        if t.s_theta != 0 and s.s_theta not in (t.s_theta, 0):
            continue
        shares = (t.s_x != 0 and s.s_x == t.s_x) or (t.s_theta != 0 and s.s_theta == t.s_theta)
        if shares:
            result.append(c)
    return result


def _as_rng(rng: Union[None, int, np.random.Generator]) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def noisy_estimate(
    error: ErrorState,
    model: NoiseModel = NoiseModel(),
    thr: ClassifierThresholds = ClassifierThresholds(),
    rng_seed: Union[None, int, np.random.Generator] = None,
    truth: Optional[DirectionClass] = None,
) -> Tuple[DirectionClass, ErrorEstimate]:
    """Calibrated surrogate: correct class with the model's accuracy, else a sign-safe neighbour."""
    rng = _as_rng(rng_seed)
    truth = truth if truth is not None else classify_direction_truth(error, thr)

    predicted = truth
    if rng.random() >= model.direction_accuracy:
        candidates = admissible_confusions(truth)
        if candidates:
            predicted = candidates[int(rng.integers(len(candidates)))]

    if model.distribution == "uniform":
        nx = rng.uniform(-model.half_width_x, model.half_width_x)
        ntheta = rng.uniform(-model.half_width_theta, model.half_width_theta)
    else:
        # same mean absolute deviation as the uniform band
        factor = 0.5 * math.sqrt(math.pi / 2)
        nx = rng.normal(0.0, model.half_width_x * factor)
        ntheta = rng.normal(0.0, model.half_width_theta * factor)

    return predicted, ErrorEstimate(dx_e=error.dx + nx, dtheta_e=error.dtheta + ntheta)
