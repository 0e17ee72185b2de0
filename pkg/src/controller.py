"""Heuristic probe-correct policy: sign pair + magnitude estimate -> pose correction."""
import logging
from dataclasses import dataclass, fields
from typing import Dict

from estimation import ErrorEstimate, SignPair
from geometry import ErrorState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControllerParams:
    consistent_factor: float = 0.7
    no_sign_factor: float = 0.3
    constant_step_x: float = 3.0
    constant_step_theta: float = 3.0
    clip_x: float = 4.0
    clip_theta: float = 4.0
    clip_from_trial: int = 2

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"controller.{f.name} must be > 0")
        if self.clip_from_trial < 2:
            raise ValueError("controller.clip_from_trial must be >= 2")

    @classmethod
    def from_dict(cls, values: Dict) -> "ControllerParams":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in known})


@dataclass(frozen=True)
class Correction:
    c_x: float
    c_theta: float


class CorrectionController:
    """Per-axis correction rule.

    Consistent sign and estimate: shrink the estimate. No sign: shrink harder.
    Contradiction (or a sign with a zero estimate): trust the sign and take a
    constant step. From `clip_from_trial` on, each axis is clamped.
    """

    def __init__(self, params: ControllerParams = ControllerParams()):
        self.params = params

    def axis_correction(self, sign: int, estimate: float, step: float, clip: float, trial_index: int) -> float:
        p = self.params
        if sign == 0:
            value = -p.no_sign_factor * estimate
        elif sign * estimate > 0:
            value = -p.consistent_factor * estimate
        else:
            value = -step * sign

        if trial_index >= p.clip_from_trial:
            value = max(-clip, min(clip, value))
        return value

    def correction(self, signs: SignPair, est: ErrorEstimate, trial_index: int) -> Correction:
        if trial_index < 1:
            raise ValueError(f"trial_index must be >= 1, got {trial_index}")
        p = self.params
        return Correction(
            c_x=self.axis_correction(signs.s_x, est.dx_e, p.constant_step_x, p.clip_x, trial_index),
            c_theta=self.axis_correction(signs.s_theta, est.dtheta_e, p.constant_step_theta, p.clip_theta, trial_index),
        )


def correction(
    signs: SignPair, est: ErrorEstimate, trial_index: int, params: ControllerParams = ControllerParams()
) -> Correction:
    return CorrectionController(params).correction(signs, est, trial_index)


def apply(error: ErrorState, corr: Correction) -> ErrorState:
    """Move the insertion pose by the correction."""
    return ErrorState(error.dx + corr.c_x, error.dtheta + corr.c_theta)
