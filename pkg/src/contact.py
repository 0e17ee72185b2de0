"""Vertical descent into the gap, blocking contact and the pivot twist it causes."""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Tuple

import numpy as np

from geometry import CrossSection, ErrorState, GapEnvironment, fits_gap, rotated_vertices

logger = logging.getLogger(__name__)

DEFAULT_DESCENT_PER_FRAME = 0.5
DEFAULT_FRAMES = 8
DEFAULT_MIN_LEVER = 5.0


class ContractError(ValueError):
    """Raised when an operation is called outside its precondition."""


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    BOTH = "both"
    NONE = "none"


@dataclass(frozen=True)
class ContactEvent:
    """Outcome of one descent.

    edge_angle is the yaw of the object's body y-axis relative to the block
    edge (equals dtheta); overlaps are how far the footprint reaches past
    each gap edge.
    """
    blocked: bool
    side: Side = Side.NONE
    contact_point: Tuple[float, float] = (0.0, 0.0)
    lever_arm: float = 0.0
    edge_angle: float = 0.0
    overlap_left: float = 0.0
    overlap_right: float = 0.0

    @property
    def pivot_side(self) -> Side:
        """The side the object pivots about (greater overlap for two-sided jams)."""
        if self.side != Side.BOTH:
            return self.side
        return Side.RIGHT if self.overlap_right >= self.overlap_left else Side.LEFT

    def to_dict(self) -> Dict:
        return {
            "blocked": self.blocked,
            "side": self.side.value,
            "lever_arm": self.lever_arm,
            "edge_angle": self.edge_angle,
        }


@dataclass(frozen=True)
class Twist:
    """Pivot rotation per frame about a horizontal axis (x, y components)."""
    axis_xy: Tuple[float, float]
    angle_per_frame: float
    frames: int = DEFAULT_FRAMES
    lever_arm: float = DEFAULT_MIN_LEVER

    def scaled(self, factor: float) -> "Twist":
        return Twist(self.axis_xy, self.angle_per_frame * factor, self.frames, self.lever_arm)


@dataclass(frozen=True)
class TwistDecomposition:
    """Pivot split into gel in-plane (shear) and out-of-plane (pressure) parts, deg/frame."""
    in_plane: float
    out_of_plane: float
    shear_sign: int
    pressure_sign: int


NO_CONTACT = ContactEvent(blocked=False)


def descend(shape: CrossSection, error: ErrorState, env: GapEnvironment) -> ContactEvent:
    """Lower the displaced object onto the blocks and report the blocking contact."""
    if fits_gap(shape, error, env):
        return NO_CONTACT

    placed = rotated_vertices(shape, error.dtheta)
    xs = placed[:, 0] + error.dx
    half = env.half_width

    right_blocked = xs.max() >= half
    left_blocked = xs.min() <= -half
    overlap_right = max(0.0, float(xs.max() - half))
    overlap_left = max(0.0, float(-half - xs.min()))

    if right_blocked and left_blocked:
        side = Side.BOTH
    elif right_blocked:
        side = Side.RIGHT
    else:
        side = Side.LEFT

    pivot_right = side == Side.RIGHT or (side == Side.BOTH and overlap_right >= overlap_left)
    if pivot_right:
        x_edge, touching = half, int(np.argmax(xs))
    else:
        x_edge, touching = -half, int(np.argmin(xs))

    event = ContactEvent(
        blocked=True,
        side=side,
        contact_point=(x_edge, float(placed[touching, 1])),
        lever_arm=abs(x_edge - error.dx),
        edge_angle=error.dtheta,
        overlap_left=overlap_left,
        overlap_right=overlap_right,
    )
    logger.debug(f"Blocked on {side.value}: lever={event.lever_arm:.3f} mm, edge={event.edge_angle:.2f} deg")
    return event


def pivot_twist(
    event: ContactEvent,
    descent_per_frame: float = DEFAULT_DESCENT_PER_FRAME,
    frames: int = DEFAULT_FRAMES,
    min_lever: float = DEFAULT_MIN_LEVER,
) -> Twist:
    """Quasi-static small-angle pivot about the contacted block edge."""
    if not event.blocked:
        raise ContractError("pivot_twist requires a blocked contact")
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")

    lever = max(event.lever_arm, min_lever)
    angle_per_frame = math.degrees(descent_per_frame / lever)

    if event.side == Side.BOTH:
        # a centred jam builds pressure on both edges but has no net pivot
        total = event.overlap_left + event.overlap_right
        asymmetry = abs(event.overlap_right - event.overlap_left) / total if total > 0 else 0.0
        angle_per_frame *= asymmetry

    edge = math.radians(event.edge_angle)
    return Twist(
        axis_xy=(math.sin(edge), math.cos(edge)),
        angle_per_frame=angle_per_frame,
        frames=frames,
        lever_arm=lever,
    )


def decompose_twist(twist: Twist, event: ContactEvent) -> TwistDecomposition:
    """Split the pivot into shear-producing and pressure-producing components."""
    in_plane = twist.angle_per_frame * twist.axis_xy[1]
    out_of_plane = twist.angle_per_frame * twist.axis_xy[0]
    # the object tips away from the contacted block
    shear_sign = 1 if event.pivot_side == Side.LEFT else -1
    pressure_sign = int(np.sign(out_of_plane * shear_sign))
    return TwistDecomposition(
        in_plane=in_plane,
        out_of_plane=out_of_plane,
        shear_sign=shear_sign,
        pressure_sign=pressure_sign,
    )
