"""Planar object shapes, the gap environment and the insertion-feasibility test."""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Tuple

import numpy as np
from shapely.geometry import Polygon
from shapely.geometry.polygon import orient

logger = logging.getLogger(__name__)

DEFAULT_VERTEX_COUNT = 64
TRAINING_GAP_WIDTH = 56.0
DEFAULT_CLEARANCE = 2.0


class ShapeError(ValueError):
    """Raised when a shape has invalid dimensions."""


class ShapeKind(str, Enum):
    CIRCLE = "circle"
    RECTANGLE = "rectangle"
    ELLIPSE = "ellipse"
    HEXAGON = "hexagon"
    ROUNDED_RECTANGLE = "rounded_rectangle"


REQUIRED_PARAMS: Dict[ShapeKind, Tuple[str, ...]] = {
    ShapeKind.CIRCLE: ("radius",),
    ShapeKind.RECTANGLE: ("width", "length"),
    ShapeKind.ELLIPSE: ("width", "length"),
    ShapeKind.HEXAGON: ("circumradius",),
    ShapeKind.ROUNDED_RECTANGLE: ("width", "length", "corner_radius"),
}


@dataclass(frozen=True)
class ShapeSpec:
    """Footprint description of the grasped object, dimensions in mm.

    Width is measured across the gap (x), length along the gap (y). Ellipse
    width/length are the full minor/major axes.
    """
    kind: ShapeKind
    params: Dict[str, float]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ShapeKind(self.kind))
        if not self.name:
            object.__setattr__(self, "name", self.kind.value)
        self.validate()

    def validate(self) -> None:
        """Check the dimension set for the shape kind."""
        required = REQUIRED_PARAMS[self.kind]
        for key in required:
            if key not in self.params:
                raise ShapeError(f"{self.kind.value} requires '{key}'")
        unknown = set(self.params) - set(required)
        if unknown:
            raise ShapeError(f"{self.kind.value} does not take {sorted(unknown)}")

        for key, value in self.params.items():
            if not math.isfinite(value) or value <= 0:
                raise ShapeError(f"{key} must be > 0, got {value}")

        if "width" in self.params and self.params["width"] > self.params["length"]:
            raise ShapeError(
                f"width ({self.params['width']}) must be <= length ({self.params['length']})"
            )

        if self.kind == ShapeKind.ROUNDED_RECTANGLE:
            if self.params["corner_radius"] > self.params["width"] / 2:
                raise ShapeError("corner_radius must be <= width / 2")

    @property
    def nominal_width(self) -> float:
        """Footprint width across the gap at zero yaw error."""
        if self.kind == ShapeKind.CIRCLE:
            return 2 * self.params["radius"]
        if self.kind == ShapeKind.HEXAGON:
            return 2 * self.params["circumradius"]
        return self.params["width"]

    def to_dict(self) -> Dict:
        return {"kind": self.kind.value, "name": self.name, **self.params}


@dataclass(frozen=True)
class CrossSection:
    """Convex counter-clockwise outline of the object base in its body frame."""
    vertices: np.ndarray
    name: str = ""

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float)
        vertices.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)

    @property
    def polygon(self) -> Polygon:
        return Polygon(self.vertices)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class GapEnvironment:
    """Two environment blocks separated by a gap along x."""
    gap_width: float = TRAINING_GAP_WIDTH
    block_top_z: float = 0.0
    block_extent_x: float = 45.0
    block_extent_y: float = 155.0
    target_depth: float = 20.0

    def __post_init__(self):
        if self.gap_width <= 0:
            raise ValueError(f"gap_width must be > 0, got {self.gap_width}")
        if self.target_depth <= 0:
            raise ValueError(f"target_depth must be > 0, got {self.target_depth}")

    @property
    def half_width(self) -> float:
        return self.gap_width / 2

    @classmethod
    def for_shape(cls, spec: ShapeSpec, clearance: float = DEFAULT_CLEARANCE, **kwargs) -> "GapEnvironment":
        """Gap re-derived to leave `clearance` mm on each side of the object."""
        return cls(gap_width=spec.nominal_width + 2 * clearance, **kwargs)


@dataclass(frozen=True)
class ErrorState:
    """Insertion pose error: translation across the gap (mm) and yaw (deg)."""
    dx: float = 0.0
    dtheta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.dx) and math.isfinite(self.dtheta)):
            raise ValueError(f"error must be finite, got ({self.dx}, {self.dtheta})")

    def negated(self) -> "ErrorState":
        return ErrorState(-self.dx, -self.dtheta)


def _ccw_ring(points: np.ndarray) -> np.ndarray:
    # drop consecutive duplicates left by degenerate rounded corners
    keep = np.ones(len(points), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(points, axis=0), axis=1) > 1e-12
    points = points[keep]
    if np.linalg.norm(points[0] - points[-1]) <= 1e-12:
        points = points[:-1]
    return points


def _ellipse_points(semi_x: float, semi_y: float, count: int) -> np.ndarray:
    angles = 2 * np.pi * np.arange(count) / count
    return np.column_stack([semi_x * np.cos(angles), semi_y * np.sin(angles)])


def _rounded_rectangle_points(width: float, length: float, radius: float, count: int) -> np.ndarray:
    per_corner = max(2, count // 4)
    cx, cy = width / 2 - radius, length / 2 - radius
    centers = [(cx, -cy), (cx, cy), (-cx, cy), (-cx, -cy)]
    points = []
    for corner, (ox, oy) in enumerate(centers):
        start = -np.pi / 2 + corner * np.pi / 2
        angles = np.linspace(start, start + np.pi / 2, per_corner)
        points.append(np.column_stack([ox + radius * np.cos(angles), oy + radius * np.sin(angles)]))
    return np.vstack(points)


def make_cross_section(spec: ShapeSpec, vertex_count: int = DEFAULT_VERTEX_COUNT) -> CrossSection:
    """Discretize a shape into a convex CCW polygon centred on its centroid.

    Rectangles keep their 4 corners and hexagons their 6 corners (two of them
    on the x-axis); curved outlines are sampled at `vertex_count` points.
    """
    if vertex_count < 3:
        raise ShapeError(f"vertex_count must be >= 3, got {vertex_count}")
    spec.validate()
    p = spec.params

    if spec.kind == ShapeKind.RECTANGLE:
        hw, hl = p["width"] / 2, p["length"] / 2
        points = np.array([(-hw, -hl), (hw, -hl), (hw, hl), (-hw, hl)])
    elif spec.kind == ShapeKind.CIRCLE:
        points = _ellipse_points(p["radius"], p["radius"], vertex_count)
    elif spec.kind == ShapeKind.ELLIPSE:
        points = _ellipse_points(p["width"] / 2, p["length"] / 2, vertex_count)
    elif spec.kind == ShapeKind.HEXAGON:
        points = _ellipse_points(p["circumradius"], p["circumradius"], 6)
    else:
        points = _rounded_rectangle_points(p["width"], p["length"], p["corner_radius"], vertex_count)

    points = _ccw_ring(points)
    polygon = Polygon(points)
    if not polygon.is_valid or polygon.area <= 0:
        raise ShapeError(f"{spec.name}: degenerate outline")
    if not np.isclose(polygon.convex_hull.area, polygon.area, rtol=1e-9):
        raise ShapeError(f"{spec.name}: outline is not convex")

    if not polygon.exterior.is_ccw:
        polygon = orient(polygon, sign=1.0)
        points = np.array(polygon.exterior.coords)[:-1]

    centroid = np.array(polygon.centroid.coords[0])
    if np.linalg.norm(centroid) > 1e-9:
        points = points - centroid

    logger.debug(f"Cross-section {spec.name}: {len(points)} vertices")
    return CrossSection(vertices=points, name=spec.name)


def rotated_vertices(shape: CrossSection, dtheta: float) -> np.ndarray:
    """Vertices of the shape rotated counter-clockwise by dtheta degrees."""
    angle = math.radians(dtheta)
    c, s = math.cos(angle), math.sin(angle)
    rotation = np.array([[c, -s], [s, c]])
    return shape.vertices @ rotation.T


def rotated_footprint_interval(shape: CrossSection, dtheta: float) -> Tuple[float, float]:
    """Exact x-extent [x_min, x_max] of the shape rotated by dtheta."""
    xs = rotated_vertices(shape, dtheta)[:, 0]
    return float(xs.min()), float(xs.max())


def fits_gap(shape: CrossSection, error: ErrorState, env: GapEnvironment) -> bool:
    """True iff the displaced footprint lies strictly inside the gap."""
    x_min, x_max = rotated_footprint_interval(shape, error.dtheta)
    return (x_min + error.dx > -env.half_width) and (x_max + error.dx < env.half_width)


def exceeds_block_length(shape: CrossSection, env: GapEnvironment) -> bool:
    """True when the object is longer along y than the environment blocks."""
    ys = shape.vertices[:, 1]
    return float(ys.max() - ys.min()) > env.block_extent_y


@dataclass(frozen=True)
class CatalogEntry:
    spec: ShapeSpec
    training: bool = True

    def environment(self, clearance: float = DEFAULT_CLEARANCE) -> GapEnvironment:
        if self.training:
            return GapEnvironment(gap_width=TRAINING_GAP_WIDTH)
        return GapEnvironment.for_shape(self.spec, clearance)


# 25.5 mm is read as circle radius and ellipse semi-minor axis so every
# training footprint is 51 mm wide in the 56 mm gap.
SHAPE_CATALOG: Dict[str, CatalogEntry] = {
    "rectangle": CatalogEntry(ShapeSpec(ShapeKind.RECTANGLE, {"width": 51.0, "length": 80.0}, "rectangle")),
    "circle": CatalogEntry(ShapeSpec(ShapeKind.CIRCLE, {"radius": 25.5}, "circle")),
    "ellipse": CatalogEntry(ShapeSpec(ShapeKind.ELLIPSE, {"width": 51.0, "length": 105.0}, "ellipse")),
    "hexagon": CatalogEntry(ShapeSpec(ShapeKind.HEXAGON, {"circumradius": 25.5}, "hexagon")),
    "white_box": CatalogEntry(
        ShapeSpec(ShapeKind.ROUNDED_RECTANGLE, {"width": 48.0, "length": 70.0, "corner_radius": 3.0}, "white_box"),
        training=False,
    ),
    "metal_can": CatalogEntry(
        ShapeSpec(ShapeKind.ROUNDED_RECTANGLE, {"width": 54.0, "length": 96.0, "corner_radius": 12.0}, "metal_can"),
        training=False,
    ),
    "vitamin_bottle": CatalogEntry(ShapeSpec(ShapeKind.CIRCLE, {"radius": 22.0}, "vitamin_bottle"), training=False),
    "mustard_container": CatalogEntry(
        ShapeSpec(ShapeKind.ROUNDED_RECTANGLE, {"width": 56.0, "length": 84.0, "corner_radius": 20.0}, "mustard_container"),
        training=False,
    ),
}

TRAINING_SHAPES = ("rectangle", "circle", "ellipse", "hexagon")


def catalog_shape(name: str) -> CatalogEntry:
    """Look up a named shape from the catalog."""
    try:
        return SHAPE_CATALOG[name]
    except KeyError:
        raise ShapeError(f"Unknown shape '{name}' (known: {', '.join(SHAPE_CATALOG)})") from None
