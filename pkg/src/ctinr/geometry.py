"""Image grids and 2D fan-beam acquisition geometry.

The image lives on a square grid covering the physical frame [0, fov]^2
(millimetres), with the rotation centre at (fov/2, fov/2). Coordinate
networks see the same grid normalized to [0, 1]^2.
"""

from dataclasses import dataclass, field
import math

import numpy as np

# Margin by which the detector fan over-covers the reconstruction circle.
FAN_COVERAGE_MARGIN = 1.05


@dataclass(frozen=True)
class GridSpec:
    """Square pixel grid: n_side pixels per side over a fov x fov frame (mm)."""

    n_side: int
    fov: float

    def __post_init__(self):
        if self.n_side < 1:
            raise ValueError(f"n_side must be positive, got {self.n_side}")
        if not self.fov > 0:
            raise ValueError(f"fov must be positive, got {self.fov}")

    @property
    def pixel_size(self) -> float:
        return self.fov / self.n_side

    @property
    def n_pixels(self) -> int:
        return self.n_side * self.n_side


@dataclass(frozen=True)
class FanGeometry:
    """Circular fan-beam scan: point source, flat detector, full rotation.

    View angles are in radians; the source for view angle a sits at
    iso + source_to_iso * (cos a, sin a), and the flat detector is
    perpendicular to the central ray at distance source_to_det from the
    source. Detector bins are indexed along (-sin a, cos a).
    """

    n_views: int
    n_det: int
    angles: tuple
    source_to_iso: float
    source_to_det: float
    det_spacing: float
    grid: GridSpec = field()

    def __post_init__(self):
        if self.n_views < 1 or self.n_det < 2:
            raise ValueError(
                f"need n_views >= 1 and n_det >= 2, got {self.n_views}, {self.n_det}"
            )
        if len(self.angles) != self.n_views:
            raise ValueError("angles length must equal n_views")
        if any(b <= a for a, b in zip(self.angles, self.angles[1:])):
            raise ValueError("angles must be strictly increasing")
        if not self.det_spacing > 0:
            raise ValueError("det_spacing must be positive")
        circle = self.grid.fov * math.sqrt(2.0) / 2.0
        if not self.source_to_det > self.source_to_iso > circle:
            raise ValueError(
                "require source_to_det > source_to_iso > fov*sqrt(2)/2 "
                f"(got {self.source_to_det}, {self.source_to_iso}, circle {circle:.3f})"
            )

    @property
    def n_rays(self) -> int:
        return self.n_views * self.n_det

    @property
    def iso_center(self) -> tuple:
        c = self.grid.fov / 2.0
        return (c, c)

    def source_position(self, view: int) -> np.ndarray:
        a = self.angles[view]
        c = self.grid.fov / 2.0
        return np.array([c + self.source_to_iso * math.cos(a),
                         c + self.source_to_iso * math.sin(a)])

    def detector_bin_centers(self, view: int) -> np.ndarray:
        """Positions of all detector bin centers for one view, shape (n_det, 2)."""
        a = self.angles[view]
        c = self.grid.fov / 2.0
        center = np.array([c - (self.source_to_det - self.source_to_iso) * math.cos(a),
                           c - (self.source_to_det - self.source_to_iso) * math.sin(a)])
        tangent = np.array([-math.sin(a), math.cos(a)])
        offsets = (np.arange(self.n_det) - (self.n_det - 1) / 2.0) * self.det_spacing
        return center[None, :] + offsets[:, None] * tangent[None, :]


def make_grid_coords(grid: GridSpec) -> np.ndarray:
    """Pixel-center coordinates normalized to [0,1]^2, shape (n_side^2, 2).

    Row-major to match image storage: the flat index of pixel (i, j)
    (i along x, j along y) is j * n_side + i, and its coordinate is
    ((i + 0.5)/n_side, (j + 0.5)/n_side).
    """
    n = grid.n_side
    centers = (np.arange(n) + 0.5) / n
    xs, ys = np.meshgrid(centers, centers, indexing="xy")
    return np.column_stack([xs.ravel(), ys.ravel()])


def make_fan_geometry(
    n_views: int,
    n_det: int,
    grid: GridSpec,
    source_to_iso: float | None = None,
    source_to_det: float | None = None,
    det_spacing: float | None = None,
) -> FanGeometry:
    """Equally spaced full-scan fan geometry with non-truncating defaults.

    Defaults: source_to_iso = 2*fov, source_to_det = 4*fov, and detector
    pitch chosen so the fan subtends the circle circumscribing the image
    frame with a 5% margin (no ray truncation anywhere in the grid).
    """
    if n_views < 1 or n_det < 2:
        raise ValueError(f"need n_views >= 1 and n_det >= 2, got {n_views}, {n_det}")
    sid = 2.0 * grid.fov if source_to_iso is None else source_to_iso
    sdd = 4.0 * grid.fov if source_to_det is None else source_to_det
    if det_spacing is None:
        circle = grid.fov * math.sqrt(2.0) / 2.0
        half_fan = math.asin(circle / sid)
        half_width = FAN_COVERAGE_MARGIN * sdd * math.tan(half_fan)
        det_spacing = 2.0 * half_width / n_det
    angles = tuple(2.0 * math.pi * k / n_views for k in range(n_views))
    return FanGeometry(
        n_views=n_views,
        n_det=n_det,
        angles=angles,
        source_to_iso=sid,
        source_to_det=sdd,
        det_spacing=det_spacing,
        grid=grid,
    )


def fan_covers_point(geom: FanGeometry, view: int, point: np.ndarray) -> bool:
    """True if the ray from the source through `point` hits the detector."""
    src = geom.source_position(view)
    a = geom.angles[view]
    axis = -np.array([math.cos(a), math.sin(a)])  # central ray direction
    tangent = np.array([-math.sin(a), math.cos(a)])
    rel = np.asarray(point) - src
    depth = rel @ axis
    if depth <= 0:
        return False
    offset = (rel @ tangent) * geom.source_to_det / depth
    return abs(offset) < geom.n_det * geom.det_spacing / 2.0
