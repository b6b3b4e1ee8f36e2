"""Matrix-free fan-beam projection and its exact adjoint.

Joseph's method: every ray is sampled where it crosses the pixel-center
rows or columns of its dominant axis, with linear interpolation across
the other axis and a path-length weight per sample. The back projector
scatters the identical (pixel, weight) pairs, so the pair is matched:
<P x, s> == <x, P^T s> up to floating-point summation order.

All arithmetic is double precision.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import FanGeometry, GridSpec


@dataclass
class Image:
    """Attenuation map (mm^-1) on a square grid, stored flat row-major."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64).ravel()
        if self.data.size != self.grid.n_pixels:
            raise ValueError(
                f"image length {self.data.size} != n_side^2 = {self.grid.n_pixels}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("image contains non-finite entries")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Image":
        return cls(grid, np.zeros(grid.n_pixels))

    def as_2d(self) -> np.ndarray:
        """(n_side, n_side) view, rows indexed by y, columns by x."""
        n = self.grid.n_side
        return self.data.reshape(n, n)


@dataclass
class Sinogram:
    """Line-integral data, stored flat view-major (view index varies slowest)."""

    geom: FanGeometry
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64).ravel()
        if self.data.size != self.geom.n_rays:
            raise ValueError(
                f"sinogram length {self.data.size} != n_views*n_det = {self.geom.n_rays}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("sinogram contains non-finite entries")

    @classmethod
    def zeros(cls, geom: FanGeometry) -> "Sinogram":
        return cls(geom, np.zeros(geom.n_rays))

    def as_2d(self) -> np.ndarray:
        return self.data.reshape(self.geom.n_views, self.geom.n_det)


def _view_rays(geom: FanGeometry, view: int):
    """Ray directions and groups for one view.

    Returns (source, dirs, x_driven) where dirs[d] points from the source
    to detector bin d and x_driven marks rays sampled along columns.
    """
    src = geom.source_position(view)
    dirs = geom.detector_bin_centers(view) - src[None, :]
    x_driven = np.abs(dirs[:, 0]) >= np.abs(dirs[:, 1])
    return src, dirs, x_driven


def _sample_plan(src, dirs, sel, axis, grid: GridSpec):
    """Joseph sampling pattern for the rays `sel` driven along `axis`.

    axis 0: step across columns, interpolate between rows; axis 1 swaps
    the roles. Returns interpolation rows/cols, weights, validity masks
    and the per-sample path length.
    """
    n = grid.n_side
    ps = grid.pixel_size
    d_main = dirs[sel, axis]
    d_other = dirs[sel, 1 - axis]
    slope = d_other / d_main
    length = ps * np.sqrt(1.0 + slope * slope)  # == ps * |dir| / |d_main|
    centers = (np.arange(n) + 0.5) * ps
    other = src[1 - axis] + (centers[None, :] - src[axis]) * slope[:, None]
    frac_idx = other / ps - 0.5
    lo = np.floor(frac_idx).astype(np.intp)
    w = frac_idx - lo
    valid_lo = (lo >= 0) & (lo < n)
    valid_hi = (lo >= -1) & (lo < n - 1)
    np.clip(lo, 0, n - 1, out=lo)
    hi = np.minimum(lo + 1, n - 1)
    return lo, hi, w, valid_lo, valid_hi, length


def _flat_indices(lo, hi, axis, n):
    steps = np.arange(n)[None, :]
    if axis == 0:  # stepping over columns; lo/hi are row indices
        return lo * n + steps, hi * n + steps
    return steps * n + lo, steps * n + hi


def forward_project(img: Image, geom: FanGeometry) -> Sinogram:
    """Apply the fan-beam system matrix: line integrals of the image."""
    if img.grid != geom.grid:
        raise ValueError("image grid does not match geometry grid")
    n = geom.grid.n_side
    flat = img.data
    out = np.empty((geom.n_views, geom.n_det))
    for view in range(geom.n_views):
        src, dirs, x_driven = _view_rays(geom, view)
        for axis, sel in ((0, x_driven), (1, ~x_driven)):
            if not sel.any():
                continue
            lo, hi, w, valid_lo, valid_hi, length = _sample_plan(
                src, dirs, sel, axis, geom.grid
            )
            idx_lo, idx_hi = _flat_indices(lo, hi, axis, n)
            vals = flat[idx_lo] * ((1.0 - w) * valid_lo)
            vals += flat[idx_hi] * (w * valid_hi)
            out[view, sel] = length * vals.sum(axis=1)
    return Sinogram(geom, out.ravel())


def back_project(sino: Sinogram, geom: FanGeometry) -> Image:
    """Apply the exact transpose of :func:`forward_project`."""
    if sino.geom != geom:
        raise ValueError("sinogram geometry does not match")
    n = geom.grid.n_side
    rows = sino.as_2d()
    acc = np.zeros(n * n)
    for view in range(geom.n_views):
        src, dirs, x_driven = _view_rays(geom, view)
        for axis, sel in ((0, x_driven), (1, ~x_driven)):
            if not sel.any():
                continue
            lo, hi, w, valid_lo, valid_hi, length = _sample_plan(
                src, dirs, sel, axis, geom.grid
            )
            idx_lo, idx_hi = _flat_indices(lo, hi, axis, n)
            coeff = (rows[view, sel] * length)[:, None]
            acc += np.bincount(
                idx_lo.ravel(),
                weights=(coeff * ((1.0 - w) * valid_lo)).ravel(),
                minlength=n * n,
            )
            acc += np.bincount(
                idx_hi.ravel(),
                weights=(coeff * (w * valid_hi)).ravel(),
                minlength=n * n,
            )
    return Image(geom.grid, acc)
