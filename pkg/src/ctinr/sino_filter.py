"""Ramp filtering of sinograms and filtered back-projection.

The filter acts per view as a circular convolution, realized in the
Fourier domain with the non-negative weights |frequency|. Because the
weights are non-negative, the filter is positive semi-definite, and
taking their square roots yields a self-adjoint factor whose double
application reproduces the full filter.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import FanGeometry, GridSpec, make_grid_coords
from .projector import Image, Sinogram, back_project, forward_project

CALIBRATION_DISK_RADIUS = 0.35  # fraction of fov
CALIBRATION_INTERIOR = 0.6      # interior mask radius, fraction of disk radius

_calibration_cache: dict = {}


@dataclass(frozen=True)
class RampFilter:
    """Per-view circular ramp filter with frequency weights |nu_k| (1/mm)."""

    n_det: int
    det_spacing: float
    weights: tuple

    def __post_init__(self):
        w = np.asarray(self.weights)
        if w.size != self.n_det:
            raise ValueError("weights length must equal n_det")
        if w[0] != 0.0 or np.any(w < 0):
            raise ValueError("weights must be non-negative with zero DC term")
        if not np.allclose(w[1:], w[1:][::-1], rtol=0, atol=0):
            raise ValueError("weights must be symmetric under frequency negation")

    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


def make_ramp_filter(n_det: int, det_spacing: float) -> RampFilter:
    """Ramp weights on the circular frequency grid: min(k, n-k)/(n*spacing)."""
    k = np.arange(n_det)
    weights = np.minimum(k, n_det - k) / (n_det * det_spacing)
    return RampFilter(n_det=n_det, det_spacing=det_spacing, weights=tuple(weights))


def ramp_filter_for(geom: FanGeometry) -> RampFilter:
    return make_ramp_filter(geom.n_det, geom.det_spacing)


def _apply_weights(sino: Sinogram, filt: RampFilter, weights: np.ndarray) -> Sinogram:
    if filt.n_det != sino.geom.n_det:
        raise ValueError("filter length does not match detector count")
    rows = sino.as_2d()
    half = weights[: filt.n_det // 2 + 1]
    spectra = np.fft.rfft(rows, axis=1) * half[None, :]
    filtered = np.fft.irfft(spectra, n=filt.n_det, axis=1)
    return Sinogram(sino.geom, filtered.ravel())


def ramp_apply(sino: Sinogram, filt: RampFilter) -> Sinogram:
    """Circular ramp convolution of every detector row."""
    return _apply_weights(sino, filt, filt.weight_array())


def half_ramp_apply(sino: Sinogram, filt: RampFilter) -> Sinogram:
    """The PSD square-root factor: same convolution with sqrt weights."""
    return _apply_weights(sino, filt, np.sqrt(filt.weight_array()))


def _rasterize_disk(grid: GridSpec, radius: float, value: float = 1.0) -> Image:
    coords = make_grid_coords(grid) * grid.fov
    center = np.array([grid.fov / 2.0, grid.fov / 2.0])
    inside = np.linalg.norm(coords - center[None, :], axis=1) <= radius
    return Image(grid, inside.astype(np.float64) * value)


def fbp_calibration(geom: FanGeometry) -> float:
    """Scale making back_project(ramp(...)) quantitative for this geometry.

    Computed once per geometry from a uniform disk: the constant maps the
    unnormalized ramp-filtered backprojection of the disk's own sinogram
    to unit interior mean.
    """
    cached = _calibration_cache.get(geom)
    if cached is not None:
        return cached
    radius = CALIBRATION_DISK_RADIUS * geom.grid.fov
    disk = _rasterize_disk(geom.grid, radius)
    filt = ramp_filter_for(geom)
    raw = back_project(ramp_apply(forward_project(disk, geom), filt), geom)
    coords = make_grid_coords(geom.grid) * geom.grid.fov
    center = np.array([geom.grid.fov / 2.0, geom.grid.fov / 2.0])
    interior = np.linalg.norm(coords - center[None, :], axis=1) <= CALIBRATION_INTERIOR * radius
    constant = 1.0 / float(raw.data[interior].mean())
    _calibration_cache[geom] = constant
    return constant


def fbp_reconstruct(sino: Sinogram) -> Image:
    """Filtered back-projection: calibrated back_project of the ramp-filtered data."""
    geom = sino.geom
    filt = ramp_filter_for(geom)
    raw = back_project(ramp_apply(sino, filt), geom)
    return Image(geom.grid, fbp_calibration(geom) * raw.data)
