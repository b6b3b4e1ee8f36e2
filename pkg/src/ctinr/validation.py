"""Input validation helpers shared by the estimators and the CLI."""

import numpy as np

from .geometry import FanGeometry, GridSpec
from .projector import Image, Sinogram


def as_sinogram(y, geom: FanGeometry) -> Sinogram:
    """Coerce Sinogram / (n_views, n_det) array / flat vector to a Sinogram."""
    if isinstance(y, Sinogram):
        if y.geom != geom:
            raise ValueError("sinogram geometry does not match the estimator geometry")
        return y
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape != (geom.n_views, geom.n_det):
            raise ValueError(
                f"expected sinogram shape {(geom.n_views, geom.n_det)}, got {arr.shape}"
            )
        arr = arr.ravel()
    elif arr.ndim != 1 or arr.size != geom.n_rays:
        raise ValueError(f"expected {geom.n_rays} sinogram entries, got {arr.size}")
    return Sinogram(geom, arr)


def as_image(x, grid: GridSpec) -> Image:
    """Coerce Image / (n, n) array / flat vector to an Image on `grid`."""
    if isinstance(x, Image):
        if x.grid != grid:
            raise ValueError("image grid does not match")
        return x
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape != (grid.n_side, grid.n_side):
            raise ValueError(
                f"expected image shape {(grid.n_side, grid.n_side)}, got {arr.shape}"
            )
        arr = arr.ravel()
    elif arr.ndim != 1 or arr.size != grid.n_pixels:
        raise ValueError(f"expected {grid.n_pixels} image entries, got {arr.size}")
    return Image(grid, arr)
