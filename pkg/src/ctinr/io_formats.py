"""Bit-exact file formats: rasters, PNG export, checkpoints, CSV logs.

Raster format (".raster"), little-endian throughout:

    bytes 0..7    magic  b"CTRASTR1"
    byte  8       dtype marker: 0x01 = float64 little-endian
    bytes 9..16   rows, uint32 LE, then cols, uint32 LE
    bytes 17..    payload, rows*cols float64 LE, row-major

Checkpoint format (".ckpt"):

    bytes 0..7    magic  b"CTINRCK1"
    bytes 8..11   header length H, uint32 LE
    bytes 12..    H bytes of UTF-8 JSON: {"arch", "config", "layout",
                  "param_count"}; layout is a list of
                  [name, offset, shape] entries covering the flat vector
    then          param_count float64 LE

Both formats round-trip bit-identically.
"""

import json
import struct

import numpy as np
from PIL import Image as PILImage

from .geometry import FanGeometry, GridSpec
from .projector import Image, Sinogram

RASTER_MAGIC = b"CTRASTR1"
CHECKPOINT_MAGIC = b"CTINRCK1"
DTYPE_FLOAT64_LE = 0x01
MAX_DIM = 2**24  # guards rows*cols*8 against size_t games on read


class RasterFormatError(Exception):
    """Base class for malformed raster files."""


class BadMagicError(RasterFormatError):
    pass


class TruncatedPayloadError(RasterFormatError):
    pass


class DimensionError(RasterFormatError):
    pass


def _payload_2d(obj) -> np.ndarray:
    if isinstance(obj, Image):
        return obj.as_2d()
    if isinstance(obj, Sinogram):
        return obj.as_2d()
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError("raster payload must be 2-dimensional")
    return arr


def write_raster(path, obj) -> None:
    """Write an Image, Sinogram, or 2D array; see module docstring for layout."""
    arr = _payload_2d(obj)
    rows, cols = arr.shape
    if rows == 0 or cols == 0:
        raise DimensionError("zero-sized raster rejected")
    if rows > MAX_DIM or cols > MAX_DIM:
        raise DimensionError(f"raster dimension exceeds {MAX_DIM}")
    with open(path, "wb") as fh:
        fh.write(RASTER_MAGIC)
        fh.write(struct.pack("<BII", DTYPE_FLOAT64_LE, rows, cols))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_raster(path, grid: GridSpec | None = None, geom: FanGeometry | None = None):
    """Read a raster file back.

    Returns a plain (rows, cols) float64 array; pass `grid` or `geom` to
    get a typed Image or Sinogram validated against it (the file itself
    carries no physical metadata).
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 17 or blob[:8] != RASTER_MAGIC:
        raise BadMagicError(f"{path}: not a raster file")
    marker, rows, cols = struct.unpack("<BII", blob[8:17])
    if marker != DTYPE_FLOAT64_LE:
        raise BadMagicError(f"{path}: unknown dtype marker {marker:#x}")
    if rows == 0 or cols == 0 or rows > MAX_DIM or cols > MAX_DIM:
        raise DimensionError(f"{path}: bad dimensions {rows}x{cols}")
    expected = rows * cols * 8
    if len(blob) - 17 < expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(blob) - 17} bytes, expected {expected}"
        )
    arr = np.frombuffer(blob[17 : 17 + expected], dtype="<f8").reshape(rows, cols)
    arr = arr.astype(np.float64, copy=True)
    if geom is not None:
        if (rows, cols) != (geom.n_views, geom.n_det):
            raise DimensionError(
                f"{path}: {rows}x{cols} does not match geometry "
                f"{geom.n_views}x{geom.n_det}"
            )
        return Sinogram(geom, arr.ravel())
    if grid is not None:
        if (rows, cols) != (grid.n_side, grid.n_side):
            raise DimensionError(
                f"{path}: {rows}x{cols} does not match grid {grid.n_side}^2"
            )
        return Image(grid, arr.ravel())
    return arr


def export_png(path, img, window: tuple) -> None:
    """Linear grayscale windowing to 8 bits (round-half-even: midpoint -> 128)."""
    lo, hi = window
    if not lo < hi:
        raise ValueError(f"invalid window: need lo < hi, got ({lo}, {hi})")
    arr = _payload_2d(img)
    scaled = np.clip((arr - lo) / (hi - lo), 0.0, 1.0) * 255.0
    levels = np.round(scaled).astype(np.uint8)
    PILImage.fromarray(levels, mode="L").save(path, format="PNG")


def write_checkpoint(path, model) -> None:
    """Write an INR model; see module docstring for the exact layout."""
    header = {
        "arch": model.arch,
        "config": model.config.to_dict(),
        "layout": [[name, int(off), list(shape)] for name, off, shape in model.layout],
        "param_count": int(model.params.size),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(model.params, dtype="<f8").tobytes())


def read_checkpoint(path):
    """Read a checkpoint written by :func:`write_checkpoint`."""
    from .inr import INRModel, config_from_dict

    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:8] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<I", blob[8:12])
    if len(blob) < 12 + hlen:
        raise TruncatedPayloadError(f"{path}: truncated header")
    header = json.loads(blob[12 : 12 + hlen].decode("utf-8"))
    count = int(header["param_count"])
    expected = count * 8
    payload = blob[12 + hlen :]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    params = np.frombuffer(payload[:expected], dtype="<f8").astype(np.float64, copy=True)
    config = config_from_dict(header["arch"], header["config"])
    layout = [(name, int(off), tuple(shape)) for name, off, shape in header["layout"]]
    return INRModel(arch=header["arch"], config=config, params=params, layout=layout)


def write_train_log_csv(path, log, include_timing: bool = False) -> None:
    """TrainLog rows as CSV. Timing is zeroed unless requested so that
    identical runs produce byte-identical files."""
    lines = ["iter,loss,mse,seconds"]
    for rec in log.records:
        seconds = rec.seconds if include_timing else 0.0
        lines.append(f"{rec.iteration},{rec.loss!r},{rec.mse!r},{seconds!r}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_residual_csv(path, state) -> None:
    """ADMM primal/dual residual history, one row per outer iteration."""
    lines = ["outer,primal,dual"]
    for k, (pr, du) in enumerate(zip(state.primal_residuals, state.dual_residuals), 1):
        lines.append(f"{k},{pr!r},{du!r}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_condition_csv(path, report) -> None:
    """Per-seed condition numbers plus mean/std summary rows."""
    lines = ["seed,kappa_ls,kappa_fls,ratio"]
    for row in report.rows:
        lines.append(f"{row.seed},{row.kappa_ls!r},{row.kappa_fls!r},{row.ratio!r}")
    lines.append(f"mean,{report.mean_kappa_ls!r},{report.mean_kappa_fls!r},{report.mean_ratio!r}")
    lines.append(f"std,{report.std_kappa_ls!r},{report.std_kappa_fls!r},{report.std_ratio!r}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
