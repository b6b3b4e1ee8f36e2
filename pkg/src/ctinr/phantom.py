"""Synthetic breast-like phantom, fine-grid data simulation, transmission noise.

The phantom is built analytically (skin ring, adipose background,
fibroglandular ellipses, calcification disks) and evaluated at smoothly
warped coordinates so the outer boundary is non-circular; a band-limited
multiplicative texture is applied to the soft tissues. Data is simulated
by projecting the phantom rasterized on a finer grid than the one used
for reconstruction, so the reconstruction operator never exactly matches
the data (no inverse crime).
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .geometry import FanGeometry, GridSpec, make_grid_coords
from .projector import Image, Sinogram, forward_project

WARP_FREQUENCY = 2          # cycles across the frame
MAX_WARP_AMPLITUDE = 0.07   # keeps the warp Lipschitz < 1, hence bijective
TEXTURE_CUTOFF_CYCLES = 24  # band limit of the texture field


@dataclass(frozen=True)
class TissueEllipse:
    """Ellipse in normalized [0,1]^2 coordinates: center, semi-axes, tilt, value."""

    center: tuple
    axes: tuple
    angle: float
    value: float


@dataclass(frozen=True)
class CalcificationDisk:
    center: tuple
    radius: float
    value: float


@dataclass(frozen=True)
class PhantomConfig:
    seed: int = 0
    n_hi: int = 2048
    fov: float = 100.0
    breast_radius: float = 0.42
    skin_thickness: float = 0.012
    skin_value: float = 0.0245
    adipose_value: float = 0.0193
    fibro_ellipses: tuple = field(default_factory=tuple)
    calcifications: tuple = field(default_factory=tuple)
    texture_amplitude: float = 0.15
    deformation_amplitude: float = 0.02

    def __post_init__(self):
        values = [self.skin_value, self.adipose_value]
        values += [e.value for e in self.fibro_ellipses]
        values += [c.value for c in self.calcifications]
        if any(v < 0 for v in values):
            raise ValueError("attenuation values must be non-negative")
        if not 0.0 <= self.texture_amplitude < 1.0:
            raise ValueError("texture_amplitude must lie in [0, 1)")
        if not 0.0 <= self.deformation_amplitude <= MAX_WARP_AMPLITUDE:
            raise ValueError(
                f"deformation_amplitude must lie in [0, {MAX_WARP_AMPLITUDE}]"
            )
        if self.n_hi < 1 or self.fov <= 0:
            raise ValueError("n_hi and fov must be positive")


# Curated structural defaults; placements stay well inside the breast disk.
DEFAULT_FIBRO_ELLIPSES = (
    TissueEllipse((0.43, 0.55), (0.16, 0.09), 0.5, 0.0233),
    TissueEllipse((0.60, 0.42), (0.10, 0.06), -0.9, 0.0233),
    TissueEllipse((0.52, 0.64), (0.07, 0.05), 1.2, 0.0233),
    TissueEllipse((0.36, 0.38), (0.08, 0.045), 0.2, 0.0233),
    TissueEllipse((0.64, 0.58), (0.05, 0.035), -0.4, 0.0233),
    TissueEllipse((0.47, 0.33), (0.055, 0.03), 2.1, 0.0233),
)

DEFAULT_CALCIFICATIONS = (
    CalcificationDisk((0.455, 0.52), 0.006, 0.06),
    CalcificationDisk((0.58, 0.47), 0.004, 0.06),
    CalcificationDisk((0.50, 0.60), 0.0035, 0.06),
    CalcificationDisk((0.40, 0.45), 0.005, 0.06),
)


def default_phantom_config(seed: int = 0, n_hi: int = 2048, fov: float = 100.0,
                           **overrides) -> PhantomConfig:
    kwargs = dict(
        seed=seed,
        n_hi=n_hi,
        fov=fov,
        fibro_ellipses=DEFAULT_FIBRO_ELLIPSES,
        calcifications=DEFAULT_CALCIFICATIONS,
    )
    kwargs.update(overrides)
    return PhantomConfig(**kwargs)


@dataclass(frozen=True)
class NoiseConfig:
    """Transmission Poisson noise with the photon budget split evenly over rays."""

    total_photons: float = 32e10
    seed: int = 0

    def __post_init__(self):
        if not self.total_photons > 0:
            raise ValueError("total_photons must be positive")


def _warp(coords: np.ndarray, amplitude: float, phases: np.ndarray) -> np.ndarray:
    """Smooth sinusoidal displacement; bounded amplitude keeps it bijective."""
    w = 2.0 * math.pi * WARP_FREQUENCY
    out = coords.copy()
    out[:, 0] += amplitude * np.sin(w * coords[:, 1] + phases[0])
    out[:, 1] += amplitude * np.sin(w * coords[:, 0] + phases[1])
    return out


def _texture_field(n: int, rng: np.random.Generator) -> np.ndarray:
    """Band-limited pseudo-random field on the n x n grid, scaled to max |.| = 1."""
    white = rng.standard_normal((n, n))
    spectrum = np.fft.rfft2(white)
    fy = np.fft.fftfreq(n, d=1.0 / n)[:, None]
    fx = np.fft.rfftfreq(n, d=1.0 / n)[None, :]
    spectrum[fy * fy + fx * fx > TEXTURE_CUTOFF_CYCLES**2] = 0.0
    band = np.fft.irfft2(spectrum, s=(n, n))
    return band / np.abs(band).max()


def generate_phantom(cfg: PhantomConfig) -> Image:
    """Rasterize the phantom on its n_hi grid; deterministic in cfg.seed."""
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    phases = rng.uniform(0.0, 2.0 * math.pi, size=2)
    grid = GridSpec(cfg.n_hi, cfg.fov)
    coords = make_grid_coords(grid)
    warped = _warp(coords, cfg.deformation_amplitude, phases)

    center = np.array([0.5, 0.5])
    radial = np.linalg.norm(warped - center[None, :], axis=1)
    inside_breast = radial <= cfg.breast_radius
    interior = radial <= cfg.breast_radius - cfg.skin_thickness
    skin = inside_breast & ~interior

    values = np.zeros(grid.n_pixels)
    values[skin] = cfg.skin_value
    values[interior] = cfg.adipose_value

    soft = interior.copy()
    for ell in cfg.fibro_ellipses:
        rel = warped - np.asarray(ell.center)[None, :]
        c, s = math.cos(ell.angle), math.sin(ell.angle)
        local_u = rel[:, 0] * c + rel[:, 1] * s
        local_v = -rel[:, 0] * s + rel[:, 1] * c
        inside = (local_u / ell.axes[0]) ** 2 + (local_v / ell.axes[1]) ** 2 <= 1.0
        values[inside & interior] = ell.value

    if cfg.texture_amplitude > 0.0:
        texture = _texture_field(cfg.n_hi, rng).ravel()
        values[soft] *= 1.0 + cfg.texture_amplitude * texture[soft]

    for calc in cfg.calcifications:
        rel = warped - np.asarray(calc.center)[None, :]
        inside = np.linalg.norm(rel, axis=1) <= calc.radius
        values[inside & interior] = calc.value

    return Image(grid, values)


def simulate_sinogram(phantom_hi: Image, geom: FanGeometry) -> Sinogram:
    """Project the fine-grid phantom along the exact rays of `geom`.

    The returned sinogram is bound to the reconstruction geometry, so it
    only differs from reconstruction-grid projections by discretization.
    """
    hi, lo = phantom_hi.grid, geom.grid
    if hi.fov != lo.fov:
        raise ValueError("phantom and geometry must share the same fov")
    if hi.n_side % lo.n_side != 0 or hi.n_side // lo.n_side < 2:
        raise ValueError(
            f"phantom side {hi.n_side} must be an integer multiple (>=2) "
            f"of the reconstruction side {lo.n_side}"
        )
    geom_hi = FanGeometry(
        n_views=geom.n_views,
        n_det=geom.n_det,
        angles=geom.angles,
        source_to_iso=geom.source_to_iso,
        source_to_det=geom.source_to_det,
        det_spacing=geom.det_spacing,
        grid=hi,
    )
    return Sinogram(geom, forward_project(phantom_hi, geom_hi).data)


def downsample_image(hi: Image, factor: int) -> Image:
    """Block-average by an integer factor."""
    n = hi.grid.n_side
    if factor < 1 or n % factor != 0:
        raise ValueError(f"factor {factor} does not divide side {n}")
    lo = n // factor
    blocks = hi.as_2d().reshape(lo, factor, lo, factor)
    return Image(GridSpec(lo, hi.grid.fov), blocks.mean(axis=(1, 3)).ravel())


def add_poisson_noise(sino: Sinogram, noise: NoiseConfig) -> Sinogram:
    """Poisson noise in transmission space; zero counts clamp to half a count."""
    if np.any(sino.data < 0):
        raise ValueError("sinogram entries must be non-negative line integrals")
    incident = noise.total_photons / sino.geom.n_rays
    rng = np.random.Generator(np.random.Philox(noise.seed))
    counts = rng.poisson(incident * np.exp(-sino.data)).astype(np.float64)
    noisy = -np.log(np.maximum(counts, 0.5) / incident)
    return Sinogram(sino.geom, noisy)
