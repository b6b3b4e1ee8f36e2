"""Independent oracles shared across test modules.

Everything here is deliberately written with naive loops or dense linear
algebra, independent of the library's vectorized paths.
"""

import numpy as np

from ctinr.geometry import FanGeometry
from ctinr.projector import Image, Sinogram, forward_project


def dense_system_matrix(geom: FanGeometry) -> np.ndarray:
    """Assemble the projection matrix column by column from basis images."""
    n = geom.grid.n_pixels
    matrix = np.empty((geom.n_rays, n))
    basis = np.zeros(n)
    for j in range(n):
        basis[j] = 1.0
        matrix[:, j] = forward_project(Image(geom.grid, basis), geom).data
        basis[j] = 0.0
    return matrix


def bilinear_sample(img2d: np.ndarray, ps: float, points: np.ndarray) -> np.ndarray:
    """Bilinear interpolation on pixel centers; zero outside the grid."""
    n = img2d.shape[0]
    fx = points[:, 0] / ps - 0.5
    fy = points[:, 1] / ps - 0.5
    ix = np.floor(fx).astype(int)
    iy = np.floor(fy).astype(int)
    wx = fx - ix
    wy = fy - iy
    out = np.zeros(len(points))
    for dx, dy in ((0, 0), (1, 0), (0, 1), (1, 1)):
        jx = ix + dx
        jy = iy + dy
        valid = (jx >= 0) & (jx < n) & (jy >= 0) & (jy < n)
        weight = (wx if dx else 1 - wx) * (wy if dy else 1 - wy)
        out[valid] += weight[valid] * img2d[jy[valid], jx[valid]]
    return out


def riemann_line_integral(img: Image, src: np.ndarray, target: np.ndarray,
                          step_fraction: float = 0.02) -> float:
    """Fine Riemann sum of the bilinearly interpolated image along a ray."""
    ps = img.grid.pixel_size
    direction = target - src
    length = np.linalg.norm(direction)
    step = step_fraction * ps
    n_steps = int(np.ceil(length / step))
    ts = (np.arange(n_steps) + 0.5) / n_steps
    points = src[None, :] + ts[:, None] * direction[None, :]
    samples = bilinear_sample(img.as_2d(), ps, points)
    return float(samples.sum() * length / n_steps)


def scalar_mlp_reference(model, coord):
    """Single-coordinate network evaluation with plain Python loops."""
    from ctinr.inr import fourier_frequencies

    if model.arch == "relu_fourier":
        freqs = fourier_frequencies(model.config.k_max)
        phases = [2.0 * np.pi * (k[0] * coord[0] + k[1] * coord[1]) for k in freqs]
        h = np.array([np.cos(p) for p in phases] + [np.sin(p) for p in phases])
        depth = model.config.depth
        activation = lambda z: np.maximum(z, 0.0)
    elif model.arch == "siren":
        h = np.asarray(coord, dtype=np.float64)
        depth = model.config.depth
        omega = model.config.omega0
        activation = lambda z: np.sin(omega * z)
    else:
        raise NotImplementedError("reference evaluator covers the MLP architectures")
    for layer in range(depth):
        w = model.view(f"w{layer}")
        b = model.view(f"b{layer}")
        h = activation(h @ w + b)
    return float((h @ model.view(f"w{depth}"))[0] + model.view(f"b{depth}")[0])


def adam_reference(params, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Textbook Adam recursion, accumulated step by step."""
    p = params.astype(np.float64).copy()
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        p = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return p


def poisson_post_log_mean(rate: float, incident: float) -> float:
    """Exact expectation of the log-transformed Poisson draw by enumeration."""
    width = max(10.0 * np.sqrt(rate), 20.0)
    lo = max(0, int(rate - width))
    hi = int(rate + width) + 1
    ks = np.arange(lo, hi)
    # log pmf for numerical stability: k ln(rate) - rate - ln(k!)
    from math import lgamma

    log_pmf = ks * np.log(rate) - rate - np.array([lgamma(k + 1) for k in ks])
    pmf = np.exp(log_pmf)
    values = -np.log(np.maximum(ks, 0.5) / incident)
    return float((pmf * values).sum() / pmf.sum())
