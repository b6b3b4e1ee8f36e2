"""Architecture configurations for the coordinate networks.

All three architectures map [0,1]^2 coordinates to a scalar attenuation
value through a linear final layer, which is what makes the penultimate
feature matrix well-defined.
"""

from dataclasses import dataclass, asdict
import math

import numpy as np

# Multipliers of the spatial hash (one per input dimension), mixed by XOR.
HASH_PRIMES = (1, 2654435761, 805459861)


@dataclass(frozen=True)
class ReluFourierConfig:
    """ReLU MLP on a Fourier-feature embedding of the coordinates."""

    depth: int = 6
    width: int = 256
    k_max: int = 15

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SirenConfig:
    """Sinusoidal network, frequency scale applied in every layer."""

    depth: int = 6
    width: int = 256
    omega0: float = 75.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HashConfig:
    """Multiresolution hash encoding feeding a ReLU MLP."""

    log2_table_size: int = 23
    levels: int = 16
    features_per_entry: int = 2
    n_min: int = 16
    n_max: int = 256
    mlp_depth: int = 6
    mlp_width: int = 128

    def to_dict(self) -> dict:
        return asdict(self)

    def level_resolutions(self) -> list:
        """Per-level grid resolutions, geometric from n_min to n_max."""
        if self.levels == 1:
            return [self.n_min]
        growth = math.exp((math.log(self.n_max) - math.log(self.n_min)) / (self.levels - 1))
        return [int(math.floor(self.n_min * growth**level + 1e-9))
                for level in range(self.levels)]

    def level_table_sizes(self) -> list:
        """Entries per level: direct vertex count, capped by the hash table size."""
        cap = 2**self.log2_table_size
        return [min((res + 1) ** 2, cap) for res in self.level_resolutions()]


_CONFIG_CLASSES = {
    "relu_fourier": ReluFourierConfig,
    "siren": SirenConfig,
    "hash": HashConfig,
}

ARCHITECTURES = tuple(_CONFIG_CLASSES)


def config_from_dict(arch: str, values: dict):
    if arch not in _CONFIG_CLASSES:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
    return _CONFIG_CLASSES[arch](**values)


def fourier_frequencies(k_max: int) -> np.ndarray:
    """Integer frequency half-lattice with norm <= k_max, shape (n_freq, 2).

    Keeps k = 0 and exactly one of each +-k pair (the one with ky > 0, or
    ky == 0 and kx >= 0): cosine is even and sine odd in k, so the mirror
    features would duplicate columns of the embedding up to sign.
    """
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    freqs = []
    for ky in range(0, k_max + 1):
        for kx in range(-k_max, k_max + 1):
            if kx * kx + ky * ky <= k_max * k_max and (ky > 0 or kx >= 0):
                freqs.append((kx, ky))
    return np.array(freqs, dtype=np.float64)
