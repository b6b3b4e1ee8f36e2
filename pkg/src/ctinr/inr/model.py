"""Flat parameter vectors with a named layout, and seeded initialization.

The layout is a list of (name, offset, shape) triples covering the whole
vector in order; `INRModel.view` returns writable views into it, so the
optimizers can update the flat vector and evaluation sees the change.
Initialization draws follow layout order (zero-initialized tensors
consume no randomness), which pins the bit pattern for a given seed.
"""

from dataclasses import dataclass

import numpy as np

from .configs import (
    ARCHITECTURES,
    HashConfig,
    ReluFourierConfig,
    SirenConfig,
    config_from_dict,
    fourier_frequencies,
)


def _mlp_shapes(in_dim: int, width: int, depth: int):
    """Weight/bias shapes for `depth` hidden layers plus the linear output."""
    dims = [in_dim] + [width] * depth + [1]
    shapes = []
    for layer, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        shapes.append((f"w{layer}", (fan_in, fan_out)))
        shapes.append((f"b{layer}", (fan_out,)))
    return shapes


def build_layout(arch: str, config):
    """Return (layout, total_size) for the architecture."""
    shapes = []
    if arch == "relu_fourier":
        in_dim = 2 * len(fourier_frequencies(config.k_max))
        shapes += _mlp_shapes(in_dim, config.width, config.depth)
    elif arch == "siren":
        shapes += _mlp_shapes(2, config.width, config.depth)
    elif arch == "hash":
        for level, size in enumerate(config.level_table_sizes()):
            shapes.append((f"table{level}", (size, config.features_per_entry)))
        in_dim = config.levels * config.features_per_entry
        shapes += _mlp_shapes(in_dim, config.mlp_width, config.mlp_depth)
    else:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
    layout = []
    offset = 0
    for name, shape in shapes:
        layout.append((name, offset, shape))
        offset += int(np.prod(shape))
    return layout, offset


@dataclass
class INRModel:
    arch: str
    config: object
    params: np.ndarray
    layout: list

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64).ravel()
        expected = self.layout[-1][1] + int(np.prod(self.layout[-1][2]))
        if self.params.size != expected:
            raise ValueError(
                f"parameter vector has {self.params.size} entries, layout needs {expected}"
            )
        if not np.all(np.isfinite(self.params)):
            raise ValueError("parameters contain non-finite entries")

    @property
    def n_params(self) -> int:
        return self.params.size

    def view(self, name: str) -> np.ndarray:
        """Writable view of one tensor in the flat vector."""
        for entry, offset, shape in self.layout:
            if entry == name:
                size = int(np.prod(shape))
                return self.params[offset : offset + size].reshape(shape)
        raise KeyError(name)

    def copy(self) -> "INRModel":
        return INRModel(self.arch, self.config, self.params.copy(), self.layout)


def _kaiming_uniform(rng, shape):
    bound = np.sqrt(6.0 / shape[0])
    return rng.uniform(-bound, bound, size=shape)


def init_inr(arch: str, config, seed: int) -> INRModel:
    """Seeded initialization.

    relu_fourier and the hash MLP use Kaiming-uniform weights with zero
    biases; siren uses U(-1/fan_in, 1/fan_in) on the first layer and
    U(+-sqrt(6/fan_in)/omega0) on every later layer (output included),
    zero biases; hash table entries start at U(-1e-4, 1e-4).
    """
    layout, total = build_layout(arch, config)
    params = np.zeros(total)
    model = INRModel(arch=arch, config=config, params=params, layout=layout)
    rng = np.random.Generator(np.random.PCG64(seed))
    for name, _, shape in layout:
        if name.startswith("b"):
            continue  # biases stay zero
        view = model.view(name)
        if name.startswith("table"):
            view[:] = rng.uniform(-1e-4, 1e-4, size=shape)
        elif arch == "siren":
            if name == "w0":
                view[:] = rng.uniform(-1.0 / shape[0], 1.0 / shape[0], size=shape)
            else:
                bound = np.sqrt(6.0 / shape[0]) / config.omega0
                view[:] = rng.uniform(-bound, bound, size=shape)
        else:
            view[:] = _kaiming_uniform(rng, shape)
    return model


def make_config(arch: str, **overrides):
    return config_from_dict(arch, overrides) if overrides else config_from_dict(arch, {})
