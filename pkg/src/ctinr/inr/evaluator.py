"""Vectorized evaluation and exact reverse-mode gradients on a fixed
coordinate set.

A GridEvaluator owns everything about the coordinates that does not
depend on the parameters: the Fourier-feature embedding for relu_fourier
and the per-level corner indices and bilinear weights for the hash
encoding. Training loops therefore build one evaluator and reuse it.
"""

from dataclasses import dataclass

import numpy as np

from .configs import HASH_PRIMES, fourier_frequencies
from .model import INRModel, build_layout


def _hash_corner_plan(coords, resolution, table_size, direct):
    """Corner indices (n, 4) and bilinear weights (n, 4) for one level."""
    pos = coords * resolution
    cell = np.floor(pos).astype(np.int64)
    np.clip(cell, 0, resolution - 1, out=cell)
    frac = pos - cell
    wx, wy = frac[:, 0], frac[:, 1]
    weights = np.stack(
        [(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy], axis=1
    )
    corners_x = np.stack([cell[:, 0], cell[:, 0] + 1, cell[:, 0], cell[:, 0] + 1], axis=1)
    corners_y = np.stack([cell[:, 1], cell[:, 1], cell[:, 1] + 1, cell[:, 1] + 1], axis=1)
    if direct:
        idx = corners_y * (resolution + 1) + corners_x
    else:
        mixed = (corners_x.astype(np.uint64) * np.uint64(HASH_PRIMES[0])) ^ (
            corners_y.astype(np.uint64) * np.uint64(HASH_PRIMES[1])
        )
        idx = (mixed % np.uint64(table_size)).astype(np.int64)
    return idx.astype(np.intp), weights


class GridEvaluator:
    """Evaluate one architecture/config on a fixed (n, 2) coordinate array."""

    def __init__(self, arch, config, coords):
        coords = np.ascontiguousarray(coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError("coords must have shape (n, 2)")
        self.arch = arch
        self.config = config
        self.coords = coords
        self.n_points = coords.shape[0]
        self.layout, self.n_params = build_layout(arch, config)
        self._index = {name: (off, shape) for name, off, shape in self.layout}

        if arch == "relu_fourier":
            freqs = fourier_frequencies(config.k_max)
            phase = 2.0 * np.pi * coords @ freqs.T
            self._embed = np.concatenate([np.cos(phase), np.sin(phase)], axis=1)
            self._depth = config.depth
        elif arch == "siren":
            self._depth = config.depth
        elif arch == "hash":
            cap = 2**config.log2_table_size
            self._hash_plans = []
            for res, size in zip(config.level_resolutions(), config.level_table_sizes()):
                direct = (res + 1) ** 2 <= cap
                self._hash_plans.append(
                    _hash_corner_plan(coords, res, size, direct) + (size,)
                )
            self._depth = config.mlp_depth
        else:
            raise ValueError(f"unknown architecture {arch!r}")

    # -- parameter access -------------------------------------------------

    def _view(self, params, name):
        off, shape = self._index[name]
        return params[off : off + int(np.prod(shape))].reshape(shape)

    def _check_params(self, params):
        params = np.asarray(params, dtype=np.float64).ravel()
        if params.size != self.n_params:
            raise ValueError(
                f"expected {self.n_params} parameters, got {params.size}"
            )
        return params

    # -- input features ----------------------------------------------------

    def _input_features(self, params):
        if self.arch == "relu_fourier":
            return self._embed
        if self.arch == "siren":
            return self.coords
        feats = []
        for level, (idx, weights, _) in enumerate(self._hash_plans):
            table = self._view(params, f"table{level}")
            gathered = table[idx]  # (n, 4, F)
            feats.append(np.einsum("ncf,nc->nf", gathered, weights))
        return np.concatenate(feats, axis=1)

    def _activate(self, z):
        if self.arch == "siren":
            return np.sin(self.config.omega0 * z)
        return np.maximum(z, 0.0)

    def _activation_grad(self, z):
        if self.arch == "siren":
            w = self.config.omega0
            return w * np.cos(w * z)
        return (z > 0.0).astype(np.float64)

    # -- forward / backward -------------------------------------------------

    def forward(self, params, want_cache: bool = False):
        """Network values at every coordinate, shape (n,)."""
        params = self._check_params(params)
        h = self._input_features(params)
        hiddens = [h]
        preacts = []
        for layer in range(self._depth):
            z = h @ self._view(params, f"w{layer}") + self._view(params, f"b{layer}")
            preacts.append(z)
            h = self._activate(z)
            hiddens.append(h)
        out_layer = self._depth
        values = (h @ self._view(params, f"w{out_layer}"))[:, 0] + self._view(
            params, f"b{out_layer}"
        )[0]
        if not want_cache:
            return values
        return values, (params, hiddens, preacts)

    def backward(self, cache, upstream):
        """Gradient of <upstream, forward(params)> with respect to params."""
        params, hiddens, preacts = cache
        upstream = np.asarray(upstream, dtype=np.float64).ravel()
        if upstream.size != self.n_points:
            raise ValueError("upstream length must match the coordinate count")
        grad = np.zeros(self.n_params)
        out_layer = self._depth
        w_out = self._view(params, f"w{out_layer}")
        self._view(grad, f"w{out_layer}")[:, 0] = hiddens[-1].T @ upstream
        self._view(grad, f"b{out_layer}")[0] = upstream.sum()
        dh = upstream[:, None] * w_out[:, 0][None, :]
        for layer in range(self._depth - 1, -1, -1):
            dz = dh * self._activation_grad(preacts[layer])
            self._view(grad, f"w{layer}")[:] = hiddens[layer].T @ dz
            self._view(grad, f"b{layer}")[:] = dz.sum(axis=0)
            if layer > 0 or self.arch == "hash":  # inputs are constant otherwise
                dh = dz @ self._view(params, f"w{layer}").T
        if self.arch == "hash":
            self._backward_tables(grad, dh)
        return grad

    def _backward_tables(self, grad, dfeat):
        n_feat = self.config.features_per_entry
        for level, (idx, weights, size) in enumerate(self._hash_plans):
            dlevel = dfeat[:, level * n_feat : (level + 1) * n_feat]
            target = self._view(grad, f"table{level}").ravel()
            slots = np.arange(n_feat)[None, :]
            for corner in range(4):
                contrib = dlevel * weights[:, corner, None]
                flat = idx[:, corner, None] * n_feat + slots
                target += np.bincount(
                    flat.ravel(), weights=contrib.ravel(), minlength=size * n_feat
                )

    def features(self, params) -> np.ndarray:
        """Penultimate-layer activations over the coordinates, shape (n, width)."""
        params = self._check_params(params)
        h = self._input_features(params)
        for layer in range(self._depth):
            h = self._activate(
                h @ self._view(params, f"w{layer}") + self._view(params, f"b{layer}")
            )
        return h


@dataclass
class FeatureMatrix:
    """Grid evaluations of the penultimate features; values = matrix @ weights + bias."""

    n_points: int
    width: int
    matrix: np.ndarray
    last_layer_weights: np.ndarray
    bias: float


def evaluate_grid(model: INRModel, coords) -> np.ndarray:
    """Rasterize the network: value at every coordinate, in storage order."""
    return GridEvaluator(model.arch, model.config, coords).forward(model.params)


def backprop_grid(model: INRModel, coords, upstream) -> np.ndarray:
    """Exact gradient of <upstream, rasterization> over the flat parameters."""
    ev = GridEvaluator(model.arch, model.config, coords)
    _, cache = ev.forward(model.params, want_cache=True)
    return ev.backward(cache, upstream)


def feature_matrix(model: INRModel, coords) -> FeatureMatrix:
    ev = GridEvaluator(model.arch, model.config, coords)
    matrix = ev.features(model.params)
    out_layer = ev._depth
    return FeatureMatrix(
        n_points=matrix.shape[0],
        width=matrix.shape[1],
        matrix=matrix,
        last_layer_weights=ev._view(model.params, f"w{out_layer}")[:, 0].copy(),
        bias=float(ev._view(model.params, f"b{out_layer}")[0]),
    )
