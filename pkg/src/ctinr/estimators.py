"""scikit-learn style reconstruction estimators.

Each estimator takes the acquisition geometry and hyperparameters in the
constructor, reconstructs in `fit(y)` (optionally with a ground-truth
image for logging or tuning), and exposes the result as `image_`, a
(n_side, n_side) array. The network-based estimators additionally offer
`predict(coords)`, evaluating the fitted network at arbitrary [0,1]^2
coordinates. `get_params`/`set_params`/`clone` work as usual.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .geometry import FanGeometry
from .inr import GridEvaluator, config_from_dict, init_inr
from .optim import LrSchedule, chambolle_pock_tv
from .recon import (
    DEFAULT_ADMM_LR,
    DEFAULT_ADMM_MU,
    DEFAULT_TAU0,
    admm_reconstruct,
    mse,
    train_inr,
)
from .sino_filter import fbp_reconstruct
from .validation import as_image, as_sinogram

DEFAULT_TV_LAMBDAS = tuple(np.geomspace(1e-2, 30.0, 8))


class FBPReconstructor(BaseEstimator):
    """Analytic baseline: ramp filtering followed by calibrated backprojection."""

    def __init__(self, geom: FanGeometry):
        self.geom = geom

    def fit(self, y, ground_truth=None):
        sino = as_sinogram(y, self.geom)
        self.image_ = fbp_reconstruct(sino).as_2d()
        return self

    def transform(self, y):
        if not hasattr(self, "image_"):
            raise NotFittedError("call fit before transform")
        return self.image_

    def fit_transform(self, y, ground_truth=None):
        return self.fit(y, ground_truth).image_


class TVReconstructor(BaseEstimator):
    """Total-variation regularized least squares (primal-dual solver).

    With `lam` set, reconstructs at that strength. Otherwise sweeps
    `lambdas` (8 logarithmic points by default) and keeps the strength
    with the smallest image MSE, which requires a ground-truth image.
    """

    def __init__(self, geom: FanGeometry, lam=None, lambdas=None, iters: int = 200):
        self.geom = geom
        self.lam = lam
        self.lambdas = lambdas
        self.iters = iters

    def fit(self, y, ground_truth=None):
        sino = as_sinogram(y, self.geom)
        if self.lam is not None:
            self.lambda_ = float(self.lam)
            self.image_ = chambolle_pock_tv(sino, self.geom, self.lambda_,
                                            self.iters).as_2d()
            return self
        if ground_truth is None:
            raise ValueError("tuning the TV strength requires a ground-truth image")
        truth = as_image(ground_truth, self.geom.grid)
        grid_values = self.lambdas if self.lambdas is not None else DEFAULT_TV_LAMBDAS
        best = None
        self.sweep_mses_ = []
        for lam in grid_values:
            recon = chambolle_pock_tv(sino, self.geom, float(lam), self.iters)
            err = mse(recon, truth)
            self.sweep_mses_.append((float(lam), err))
            if best is None or err < best[1]:
                best = (float(lam), err, recon)
        self.lambda_, self.mse_, recon = best
        self.image_ = recon.as_2d()
        return self

    def transform(self, y):
        if not hasattr(self, "image_"):
            raise NotFittedError("call fit before transform")
        return self.image_


class _NetworkReconstructor(BaseEstimator):
    """Shared predict/transform plumbing for the network-based estimators."""

    def predict(self, coords) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before predict")
        coords = np.asarray(coords, dtype=np.float64)
        ev = GridEvaluator(self.model_.arch, self.model_.config, coords)
        return ev.forward(self.model_.params)

    def transform(self, y):
        if not hasattr(self, "image_"):
            raise NotFittedError("call fit before transform")
        return self.image_

    def _make_model(self):
        config = config_from_dict(self.arch, dict(self.arch_options or {}))
        return init_inr(self.arch, config, self.seed)


class INRReconstructor(_NetworkReconstructor):
    """Coordinate network fitted to the sinogram by full-batch Adam.

    `loss="ls"` is the plain squared residual; `loss="fls"` preconditions
    the residual with the per-view ramp filter, which markedly improves
    the conditioning seen by the optimizer.
    """

    def __init__(self, geom: FanGeometry, arch: str = "relu_fourier",
                 loss: str = "fls", iters: int = 1000, tau0=None,
                 drop_at=None, seed: int = 0, arch_options=None):
        self.geom = geom
        self.arch = arch
        self.loss = loss
        self.iters = iters
        self.tau0 = tau0
        self.drop_at = drop_at
        self.seed = seed
        self.arch_options = arch_options

    def fit(self, y, ground_truth=None):
        sino = as_sinogram(y, self.geom)
        truth = None if ground_truth is None else as_image(ground_truth, self.geom.grid)
        tau0 = self.tau0 if self.tau0 is not None else DEFAULT_TAU0[self.arch]
        drop_at = self.drop_at if self.drop_at is not None else self.iters // 2
        schedule = LrSchedule(tau0=tau0, drop_at=drop_at)
        model = self._make_model()
        self.model_, self.log_ = train_inr(model, sino, self.geom, self.loss,
                                           schedule, self.iters, truth)
        ev = GridEvaluator(self.model_.arch, self.model_.config,
                           _grid_coords(self.geom))
        self.image_ = ev.forward(self.model_.params).reshape(
            self.geom.grid.n_side, self.geom.grid.n_side
        )
        return self


class ADMMReconstructor(_NetworkReconstructor):
    """Coordinate network fitted through variable splitting.

    A pixel image satisfies the data via warm-started CGLS while the
    network is refit to it in pixel space; scaled multipliers tie the two
    together. Per-architecture penalty and learning-rate defaults are
    used when not overridden.
    """

    def __init__(self, geom: FanGeometry, arch: str = "relu_fourier", mu=None,
                 outer: int = 20, adam_iters: int = 50, cgls_iters: int = 50,
                 adam_lr=None, seed: int = 0, arch_options=None):
        self.geom = geom
        self.arch = arch
        self.mu = mu
        self.outer = outer
        self.adam_iters = adam_iters
        self.cgls_iters = cgls_iters
        self.adam_lr = adam_lr
        self.seed = seed
        self.arch_options = arch_options

    def fit(self, y, ground_truth=None):
        sino = as_sinogram(y, self.geom)
        truth = None if ground_truth is None else as_image(ground_truth, self.geom.grid)
        mu = self.mu if self.mu is not None else DEFAULT_ADMM_MU[self.arch]
        lr = self.adam_lr if self.adam_lr is not None else DEFAULT_ADMM_LR[self.arch]
        model = self._make_model()
        self.model_, self.state_, self.log_ = admm_reconstruct(
            model, sino, self.geom, mu, self.outer, self.adam_iters, lr,
            self.cgls_iters, truth,
        )
        n = self.geom.grid.n_side
        self.image_ = self.state_.q.reshape(n, n).copy()
        return self


def _grid_coords(geom: FanGeometry) -> np.ndarray:
    from .geometry import make_grid_coords

    return make_grid_coords(geom.grid)
