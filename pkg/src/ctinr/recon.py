"""Reconstruction drivers: LS/FLS training, ADMM, metrics, conditioning study.

Iteration accounting convention used throughout: one "iteration" is one
matrix-vector product each with the projector and its adjoint. A gradient
step on the LS or FLS loss costs exactly one; an ADMM outer iteration
costs its CGLS budget (the pixel-space network fit inside ADMM performs
no projections).
"""

from dataclasses import dataclass, field
import time

import numpy as np

from .geometry import FanGeometry, make_grid_coords
from .inr import GridEvaluator, INRModel, feature_matrix, init_inr
from .optim import AdamState, LrSchedule, NonFiniteError, adam_step, cgls_regularized
from .projector import Image, Sinogram, back_project, forward_project
from .sino_filter import half_ramp_apply, ramp_apply, ramp_filter_for

LOSS_KINDS = ("ls", "fls")

# Per-architecture method defaults.
DEFAULT_TAU0 = {"relu_fourier": 1e-3, "siren": 1e-4, "hash": 1e-4}
DEFAULT_ADMM_LR = {"relu_fourier": 1e-4, "siren": 1e-4, "hash": 1e-3}
DEFAULT_ADMM_MU = {"relu_fourier": 1.0, "siren": 3.0, "hash": 2.5}

# Smallest-to-largest singular value threshold below which a matrix is
# treated as rank deficient.
RANK_TOLERANCE = 1e-12


@dataclass
class TrainRecord:
    iteration: int   # cumulative matvec pairs
    loss: float      # objective at the iterate the step was taken from
    mse: float       # image MSE after the step (NaN without ground truth)
    seconds: float   # cumulative wall time


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    def append(self, record: TrainRecord):
        if self.records and record.iteration <= self.records[-1].iteration:
            raise ValueError("iteration indices must be strictly increasing")
        self.records.append(record)

    def iterations(self) -> np.ndarray:
        return np.array([r.iteration for r in self.records])

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def mses(self) -> np.ndarray:
        return np.array([r.mse for r in self.records])


def mse(x: Image, x_star: Image) -> float:
    """Mean squared pixel difference."""
    if x.grid != x_star.grid:
        raise ValueError("images live on different grids")
    diff = x.data - x_star.data
    return float(diff @ diff) / x.grid.n_pixels


def loss_and_grad(model: INRModel, sino: Sinogram, geom: FanGeometry,
                  loss_kind: str):
    """Objective and exact parameter gradient; one projection pair per call.

    "ls" is the plain squared residual norm; "fls" weighs the residual by
    the per-view ramp filter, equivalently the squared norm of the
    half-filtered residual.
    """
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
    ev = GridEvaluator(model.arch, model.config, make_grid_coords(geom.grid))
    filt = ramp_filter_for(geom) if loss_kind == "fls" else None
    loss, grad, _ = _loss_and_grad_core(ev, model.params, sino, geom, loss_kind, filt)
    return loss, grad


def _loss_and_grad_core(ev, params, sino, geom, loss_kind, filt):
    values, cache = ev.forward(params, want_cache=True)
    projected = forward_project(Image(geom.grid, values), geom)
    residual = Sinogram(geom, projected.data - sino.data)
    with np.errstate(over="ignore"):  # overflow surfaces as the error below
        if loss_kind == "ls":
            weighted = residual
            loss = float(residual.data @ residual.data)
        else:
            weighted = ramp_apply(residual, filt)
            loss = float(residual.data @ weighted.data)
    if not np.isfinite(loss):
        raise NonFiniteError(
            f"{loss_kind} loss is not finite "
            f"(|values| max {np.abs(values).max():.3e})"
        )
    pixel_grad = 2.0 * back_project(weighted, geom).data
    grad = ev.backward(cache, pixel_grad)
    return loss, grad, values


def train_inr(model: INRModel, sino: Sinogram, geom: FanGeometry, loss_kind: str,
              schedule: LrSchedule, iters: int, ground_truth: Image | None = None):
    """Full-batch Adam on the chosen loss. Returns (trained model, TrainLog).

    Record k holds the loss at the iterate the k-th step was taken from
    and the image MSE after that step.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
    ev = GridEvaluator(model.arch, model.config, make_grid_coords(geom.grid))
    filt = ramp_filter_for(geom) if loss_kind == "fls" else None
    params = model.params.copy()
    state = AdamState.init(params.size)
    log = TrainLog()
    start = time.perf_counter()

    def image_mse(values):
        if ground_truth is None:
            return float("nan")
        return mse(Image(geom.grid, values), ground_truth)

    pending = None
    for t in range(iters):
        loss, grad, values = _loss_and_grad_core(ev, params, sino, geom, loss_kind, filt)
        if pending is not None:
            pending.mse = image_mse(values)
            log.append(pending)
        state, params = adam_step(state, params, grad, schedule.lr(t))
        pending = TrainRecord(iteration=t + 1, loss=loss, mse=float("nan"),
                              seconds=time.perf_counter() - start)
    pending.mse = image_mse(ev.forward(params))
    log.append(pending)
    trained = INRModel(model.arch, model.config, params, model.layout)
    return trained, log


@dataclass
class ADMMState:
    x: np.ndarray
    q: np.ndarray
    u: np.ndarray
    mu: float
    primal_residuals: list = field(default_factory=list)
    dual_residuals: list = field(default_factory=list)
    n_forward: int = 0
    n_adjoint: int = 0
    aborted: bool = False
    history: list | None = None


def admm_reconstruct(model: INRModel, sino: Sinogram, geom: FanGeometry, mu: float,
                     outer: int, adam_iters: int, adam_lr: float, cgls_iters: int,
                     ground_truth: Image | None = None,
                     apply_forward=None, apply_adjoint=None,
                     keep_history: bool = False):
    """Variable-splitting reconstruction: the pixel image x satisfies the
    data through CGLS, the network chases x + u in pixel space, and the
    scaled multipliers u accumulate the gap.

    Per outer iteration: (1) x-update solving
    min_x 0.5||Px - y||^2 + mu/2 ||x - (q - u)||^2 with warm-started CGLS;
    (2) adam_iters Adam steps on ||network - (x + u)||^2 (no projections);
    (3) q = rasterized network; (4) u += x - q. The log is indexed by
    cumulative CGLS matvec pairs; the dual residual uses the scaled form
    mu * ||q_new - q_old||.

    Returns (model, ADMMState, TrainLog). Non-finite iterates abort the
    loop, returning the last valid state with `aborted` set.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if outer < 1 or adam_iters < 1 or cgls_iters < 1:
        raise ValueError("outer, adam_iters, and cgls_iters must be >= 1")
    if apply_forward is None:
        def apply_forward(z):
            return forward_project(Image(geom.grid, z), geom).data

        def apply_adjoint(z):
            return back_project(Sinogram(geom, z), geom).data

    ev = GridEvaluator(model.arch, model.config, make_grid_coords(geom.grid))
    params = model.params.copy()
    q = ev.forward(params)
    u = np.zeros_like(q)
    x = np.zeros_like(q)
    proj_residual = sino.data.copy()  # y - P*0
    state = ADMMState(x=x, q=q, u=u, mu=mu, history=[] if keep_history else None)
    log = TrainLog()
    start = time.perf_counter()

    for k in range(1, outer + 1):
        result = cgls_regularized(apply_forward, apply_adjoint, sino.data,
                                  q - u, mu, x0=x, iters=cgls_iters,
                                  proj_residual=proj_residual)
        x = result.x
        proj_residual = result.proj_residual
        state.n_forward += result.n_forward
        state.n_adjoint += result.n_adjoint

        target = x + u
        adam = AdamState.init(params.size)
        for _ in range(adam_iters):
            values, cache = ev.forward(params, want_cache=True)
            diff = values - target
            grad = ev.backward(cache, 2.0 * diff)
            adam, params = adam_step(adam, params, grad, adam_lr)

        q_new = ev.forward(params)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(q_new))):
            state.aborted = True
            break
        state.primal_residuals.append(float(np.linalg.norm(x - q_new)))
        state.dual_residuals.append(mu * float(np.linalg.norm(q_new - q)))
        u = u + x - q_new
        q = q_new
        state.x, state.q, state.u = x, q, u
        if keep_history:
            state.history.append(
                {"x": x.copy(), "q": q.copy(), "u": u.copy(), "params": params.copy()}
            )
        image_err = float("nan")
        if ground_truth is not None:
            image_err = mse(Image(geom.grid, q), ground_truth)
        log.append(TrainRecord(
            iteration=k * cgls_iters,
            loss=float(proj_residual @ proj_residual),
            mse=image_err,
            seconds=time.perf_counter() - start,
        ))
    trained = INRModel(model.arch, model.config, params, model.layout)
    return trained, state, log


# -- conditioning experiment -------------------------------------------------


@dataclass
class ConditionRow:
    seed: int
    kappa_ls: float
    kappa_fls: float
    ratio: float
    rank_deficient: bool


@dataclass
class ConditionReport:
    arch: str
    rows: list
    n_excluded: int
    mean_kappa_ls: float
    mean_kappa_fls: float
    mean_ratio: float
    std_kappa_ls: float
    std_kappa_fls: float
    std_ratio: float
    mean_ratio_gram: float
    std_ratio_gram: float


def condition_number(matrix: np.ndarray):
    """(kappa on singular values, kappa of the Gram matrix, rank_deficient).

    kappa is the largest-to-smallest nonzero singular value ratio; the
    Gram condition number is its square. Singular values below
    RANK_TOLERANCE times the largest count as zero.
    """
    sv = np.linalg.svd(matrix, compute_uv=False)
    largest = sv[0]
    nonzero = sv[sv > RANK_TOLERANCE * largest]
    rank_deficient = nonzero.size < sv.size
    kappa = float(largest / nonzero[-1])
    return kappa, kappa * kappa, rank_deficient


def condition_ratio_experiment(arch: str, config, geom: FanGeometry, n_seeds: int,
                               seed0: int = 0) -> ConditionReport:
    """Condition numbers of the projected feature matrix, plain vs filtered.

    For each seed the network is initialized, its feature matrix assembled
    column by column through the projector, and the half-ramp factor
    applied for the filtered variant. Rank-deficient draws are excluded
    from the ratio aggregates (with a count).
    """
    coords = make_grid_coords(geom.grid)
    filt = ramp_filter_for(geom)
    rows = []
    for i in range(n_seeds):
        seed = seed0 + i
        model = init_inr(arch, config, seed)
        q_matrix = feature_matrix(model, coords).matrix
        b_ls = np.empty((geom.n_rays, q_matrix.shape[1]))
        b_fls = np.empty_like(b_ls)
        for col in range(q_matrix.shape[1]):
            projected = forward_project(Image(geom.grid, q_matrix[:, col]), geom)
            b_ls[:, col] = projected.data
            b_fls[:, col] = half_ramp_apply(projected, filt).data
        kappa_ls, _, deficient_ls = condition_number(b_ls)
        kappa_fls, _, deficient_fls = condition_number(b_fls)
        rows.append(ConditionRow(
            seed=seed,
            kappa_ls=kappa_ls,
            kappa_fls=kappa_fls,
            ratio=kappa_fls / kappa_ls,
            rank_deficient=deficient_ls or deficient_fls,
        ))
    included = [r for r in rows if not r.rank_deficient]
    if not included:
        raise ValueError("all seeds produced rank-deficient matrices")
    ratios = np.array([r.ratio for r in included])
    kls = np.array([r.kappa_ls for r in included])
    kfls = np.array([r.kappa_fls for r in included])
    return ConditionReport(
        arch=arch,
        rows=rows,
        n_excluded=len(rows) - len(included),
        mean_kappa_ls=float(kls.mean()),
        mean_kappa_fls=float(kfls.mean()),
        mean_ratio=float(ratios.mean()),
        std_kappa_ls=float(kls.std()),
        std_kappa_fls=float(kfls.std()),
        std_ratio=float(ratios.std()),
        mean_ratio_gram=float((ratios**2).mean()),
        std_ratio_gram=float((ratios**2).std()),
    )
