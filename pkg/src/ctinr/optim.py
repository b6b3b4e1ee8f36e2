"""Generic solvers: Adam, regularized CGLS, Chambolle-Pock TV.

Everything here operates on plain float64 arrays; the reconstruction
drivers bind the typed Image/Sinogram wrappers. The projection operators
are injected as callables so the solvers can be exercised with synthetic
operators in tests.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import FanGeometry
from .projector import Image, Sinogram, back_project, forward_project


class NonFiniteError(RuntimeError):
    """A loss, gradient, or iterate stopped being finite."""


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n))


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray, lr: float):
    """One bias-corrected Adam update; returns (new_state, new_params)."""
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError("params, grad, and state must have equal lengths")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("non-finite gradient passed to adam_step")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m=m, v=v, t=t, beta1=state.beta1, beta2=state.beta2,
                          eps=state.eps)
    return new_state, new_params


@dataclass(frozen=True)
class LrSchedule:
    """Constant rate dropped once by a fixed factor."""

    tau0: float
    drop_at: int
    drop_factor: float = 10.0

    def lr(self, t: int) -> float:
        return self.tau0 if t < self.drop_at else self.tau0 / self.drop_factor


@dataclass
class CglsResult:
    x: np.ndarray
    residual_norms: list
    n_forward: int
    n_adjoint: int
    breakdown: bool
    converged: bool
    proj_residual: np.ndarray  # y - P x at the returned iterate


def cgls_regularized(apply_forward, apply_adjoint, y, v, mu: float,
                     x0=None, iters: int = 1, proj_residual=None) -> CglsResult:
    """CGLS on the stacked system [P; sqrt(mu) I] x ~ [y; sqrt(mu) v].

    Exactly one forward and one adjoint application per iteration: each
    iteration forms the normal-equation residual from the running data
    residual (adjoint), updates the search direction, and applies the
    forward operator to it. Warm starts keep this accounting only when
    `proj_residual` (= y - P x0 for the given x0) is supplied; otherwise
    one extra forward application is spent computing it.

    residual_norms[k] is ||(P'P + mu I) x_k - (P'y + mu v)|| at the start
    of iteration k+1.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if mu < 0:
        raise ValueError("mu must be non-negative")
    sq_mu = np.sqrt(mu)
    n_forward = n_adjoint = 0
    if x0 is None:
        x = np.zeros_like(v)
        r_proj = y.copy()
    else:
        x = np.asarray(x0, dtype=np.float64).ravel().copy()
        if proj_residual is not None:
            r_proj = np.asarray(proj_residual, dtype=np.float64).ravel().copy()
        else:
            r_proj = y - apply_forward(x)
            n_forward += 1
    r_reg = sq_mu * (v - x)

    residual_norms = []
    breakdown = False
    converged = False
    p = None
    gamma = 0.0
    for _ in range(iters):
        s = apply_adjoint(r_proj) + sq_mu * r_reg
        n_adjoint += 1
        gamma_new = float(s @ s)
        residual_norms.append(np.sqrt(gamma_new))
        if gamma_new == 0.0:
            converged = True
            break
        p = s if p is None else s + (gamma_new / gamma) * p
        gamma = gamma_new
        q_proj = apply_forward(p)
        n_forward += 1
        q_reg = sq_mu * p
        curvature = float(q_proj @ q_proj + q_reg @ q_reg)
        if curvature <= 0.0:
            breakdown = True
            break
        alpha = gamma / curvature
        x = x + alpha * p
        r_proj = r_proj - alpha * q_proj
        r_reg = r_reg - alpha * q_reg
    return CglsResult(x=x, residual_norms=residual_norms, n_forward=n_forward,
                      n_adjoint=n_adjoint, breakdown=breakdown, converged=converged,
                      proj_residual=r_proj)


def image_gradient(x: np.ndarray) -> np.ndarray:
    """Forward differences with reflexive boundary, shape (2, n, n)."""
    g = np.zeros((2,) + x.shape)
    g[0, :, :-1] = x[:, 1:] - x[:, :-1]
    g[1, :-1, :] = x[1:, :] - x[:-1, :]
    return g


def image_gradient_adjoint(p: np.ndarray) -> np.ndarray:
    """Exact transpose of :func:`image_gradient` (negative divergence)."""
    out = np.zeros(p.shape[1:])
    out[:, :-1] -= p[0, :, :-1]
    out[:, 1:] += p[0, :, :-1]
    out[:-1, :] -= p[1, :-1, :]
    out[1:, :] += p[1, :-1, :]
    return out


def tv_value(x: np.ndarray) -> float:
    """Isotropic total variation of a 2D image."""
    g = image_gradient(x)
    return float(np.sqrt(g[0] ** 2 + g[1] ** 2).sum())


def _operator_norm(apply_forward, apply_adjoint, shape, n_power_iters=30):
    """Power iteration on z -> P'Pz + grad'grad z; returns ||[P; grad]||."""
    rng = np.random.Generator(np.random.PCG64(0))
    z = rng.standard_normal(shape)
    z /= np.linalg.norm(z)
    lam = 1.0
    for _ in range(n_power_iters):
        w = apply_adjoint(apply_forward(z)) + image_gradient_adjoint(image_gradient(z))
        lam = np.linalg.norm(w)
        z = w / lam
    return np.sqrt(lam) * 1.01


def chambolle_pock_tv(y: Sinogram, geom: FanGeometry, lam: float, iters: int,
                      apply_forward=None, apply_adjoint=None) -> Image:
    """Minimize 0.5||Px - y||^2 + lam * TV(x) by the primal-dual algorithm.

    Isotropic TV with forward differences and reflexive boundary; equal
    primal/dual steps 0.99/L with L estimated by power iteration on the
    stacked operator [P; grad].
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    n = geom.grid.n_side
    if apply_forward is None:
        def apply_forward(img2d):
            return forward_project(Image(geom.grid, img2d.ravel()), geom).as_2d()

        def apply_adjoint(sino2d):
            return back_project(Sinogram(geom, sino2d.ravel()), geom).as_2d()

    y2 = y.as_2d() if isinstance(y, Sinogram) else np.asarray(y, dtype=np.float64)
    op_norm = _operator_norm(apply_forward, apply_adjoint, (n, n))
    sigma = tau = 0.99 / op_norm

    x = np.zeros((n, n))
    x_bar = x.copy()
    dual_data = np.zeros_like(y2)
    dual_tv = np.zeros((2, n, n))
    for _ in range(iters):
        dual_data = (dual_data + sigma * (apply_forward(x_bar) - y2)) / (1.0 + sigma)
        dual_tv += sigma * image_gradient(x_bar)
        magnitude = np.sqrt(dual_tv[0] ** 2 + dual_tv[1] ** 2)
        scale = np.ones_like(magnitude)
        over = magnitude > lam
        scale[over] = lam / magnitude[over]
        dual_tv *= scale[None, :, :]
        x_new = x - tau * (apply_adjoint(dual_data) + image_gradient_adjoint(dual_tv))
        x_bar = 2.0 * x_new - x
        x = x_new
    return Image(geom.grid, x.ravel())


def tv_objective(x: Image, y: Sinogram, lam: float) -> float:
    residual = forward_project(x, y.geom).data - y.data
    return 0.5 * float(residual @ residual) + lam * tv_value(x.as_2d())
