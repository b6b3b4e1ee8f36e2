import numpy as np
import pytest
from helpers import adam_reference

from ctinr.geometry import GridSpec, make_fan_geometry, make_grid_coords
from ctinr.optim import (
    AdamState,
    LrSchedule,
    NonFiniteError,
    adam_step,
    cgls_regularized,
    chambolle_pock_tv,
    image_gradient,
    image_gradient_adjoint,
    tv_objective,
    tv_value,
)
from ctinr.projector import Image, Sinogram, forward_project


class Counter:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, z):
        self.calls += 1
        return self.fn(z)


# -- Adam ---------------------------------------------------------------


def test_adam_zero_gradient_is_identity():
    state = AdamState.init(4)
    params = np.array([1.0, -2.0, 0.5, 3.0])
    state, updated = adam_step(state, params, np.zeros(4), 0.1)
    np.testing.assert_array_equal(updated, params)


def test_adam_first_step_is_signed_lr():
    state = AdamState.init(1)
    _, updated = adam_step(state, np.array([1.0]), np.array([2.0]), 0.01)
    # bias-corrected m=g, v=g^2 => step = lr * g/(|g| + eps')
    assert updated[0] == pytest.approx(1.0 - 0.01, abs=1e-9)


def test_adam_deterministic_trajectories(rng):
    grads = [rng.standard_normal(5) for _ in range(20)]

    def run():
        state = AdamState.init(5)
        params = np.zeros(5)
        for g in grads:
            state, params = adam_step(state, params, g, 0.05)
        return params

    np.testing.assert_array_equal(run(), run())


def test_adam_matches_reference_recursion(rng):
    params = rng.standard_normal(8)
    grads = [rng.standard_normal(8) for _ in range(100)]
    state = AdamState.init(8)
    current = params.copy()
    for g in grads:
        state, current = adam_step(state, current, g, 3e-3)
    expected = adam_reference(params, grads, 3e-3)
    np.testing.assert_allclose(current, expected, rtol=1e-15, atol=0)


def test_adam_rejects_nonfinite_gradient():
    state = AdamState.init(2)
    with pytest.raises(NonFiniteError):
        adam_step(state, np.zeros(2), np.array([1.0, np.nan]), 0.1)


def test_lr_schedule_drops_once():
    sched = LrSchedule(tau0=1e-3, drop_at=500)
    assert sched.lr(0) == 1e-3
    assert sched.lr(499) == 1e-3
    assert sched.lr(500) == 1e-4
    assert sched.lr(999) == 1e-4


# -- CGLS ---------------------------------------------------------------


def test_cgls_identity_single_iteration(rng):
    y = rng.standard_normal(6)
    res = cgls_regularized(lambda z: z, lambda z: z, y, np.zeros(6), 0.0, iters=1)
    np.testing.assert_allclose(res.x, y, rtol=0, atol=1e-15)


def test_cgls_identity_regularized_fixed_point(rng):
    y = rng.standard_normal(6)
    v = rng.standard_normal(6)
    mu = 0.5
    res = cgls_regularized(lambda z: z, lambda z: z, y, v, mu, iters=1)
    np.testing.assert_allclose(res.x, (y + mu * v) / (1 + mu), rtol=1e-14)


def test_cgls_matches_dense_solve(rng):
    P = rng.standard_normal((6, 4))
    y = rng.standard_normal(6)
    v = rng.standard_normal(4)
    mu = 0.7
    res = cgls_regularized(lambda z: P @ z, lambda z: P.T @ z, y, v, mu, iters=4)
    direct = np.linalg.solve(P.T @ P + mu * np.eye(4), P.T @ y + mu * v)
    assert np.linalg.norm(res.x - direct) / np.linalg.norm(direct) < 1e-10


def test_cgls_matvec_accounting(rng):
    P = rng.standard_normal((8, 5))
    y = rng.standard_normal(8)
    v = rng.standard_normal(5)
    for iters in (1, 3, 7):
        fwd = Counter(lambda z: P @ z)
        adj = Counter(lambda z: P.T @ z)
        cgls_regularized(fwd, adj, y, v, 0.4, iters=iters)
        assert (fwd.calls, adj.calls) == (iters, iters)
    # warm start keeps the accounting when the projection residual is given
    x0 = rng.standard_normal(5)
    fwd = Counter(lambda z: P @ z)
    adj = Counter(lambda z: P.T @ z)
    cgls_regularized(fwd, adj, y, v, 0.4, x0=x0, iters=5, proj_residual=y - P @ x0)
    assert (fwd.calls, adj.calls) == (5, 5)


def test_cgls_residual_norms_non_increasing(rng):
    # regularization keeps the stacked system well conditioned, where the
    # normal-equation residual decreases monotonically in practice
    for _ in range(20):
        A = rng.standard_normal((30, 12))
        y = rng.standard_normal(30)
        v = rng.standard_normal(12)
        res = cgls_regularized(lambda z: A @ z, lambda z: A.T @ z, y, v, 3.0, iters=12)
        norms = np.array(res.residual_norms)
        assert np.all(norms[1:] <= norms[:-1] * (1 + 1e-10))


def test_cgls_converged_flag_on_exact_solution(rng):
    y = rng.standard_normal(4)
    res = cgls_regularized(lambda z: z, lambda z: z, y, np.zeros(4), 0.0, iters=5)
    assert res.converged
    assert len(res.residual_norms) < 5 or res.residual_norms[-1] == 0.0


def test_cgls_breakdown_reported():
    # inconsistent pair: adjoint reports a descent direction the forward
    # operator annihilates -> zero curvature
    y = np.ones(3)
    res = cgls_regularized(lambda z: np.zeros(3), lambda z: np.ones(3), y,
                           np.zeros(3), 0.0, iters=4)
    assert res.breakdown


def test_cgls_validates_arguments(rng):
    y = rng.standard_normal(3)
    with pytest.raises(ValueError):
        cgls_regularized(lambda z: z, lambda z: z, y, y, 0.1, iters=0)
    with pytest.raises(ValueError):
        cgls_regularized(lambda z: z, lambda z: z, y, y, -0.1, iters=1)


def test_cgls_proj_residual_matches_final_iterate(rng):
    P = rng.standard_normal((8, 5))
    y = rng.standard_normal(8)
    v = rng.standard_normal(5)
    res = cgls_regularized(lambda z: P @ z, lambda z: P.T @ z, y, v, 0.9, iters=6)
    np.testing.assert_allclose(res.proj_residual, y - P @ res.x, rtol=0, atol=1e-12)


# -- TV / Chambolle-Pock --------------------------------------------------


def test_image_gradient_adjoint_exact(rng):
    x = rng.standard_normal((11, 11))
    p = rng.standard_normal((2, 11, 11))
    lhs = float(np.sum(image_gradient(x) * p))
    rhs = float(np.sum(x * image_gradient_adjoint(p)))
    assert abs(lhs - rhs) < 1e-12


def test_tv_value_of_constant_is_zero():
    assert tv_value(np.full((5, 5), 2.3)) == 0.0


def test_chambolle_pock_zero_data_gives_zero_image(tiny_geom):
    recon = chambolle_pock_tv(Sinogram.zeros(tiny_geom), tiny_geom, 0.5, 60)
    assert np.abs(recon.data).max() < 1e-8


def test_chambolle_pock_lambda_zero_matches_cgls():
    from ctinr.projector import back_project

    grid = GridSpec(8, 100.0)
    geom = make_fan_geometry(12, 24, grid)
    rng = np.random.default_rng(0)
    truth = rng.random(grid.n_pixels) * 0.02
    y = forward_project(Image(grid, truth), geom)

    def fwd(z):
        return forward_project(Image(grid, z.ravel()), geom).data

    def adj(z):
        return back_project(Sinogram(geom, z), geom).data

    ls = cgls_regularized(lambda z: fwd(z), lambda z: adj(z), y.data,
                          np.zeros(grid.n_pixels), 0.0, iters=200)
    cp = chambolle_pock_tv(y, geom, 0.0, 3000)
    rel = np.linalg.norm(cp.data - ls.x) / np.linalg.norm(ls.x)
    assert rel < 1e-4


def test_chambolle_pock_objective_improves(tiny_geom, tiny_grid, rng):
    truth = rng.random(tiny_grid.n_pixels) * 0.02
    clean = forward_project(Image(tiny_grid, truth), tiny_geom)
    noisy = Sinogram(tiny_geom, clean.data + 0.05 * rng.standard_normal(tiny_geom.n_rays))
    lam = 0.05
    short = chambolle_pock_tv(noisy, tiny_geom, lam, 10)
    long = chambolle_pock_tv(noisy, tiny_geom, lam, 1000)
    assert tv_objective(long, noisy, lam) <= tv_objective(short, noisy, lam)


def test_chambolle_pock_validates(tiny_geom):
    with pytest.raises(ValueError):
        chambolle_pock_tv(Sinogram.zeros(tiny_geom), tiny_geom, -1.0, 10)
    with pytest.raises(ValueError):
        chambolle_pock_tv(Sinogram.zeros(tiny_geom), tiny_geom, 1.0, 0)
