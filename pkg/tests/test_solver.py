import math

import numpy as np
import pytest
from helpers import objective, projected_pdhg
from hypothesis import given, settings
from hypothesis import strategies as st

from dynct.core import identity_map, matrix_map, normalize_map
from dynct.projector import Geometry, radon_map, uniform_angles
from dynct.solver import (
    STOP_CAP,
    CwdsConfig,
    CwdsState,
    PdfpConfig,
    a_priori_sparsity,
    combine_frames,
    cwds_controller_update,
    frames_for_3d,
    inflate_frames,
    init_threshold,
    mean_of_largest,
    nonneg_project,
    objective_value,
    pdfp_step,
    preset,
    run_cwds_pdfp,
    run_static_cwds_pdfp,
    soft_threshold,
)
from dynct.transforms import haar_map


def test_soft_threshold_examples():
    np.testing.assert_array_equal(soft_threshold(np.array([5.0, -1.0, -5.0]), 2.0), [3.0, 0.0, -3.0])
    x = np.array([0.3, -2.0])
    np.testing.assert_array_equal(soft_threshold(x, 0.0), x)
    with pytest.raises(ValueError):
        soft_threshold(x, -1.0)


def test_soft_threshold_grid_oracle():
    rng = np.random.default_rng(0)
    grid = np.arange(-10.0, 10.0 + 1e-9, 1e-4)
    for _ in range(50):
        x = rng.uniform(-8, 8)
        a = rng.uniform(0, 4)
        z = grid[np.argmin(0.5 * (grid - x) ** 2 + a * np.abs(grid))]
        assert abs(soft_threshold(np.array([x]), a)[0] - z) <= 1e-3


def test_nonneg_projection():
    np.testing.assert_array_equal(nonneg_project(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])
    x = np.random.default_rng(1).standard_normal(20)
    np.testing.assert_array_equal(nonneg_project(nonneg_project(x)), nonneg_project(x))


def test_objective_value_examples():
    rng = np.random.default_rng(2)
    M = rng.standard_normal((5, 4))
    A = matrix_map(M)
    W = matrix_map(np.eye(4))
    y = rng.standard_normal(5)
    assert objective_value(np.zeros(4), y, A, W, 0.7) == pytest.approx(0.5 * y @ y)
    f = rng.random(4)
    assert objective_value(f, M @ f, A, W, 0.0) == pytest.approx(0.0, abs=1e-14)
    ref = 0.5 * sum((sum(M[i, j] * f[j] for j in range(4)) - y[i]) ** 2 for i in range(5)) \
        + 0.7 * sum(abs(v) for v in f)
    assert objective_value(f, y, A, W, 0.7) == pytest.approx(ref, rel=1e-12)


def test_init_threshold_examples():
    assert mean_of_largest(np.array([4.0, 2.0, 1.0, 0.0]), 2) == 3.0
    A = identity_map((4,))
    W = identity_map((4,))
    assert init_threshold(np.zeros(4), A, W, 0.5, 1.0) == 0.0
    y = np.array([4.0, -2.0, 1.0, 0.0])
    assert init_threshold(y, A, W, 0.5, 1.0) == 3.0
    assert init_threshold(y, A, W, 0.5, 2.0) == 6.0
    with pytest.raises(ValueError, match="c_pr = 1 leaves no coefficients to average"):
        init_threshold(y, A, W, 1.0, 1.0)


def test_a_priori_sparsity_examples():
    W = identity_map((4,))
    assert a_priori_sparsity(np.zeros(4), W, 1e-6) == 0.0
    assert a_priori_sparsity(np.ones(4), W, 1e-6) == 1.0


def _state(alpha=1.0, beta=0.5, e_prev=1.0, e_curr=1.0, c_level=1.0, it=0):
    return CwdsState(f=np.zeros(2), v=np.zeros(2), alpha=alpha, beta=beta, e_prev=e_prev,
                     e_curr=e_curr, c_level=c_level, iter=it)


def test_controller_examples():
    a, b, e = cwds_controller_update(_state(c_level=0.4, it=3, e_curr=0.1, e_prev=0.2), 0.4)
    assert e == 0.0 and a == 1.0
    a, b, e = cwds_controller_update(_state(c_level=0.6, it=3, e_curr=0.1, e_prev=0.2), 0.4)
    assert a == pytest.approx(1.0 + 0.5 * 0.2) and b == 0.5
    # sign flip with |e_curr - e_prev| = 0.3 shrinks beta to 0.7 beta
    a, b, e = cwds_controller_update(_state(c_level=0.3, it=3, e_curr=0.1, e_prev=0.4), 0.4)
    assert b == pytest.approx(0.7 * 0.5)
    assert a == pytest.approx(1.0 + 0.35 * (-0.1))


def test_controller_skips_shrink_at_first_iteration():
    _, b, _ = cwds_controller_update(_state(c_level=0.1, it=0), 0.4)
    assert b == 0.5


@settings(max_examples=200, deadline=None)
@given(alpha=st.floats(0, 10), beta=st.floats(1e-6, 10), e_prev=st.floats(-1, 1), e_curr=st.floats(-1, 1),
       c=st.floats(0, 1), c_pr=st.floats(0, 1), it=st.integers(0, 5))
def test_controller_sign_logic_and_beta_monotone(alpha, beta, e_prev, e_curr, c, c_pr, it):
    s = _state(alpha, beta, e_prev, e_curr, c, it)
    a, b, e = cwds_controller_update(s, c_pr)
    assert 0.0 <= b <= beta
    assert a >= 0.0
    if c > c_pr:
        assert a >= alpha
    if c < c_pr and alpha > 0:
        assert a <= alpha


def test_pdfp_zero_fixed_point():
    A = identity_map((4,))
    s = CwdsState(f=np.zeros(4), v=np.zeros(4), alpha=1.0, beta=1.0)
    out = pdfp_step(s, A, A, np.zeros(4), PdfpConfig(), 1.0)
    assert not out.f.any() and not out.v.any()


def test_pdfp_identity_converges_to_data():
    A = normalize_map(identity_map((4,)))
    y = np.array([0.5, 1.0, 2.0, 0.0]) * A.scale
    s = CwdsState(f=np.zeros(4), v=np.zeros(4), alpha=0.0, beta=0.0)
    for _ in range(200):
        s = pdfp_step(s, A, identity_map((4,)), y, PdfpConfig(), 0.0)
    assert np.linalg.norm(s.f - y / A.scale) < 1e-6


def test_pdfp_divergence_is_reported():
    A = identity_map((2,))
    s = CwdsState(f=np.array([np.inf, 0.0]), v=np.zeros(2), alpha=0.0, beta=0.0)
    with pytest.raises(FloatingPointError, match="divergence"):
        pdfp_step(s, A, A, np.zeros(2), PdfpConfig(), 0.0)


@pytest.fixture(scope="module")
def tiny_problem():
    g = Geometry(16, uniform_angles(8))
    A = normalize_map(radon_map(g))
    W = haar_map((16, 16))
    rng = np.random.default_rng(5)
    truth = np.zeros((16, 16))
    truth[4:12, 5:11] = 1.0
    truth[6:9, 6:9] = 1.5
    y = A.apply(truth) + 0.01 * rng.standard_normal(A.output_shape)
    return A, W, y


def test_pdfp_matches_reference_solver(tiny_problem):
    A, W, y = tiny_problem
    alpha = 0.02
    A_dense = np.column_stack([A.apply(e.reshape(16, 16)).ravel() for e in np.eye(256)])
    W_dense = np.column_stack([W.apply(e.reshape(16, 16)).ravel() for e in np.eye(256)])
    f_ref = projected_pdhg(A_dense, W_dense, y.ravel(), alpha)
    s = CwdsState(f=np.zeros((16, 16)), v=np.zeros((16, 16)), alpha=alpha, beta=0.0)
    for _ in range(20000):
        s = pdfp_step(s, A, W, y, PdfpConfig(), alpha)
    ref_obj = objective(A_dense, W_dense, y.ravel(), alpha, f_ref)
    got = objective_value(s.f, y, A, W, alpha)
    assert abs(got - ref_obj) / abs(ref_obj) <= 1e-4


def test_zero_data_runs_to_cap():
    A = normalize_map(radon_map(Geometry(16, uniform_angles(4))))
    W = haar_map((16, 16))
    f, rep = run_cwds_pdfp(np.zeros(A.output_shape), A, W, PdfpConfig(max_iters=5),
                           CwdsConfig(0.3, 10, 1e-6, 1))
    assert not f.any()
    assert rep.stop_reason == STOP_CAP and rep.iterations == 5
    assert len(rep.objective_trace) == rep.iterations + 1


def test_static_T1_equals_dynamic_trajectory(tiny_problem):
    A, W, y = tiny_problem
    cw = CwdsConfig(0.3, 10, 1e-6, 1)
    pd = PdfpConfig(max_iters=40)
    f1, r1 = run_cwds_pdfp(y, A, W, pd, cw)
    f2, r2 = run_static_cwds_pdfp(y[None], [A], W, pd, cw)
    assert np.array_equal(f1, f2[0])
    assert r1.alpha_trace == r2.alpha_trace and r1.sparsity_trace == r2.sparsity_trace
    assert r1.objective_trace == r2.objective_trace


def test_static_identical_frames_identical_results(tiny_problem):
    A, W, y = tiny_problem
    f, _ = run_static_cwds_pdfp(np.stack([y, y]), [A, A], W, PdfpConfig(max_iters=20), CwdsConfig(0.3, 10, 1e-6, 1))
    assert np.array_equal(f[0], f[1])
    assert f.min() >= 0.0


def test_solver_is_deterministic(tiny_problem):
    A, W, y = tiny_problem
    cw = CwdsConfig(0.3, 10, 1e-6, 1)
    _, r1 = run_cwds_pdfp(y, A, W, PdfpConfig(max_iters=30), cw)
    _, r2 = run_cwds_pdfp(y, A, W, PdfpConfig(max_iters=30), cw)
    assert r1 == r2


def test_stale_threshold_flag_changes_trajectory(tiny_problem):
    A, W, y = tiny_problem
    _, r1 = run_cwds_pdfp(y, A, W, PdfpConfig(max_iters=10), CwdsConfig(0.3, 10, 1e-6, 1))
    _, r2 = run_cwds_pdfp(y, A, W, PdfpConfig(max_iters=10), CwdsConfig(0.3, 10, 1e-6, 1, stale_threshold=True))
    assert r1.sparsity_trace != r2.sparsity_trace


def test_converged_fixed_point_consistency(tiny_problem):
    A, W, y = tiny_problem
    alpha = 0.02
    s = CwdsState(f=np.zeros((16, 16)), v=np.zeros((16, 16)), alpha=alpha, beta=0.0)
    for _ in range(3000):
        s = pdfp_step(s, A, W, y, PdfpConfig(), alpha)
    s2 = pdfp_step(s, A, W, y, PdfpConfig(), alpha)
    assert np.linalg.norm(s2.f - s.f) / np.linalg.norm(s2.f) < 0.003


def test_inflation_examples():
    x = np.arange(17.0)[:, None, None] * np.ones((1, 2, 2))
    inflated = inflate_frames(x, frames_for_3d(17))
    assert inflated.shape[0] == 34
    np.testing.assert_array_equal(inflated[:4, 0, 0], [0, 0, 1, 1])
    y = np.arange(11.0)[:, None, None] * np.ones((1, 2, 2))
    inflated = inflate_frames(y, frames_for_3d(11))
    assert inflated.shape[0] == 33
    np.testing.assert_array_equal(inflated[:6, 0, 0], [0, 0, 0, 1, 1, 1])
    for mode in ("average", "middle"):
        assert np.array_equal(combine_frames(inflate_frames(y, 33), 11, mode), y)
    with pytest.raises(ValueError):
        inflate_frames(y, 5)
    assert frames_for_3d(34) == 34


def test_presets_table():
    p = preset("digital", "sh3d")
    assert (p.c_pr, p.omega, p.kappa, p.zeta) == (0.73, 10.0, 1e-6, 1.0)
    assert (p.delta1, p.delta2) == (0.01, 0.003)
    assert preset("plant", "haar").omega == 0.05
    with pytest.raises(ValueError):
        CwdsConfig(1.5, 1, 1, 1)


def test_preset_overrides_replace_table_values():
    p = preset("digital", "sh3d", c_pr=0.5, delta1=0.02)
    assert p.c_pr == 0.5 and p.delta1 == 0.02 and p.omega == 10.0
