import math

import numpy as np
import pytest

from dynct.core import (
    LinearMap,
    ShapeError,
    THREADS_ENV,
    check_image,
    check_volume,
    default_rng,
    dot_test,
    fft_workers,
    identity_map,
    matrix_map,
    normalize_map,
    power_iteration_lambda_max,
)
from dynct.projector import Geometry, radon_map, uniform_angles


def diag_map(d):
    d = np.asarray(d, dtype=float)
    return LinearMap(d.shape, d.shape, lambda x: d * x, lambda z: d * z, name="diag")


def test_dot_test_identity_is_exact():
    assert dot_test(identity_map((4,)), trials=5)["max_relative_discrepancy"] == 0.0


def test_dot_test_matrix_transpose():
    M = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 4.0]])
    assert dot_test(matrix_map(M), trials=20)["max_relative_discrepancy"] <= 1e-14


def test_dot_test_flags_a_wrong_adjoint():
    M = np.array([[1.0, 2.0], [3.0, -1.0]])
    bad = LinearMap((2,), (2,), lambda x: M @ x, lambda z: M @ z)
    assert dot_test(bad)["max_relative_discrepancy"] > 1e-3


def test_dot_test_rejects_zero_trials():
    with pytest.raises(ValueError):
        dot_test(identity_map((2,)), trials=0)


def test_linear_map_shape_errors():
    op = matrix_map(np.ones((3, 2)))
    with pytest.raises(ShapeError):
        op.apply(np.ones(3))
    with pytest.raises(ShapeError):
        op.apply_adjoint(np.ones(2))


def test_linear_map_accepts_flat_vectors_of_the_right_length():
    op = identity_map((2, 3))
    out = op.apply(np.arange(6.0))
    assert out.shape == (2, 3)


def test_transpose_and_scaling():
    M = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 4.0]])
    op = matrix_map(M)
    z = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(op.T.apply(z), M.T @ z)
    np.testing.assert_allclose(op.scaled(3.0).apply(np.ones(2)), 3.0 * M @ np.ones(2))


@pytest.mark.parametrize("op, expected", [
    (diag_map([2.0, 2.0, 2.0, 2.0]), 4.0),
    (diag_map([1.0, 3.0]), 9.0),
])
def test_power_iteration_known_spectra(op, expected):
    assert power_iteration_lambda_max(op, tol=1e-12) == pytest.approx(expected, rel=1e-8)


def test_power_iteration_zero_operator_is_flagged():
    zero = diag_map(np.zeros(5))
    res = power_iteration_lambda_max(zero, full_output=True)
    assert res.value == 0.0 and res.zero_operator


def test_power_iteration_matches_dense_gram():
    g = Geometry(12, uniform_angles(6))
    op = radon_map(g)
    dense = g.system_matrix.toarray()
    exact = np.linalg.eigvalsh(dense.T @ dense).max()
    est = power_iteration_lambda_max(op, max_iters=2000, tol=1e-13)
    assert est == pytest.approx(exact, rel=1e-6)


def test_normalize_examples():
    five = diag_map(np.full(4, 5.0))
    nm = normalize_map(five)
    assert nm.scale == pytest.approx(1 / 5 / math.sqrt(1.01), rel=1e-9)
    assert power_iteration_lambda_max(nm) <= 1.0
    assert normalize_map(identity_map((3,))).scale == pytest.approx(1 / math.sqrt(1.01))


def test_normalize_projector_norm_at_most_one():
    nm = normalize_map(radon_map(Geometry(64, uniform_angles(30))))
    assert power_iteration_lambda_max(nm, seed=7) <= 1.0 + 1e-6


def test_normalize_zero_map_raises():
    with pytest.raises(ValueError, match="cannot normalize zero map"):
        normalize_map(diag_map(np.zeros(3)))


def test_rng_is_reproducible():
    a = default_rng(3).standard_normal(5)
    b = default_rng(3).standard_normal(5)
    assert np.array_equal(a, b)


def test_checks_reject_bad_arrays():
    with pytest.raises(ShapeError):
        check_image(np.ones((3, 4)), size=3)
    with pytest.raises(ValueError):
        check_image(np.array([[np.nan, 0.0], [0.0, 0.0]]))
    with pytest.raises(ShapeError):
        check_volume(np.ones((4, 4)))


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert fft_workers() == 3
    monkeypatch.delenv(THREADS_ENV)
    assert fft_workers() >= 1
