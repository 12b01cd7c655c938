import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from ellproc import kernel
from ellproc.errors import DomainError, KernelError
from ellproc.kernel import KernelParams, ScaleMatrix
from ellproc.oracle import fd_gradient


def brute_force(params, X1, X2, noise=False):
    ell = np.broadcast_to(params.lengthscale, (X1.shape[1],))
    out = np.empty((X1.shape[0], X2.shape[0]))
    for i in range(X1.shape[0]):
        for j in range(X2.shape[0]):
            d2 = sum(((X1[i, k] - X2[j, k]) / ell[k]) ** 2 for k in range(X1.shape[1]))
            out[i, j] = params.signal_var * math.exp(-0.5 * d2)
            if noise and i == j:
                out[i, j] += params.noise
    return out


P = KernelParams(log_lengthscale=math.log(0.7), log_signal_var=math.log(1.3), log_noise=math.log(0.05))


def test_single_point():
    S = kernel.build_scale_matrix(P, np.array([[0.4, -1.0]]))
    assert S.matrix[0, 0] == pytest.approx(P.signal_var + P.noise, rel=1e-15)


def test_duplicate_inputs_give_signal_var():
    X = np.array([[1.0, 2.0], [1.0, 2.0]])
    S = kernel.build_scale_matrix(P, X)
    assert S.matrix[0, 1] == P.signal_var


def test_matches_brute_force():
    X = np.random.default_rng(0).normal(size=(5, 3))
    S = kernel.build_scale_matrix(P, X)
    ref = brute_force(P, X, X, noise=True)
    assert np.max(np.abs(S.matrix - ref)) < 1e-14


def test_matches_brute_force_ard():
    p = KernelParams(log_lengthscale=np.log([0.5, 1.0, 3.0]), log_signal_var=0.2, log_noise=-3.0)
    X = np.random.default_rng(1).normal(size=(6, 3))
    assert np.max(np.abs(kernel.build_scale_matrix(p, X).matrix - brute_force(p, X, X, True))) < 1e-14


def test_cross_covariance_properties():
    rng = np.random.default_rng(2)
    X1, X2 = rng.normal(size=(4, 2)), rng.normal(size=(3, 2))
    assert np.allclose(kernel.cross_covariance(P, X1, X2), kernel.cross_covariance(P, X2, X1).T, rtol=0, atol=0)
    S = kernel.build_scale_matrix(P, X1)
    assert np.array_equal(kernel.cross_covariance(P, X1, X1), S.matrix - P.noise * np.eye(4))
    k = kernel.cross_covariance(P, np.array([[0.0]]), np.array([[P.lengthscale]]))
    assert k[0, 0] == pytest.approx(P.signal_var * math.exp(-0.5), rel=1e-15)


def test_scale_matrix_invariants():
    X = np.random.default_rng(3).normal(size=(30, 2))
    S = kernel.build_scale_matrix(P, X)
    assert np.array_equal(S.matrix, S.matrix.T)
    assert S.log_det == pytest.approx(2 * np.sum(np.log(np.diag(S.cholesky_factor))), rel=1e-15)
    assert S.jitter == 0.0


def test_log_det_and_solve_against_lu():
    rng = np.random.default_rng(4)
    for n in (1, 7, 50):
        X = rng.normal(size=(n, 2))
        S = kernel.build_scale_matrix(P, X)
        lu, piv = scipy.linalg.lu_factor(S.matrix)
        logdet = np.sum(np.log(np.abs(np.diag(lu))))
        assert S.log_det == pytest.approx(logdet, rel=1e-10, abs=1e-12)
        b = rng.normal(size=n)
        ref = scipy.linalg.lu_solve((lu, piv), b)
        assert np.allclose(S.solve(b), ref, rtol=1e-10, atol=1e-12 * np.max(np.abs(ref)))


def test_grads_match_finite_differences():
    X = np.random.default_rng(5).normal(size=(6, 2))
    grads = kernel.scale_matrix_grads(P, X)
    v0 = P.to_vector()
    for i, dS in enumerate(grads):
        for (r, c) in [(0, 0), (0, 1), (2, 5), (4, 4)]:
            f = lambda v: kernel.build_scale_matrix(KernelParams.from_vector(v), X).matrix[r, c]
            fd = fd_gradient(f, v0)[i]
            assert abs(fd - dS[r, c]) <= 1e-6 * max(abs(dS[r, c]), 1e-10) + 1e-10
        assert np.array_equal(dS, dS.T)
    assert np.array_equal(grads[-1], P.noise * np.eye(6))


def test_grads_ard_shapes():
    p = KernelParams(log_lengthscale=np.zeros(3))
    X = np.random.default_rng(6).normal(size=(4, 3))
    grads = kernel.scale_matrix_grads(p, X)
    assert len(grads) == 5 == p.n_params


def test_jitter_rescues_singular_matrix():
    X = np.zeros((3, 1))
    p = KernelParams(log_noise=math.log(1e-300))
    S = kernel.build_scale_matrix(p, X)
    assert S.jitter > 0


def test_jitter_gives_up_loudly():
    with pytest.raises(KernelError):
        ScaleMatrix.from_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_params_validation_and_round_trip():
    with pytest.raises(DomainError):
        KernelParams(log_noise=math.inf)
    p = KernelParams(log_lengthscale=np.array([0.1, -0.2]), log_signal_var=0.3, log_noise=-2.0)
    back = KernelParams.from_dict(p.to_dict())
    assert np.array_equal(back.to_vector(), p.to_vector())
    assert KernelParams.from_vector(p.to_vector(), ard=True).ard


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 15), st.floats(-2, 2), st.floats(-2, 2), st.floats(-6, 0), st.integers(0, 10_000))
def test_positive_definite_without_jitter(n, ll, ls, ln, seed):
    X = np.random.default_rng(seed).normal(size=(n, 2))
    S = kernel.build_scale_matrix(KernelParams(ll, ls, ln), X)
    assert S.jitter == 0.0
    assert np.all(np.linalg.eigvalsh(S.matrix) > 0)
