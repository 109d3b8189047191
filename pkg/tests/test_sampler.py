import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from polygaf.kernel import covariance, covariance_series
from polygaf.sampler import (
    BasisCoefficientTable,
    TruncationError,
    basis_logsq,
    certified_sample,
    constant_sample,
    draw_coefficients,
    draw_sample,
    evaluate,
    horner,
    log_normalized_sq,
    polar_grid_values,
    radial_grid_batch,
    tail_variance_bound,
    truncation_degree,
)

from conftest import random_points


def test_basis_logsq_examples():
    assert basis_logsq([0, 0], [1.3, 2.0]) == 0.0
    assert basis_logsq([1], [2.0]) == pytest.approx(np.log(2), rel=1e-14)
    assert basis_logsq([2], [3.0]) == pytest.approx(np.log(6), rel=1e-14)


@given(st.lists(st.floats(0.1, 300), min_size=1, max_size=3), st.integers(1, 60))
def test_coefficient_recurrence(L, M):
    t = BasisCoefficientTable.build(L, M)
    assert t.logsq.flat[0] == 0.0
    for j, Lj in enumerate(L):
        d = np.diff(t.logsq, axis=j)
        a = np.arange(M).reshape([-1 if k == j else 1 for k in range(len(L))])
        # 1e-13 absolute, or a few ulps once the entries themselves are large
        tol = max(1e-13, 8 * np.finfo(float).eps * np.abs(t.logsq).max())
        np.testing.assert_allclose(d, np.broadcast_to(np.log((Lj + a) / (a + 1)), d.shape), rtol=0, atol=tol)


def test_underflowed_coefficients_are_zero():
    c = BasisCoefficientTable.build([0.01], 4000).coefficients
    assert np.all(np.isfinite(c))
    t = BasisCoefficientTable.build([1e-300 + 0.001], 10)
    assert t.coefficients[0] == 1.0


def test_truncation_degree_examples():
    assert truncation_degree([1.0], [0.5], 1e-12) == (20,)
    # brute-force scan of partial sums of (1 - 0.25)^-4 in 50-digit arithmetic
    assert truncation_degree([4.0], [0.5], 1e-12) == (26,)
    assert truncation_degree([3.0, 2.0], [0.0, 0.0], 1e-30) == (0, 0)
    with pytest.raises(TruncationError):
        truncation_degree([50.0], [0.999], 1e-30)


@given(st.floats(0.3, 30), st.floats(0.05, 0.9), st.sampled_from([1e-10, 1e-16, 1e-22]))
def test_truncation_is_minimal(L, r, tol):
    (M,) = truncation_degree([L], [r], tol)
    assert tail_variance_bound([L], M, r) <= tol
    if M > 0:
        assert tail_variance_bound([L], M - 1, r) > tol


def test_tail_matches_covariance_difference():
    L, M, r = [2.5, 1.5], (30, 25), [0.6, 0.5]
    direct = covariance(r, r, L).real - covariance_series(r, r, L, M).real
    assert tail_variance_bound(L, M, r) == pytest.approx(direct, rel=1e-6)
    assert tail_variance_bound(L, M, r) >= 0


def test_draw_is_box_independent_and_deterministic():
    a = draw_coefficients(9, [3, 4], (10, 5))
    b = draw_coefficients(9, [3, 4], (20, 8))
    np.testing.assert_array_equal(a, b[:, :11, :6])
    s = draw_sample([2.0, 3.0], (10, 5), 9, 4)
    np.testing.assert_array_equal(s.coefficients, a[1])
    np.testing.assert_array_equal(draw_sample([2.0, 3.0], (10, 5), 9, 4).coefficients, s.coefficients)


def test_coefficient_law():
    a = draw_coefficients(42, np.arange(2000), (49,)).ravel()
    assert abs(np.mean(np.abs(a) ** 2) - 1) < 0.02
    e = np.abs(a) ** 2
    for t in (1.0, 2.0, 3.0):
        p = np.exp(-t)
        assert abs(np.mean(e > t) - p) < 3 * np.sqrt(p * (1 - p) / e.size)


def test_evaluate_examples(rng):
    s = draw_sample([2.0, 1.5], (12, 9), 5, 0, eval_radius=0.8)
    assert evaluate(s, [0, 0]) == s.coefficients[0, 0]
    one = np.zeros_like(s.coefficients)
    one[3, 2] = 1.0
    t = s.replace_coefficients(one)
    z = np.array([0.3 + 0.1j, -0.4j])
    c = np.exp(0.5 * basis_logsq([3, 2], [2.0, 1.5]))
    assert evaluate(t, z) == pytest.approx(c * z[0] ** 3 * z[1] ** 2, rel=1e-14)
    with pytest.raises(ValueError):
        evaluate(s, [0.9, 0.0])


def test_horner_matches_naive_sum(rng):
    for n, M in [(1, 40), (2, (15, 22)), (3, (6, 5, 7))]:
        s = draw_sample(rng.uniform(0.5, 5, n), M, 11, n, eval_radius=0.8)
        z = random_points(rng, 25, n, 0.8)
        idx = np.indices(s.scaled.shape).reshape(n, -1).T
        naive = np.array([np.sum(s.scaled.ravel() * np.prod(zi ** idx, axis=1)) for zi in z])
        np.testing.assert_allclose(horner(s.scaled, z), naive, rtol=1e-12)


def test_grid_evaluators_match_horner(rng):
    s = draw_sample([3.0, 2.0], (40, 33), 2, 1, eval_radius=0.9)
    radii = [np.array([0.1, 0.5, 0.85]), np.array([0.2, 0.7])]
    f = polar_grid_values(s.scaled, radii, [8, 6], offsets=[0.1, 0.2])
    for i, j, p, q in [(0, 1, 3, 5), (2, 0, 7, 0), (1, 1, 2, 2)]:
        z = np.array([radii[0][i] * np.exp(1j * (2 * np.pi * p / 8 + 0.1)),
                      radii[1][j] * np.exp(1j * (2 * np.pi * q / 6 + 0.2))])
        assert f[i, j, p, q] == pytest.approx(horner(s.scaled, z), rel=1e-11)
    b = draw_coefficients(3, np.arange(4), (70,)) * BasisCoefficientTable.build([5.0], 70).coefficients
    r = np.array([0.3, 0.6])
    g = radial_grid_batch(b, r, 16, offset=0.05)
    z = r[1] * np.exp(1j * (2 * np.pi * 5 / 16 + 0.05))
    assert g[2, 1, 5] == pytest.approx(horner(b[2], np.array([z])), rel=1e-11)


def test_log_normalized_sq():
    s = constant_sample([2.0], 0.6)
    assert log_normalized_sq(s, [0.5]) == pytest.approx(2 * np.log(0.75), rel=1e-14)
    zero = s.replace_coefficients(np.zeros((1,)))
    assert log_normalized_sq(zero, [0.5]) == -np.inf


def test_normalized_modulus_has_unit_mean():
    L, z = 3.0, 0.6
    (M,) = truncation_degree([L], [z], 1e-18)
    b = draw_coefficients(1, np.arange(20_000), (M,)) * BasisCoefficientTable.build([L], M).coefficients
    f = b @ (z ** np.arange(M + 1))
    x = np.abs(f) ** 2 * (1 - z * z) ** L
    assert abs(x.mean() - 1) < 3 * x.std() / np.sqrt(x.size)


def test_normalized_log_modulus_law_is_invariant():
    L = 4.0
    w = 0.5 + 0.3j
    (M,) = truncation_degree([L], [abs(w)], 1e-18)
    b = draw_coefficients(8, np.arange(10_000), (M,)) * BasisCoefficientTable.build([L], M).coefficients
    at0 = np.log(np.abs(b[:, 0]) ** 2)
    atw = np.log(np.abs(b @ (w ** np.arange(M + 1))) ** 2) + L * np.log(1 - abs(w) ** 2)
    assert stats.ks_2samp(at0[:5000], atw[5000:]).pvalue > 0.01


def test_pointwise_covariance(rng):
    L = [2.0, 1.5]
    z = np.array([0.4 + 0.3j, -0.5])
    w = np.array([0.1 - 0.5j, 0.2 + 0.2j])
    box = truncation_degree(L, np.maximum(np.abs(z), np.abs(w)), 1e-18)
    table = BasisCoefficientTable.build(L, box).coefficients
    fz, fw = [], []
    for lo in range(0, 100_000, 20_000):
        b = draw_coefficients(13, np.arange(lo, lo + 20_000), box) * table
        fz.append(np.einsum("tij,i,j->t", b, z[0] ** np.arange(box[0] + 1), z[1] ** np.arange(box[1] + 1)))
        fw.append(np.einsum("tij,i,j->t", b, w[0] ** np.arange(box[0] + 1), w[1] ** np.arange(box[1] + 1)))
    prod = np.concatenate(fz) * np.conj(np.concatenate(fw))
    k = covariance(z, w, L)
    se_re = prod.real.std() / np.sqrt(prod.size)
    se_im = prod.imag.std() / np.sqrt(prod.size)
    assert abs(prod.real.mean() - k.real) < 3 * se_re
    assert abs(prod.imag.mean() - k.imag) < 3 * se_im


def test_raising_degree_changes_little():
    L, r = [5.0], 0.7
    s = certified_sample(L, r, 3, 0, tol=1e-8)
    assert s.tail_variance_bound <= 1e-8
    (M,) = s.box
    big = draw_coefficients(3, np.arange(1000), (M + 10,)) * BasisCoefficientTable.build(L, M + 10).coefficients
    z = r * np.exp(0.3j)
    p = z ** np.arange(M + 11)
    diff = np.abs(big[:, M + 1 :] @ p[M + 1 :])
    assert np.mean(diff < 10 * np.sqrt(s.tail_variance_bound)) >= 0.99
