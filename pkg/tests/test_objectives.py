"""Objectives: parsing, sharding, gradient correctness, reference solve.

Gradient oracles are central finite differences (h = 1e-6); smoothness
constants are checked against dense eigensolves.
"""

import numpy as np
import pytest

from efsgd.objectives import (
    Dataset,
    LogisticProblem,
    ParseError,
    ReferenceToleranceError,
    expected_smoothness_bound,
    initial_point,
    make_synthetic_problem,
    parse_libsvm,
    regularization_from_rule,
    shard_dataset,
    smoothness_constants,
    solve_reference,
)

import scipy.sparse as sp


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def fd_gradient(fn, x, h=1e-6):
    g = np.zeros_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


# ---------------------------------------------------------------------------
# LIBSVM parsing
# ---------------------------------------------------------------------------

def test_parse_basic():
    ds = parse_libsvm("+1 1:0.5 3:2.0\n-1 2:1.0\n")
    assert ds.n_samples == 2 and ds.dim == 3
    np.testing.assert_array_equal(
        ds.features.toarray(), [[0.5, 0.0, 2.0], [0.0, 1.0, 0.0]]
    )
    np.testing.assert_array_equal(ds.labels, [1.0, -1.0])


def test_parse_remaps_01_labels():
    ds = parse_libsvm("0 1:1\n1 1:2\n")
    np.testing.assert_array_equal(ds.labels, [-1.0, 1.0])


def test_parse_rejects_bad_label():
    with pytest.raises(ParseError) as exc:
        parse_libsvm("x 1:1\n")
    assert exc.value.lineno == 1


def test_parse_rejects_duplicate_index():
    with pytest.raises(ParseError) as exc:
        parse_libsvm("+1 1:1\n-1 2:1 2:3\n")
    assert exc.value.lineno == 2


def test_parse_rejects_empty():
    with pytest.raises(ParseError):
        parse_libsvm("")


def test_parse_rejects_malformed_token():
    with pytest.raises(ParseError):
        parse_libsvm("+1 1:1 3\n")


# ---------------------------------------------------------------------------
# sharding
# ---------------------------------------------------------------------------

def _toy_dataset(N, d=3, seed=0):
    rng = np.random.default_rng(seed)
    A = sp.csr_matrix(rng.standard_normal((N, d)))
    y = np.where(rng.random(N) < 0.5, -1.0, 1.0)
    return Dataset(A, y)


def test_shard_even_split():
    shards = shard_dataset(_toy_dataset(10), 2, seed=1)
    assert [len(s.rows) for s in shards] == [5, 5]
    used = np.concatenate([s.rows for s in shards])
    assert len(set(used)) == 10


def test_shard_truncates_excess_rows():
    shards = shard_dataset(_toy_dataset(11), 2, seed=1)
    assert [len(s.rows) for s in shards] == [5, 5]


def test_shard_deterministic():
    a = shard_dataset(_toy_dataset(20), 4, seed=9)
    b = shard_dataset(_toy_dataset(20), 4, seed=9)
    for s, t in zip(a, b):
        np.testing.assert_array_equal(s.rows, t.rows)


def test_shard_rejects_too_many_workers():
    with pytest.raises(ValueError):
        shard_dataset(_toy_dataset(3), 5, seed=0)


def test_shard_explicit_target():
    shards = shard_dataset(_toy_dataset(25), 2, seed=0, target_rows=20)
    assert sum(len(s.rows) for s in shards) == 20


# ---------------------------------------------------------------------------
# loss and gradients
# ---------------------------------------------------------------------------

def test_loss_at_zero_is_log2(small_problem):
    x = np.zeros(small_problem.d)
    assert small_problem.loss(x) == pytest.approx(np.log(2.0), abs=1e-12)


def test_grad_at_zero_closed_form(small_problem):
    p = small_problem
    x = np.zeros(p.d)
    # hand differentiation at 0: -(1/(2N)) A^T y  (mu term vanishes)
    expected = -np.asarray(p.A.T @ p.y) / (2 * p.n * p.m)
    np.testing.assert_allclose(p.grad_full(x), expected, atol=1e-12)


def test_gradients_match_finite_differences(small_problem):
    p = small_problem
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.standard_normal(p.d)
        assert rel_err(p.grad_full(x), fd_gradient(p.loss, x)) < 1e-5
        i = int(rng.integers(p.n))
        f_i = lambda z: float(
            np.mean(
                [
                    np.logaddexp(0.0, -p._shard_y[i][j] * float((p._shard_mats[i].getrow(j) @ z)[0]))
                    for j in range(p.m)
                ]
            )
            + 0.5 * p.mu * (z @ z)
        )
        assert rel_err(p.grad_worker(i, x), fd_gradient(f_i, x)) < 1e-5
        j = int(rng.integers(p.m))
        f_ij = lambda z: float(
            np.logaddexp(0.0, -p._shard_y[i][j] * float((p._shard_mats[i].getrow(j) @ z)[0]))
            + 0.5 * p.mu * (z @ z)
        )
        assert rel_err(p.grad_component(i, j, x), fd_gradient(f_ij, x)) < 1e-5


def test_gradient_granularities_agree(small_problem):
    p = small_problem
    rng = np.random.default_rng(8)
    for _ in range(5):
        x = rng.standard_normal(p.d)
        by_worker = np.mean([p.grad_worker(i, x) for i in range(p.n)], axis=0)
        by_comp = np.mean(
            [p.grad_component(i, j, x) for i in range(p.n) for j in range(p.m)],
            axis=0,
        )
        full = p.grad_full(x)
        np.testing.assert_allclose(by_worker, full, atol=1e-12)
        np.testing.assert_allclose(by_comp, full, atol=1e-12)


def test_component_grads_matrix(small_problem):
    p = small_problem
    x = np.random.default_rng(2).standard_normal(p.d)
    mat = p.component_grads(0, x)
    for j in range(p.m):
        np.testing.assert_allclose(mat[j], p.grad_component(0, j, x), atol=1e-12)


def test_loss_is_convex_on_segments(small_problem):
    p = small_problem
    rng = np.random.default_rng(13)
    for _ in range(30):
        a = rng.standard_normal(p.d)
        b = rng.standard_normal(p.d)
        mid = p.loss(0.5 * (a + b))
        assert mid <= 0.5 * (p.loss(a) + p.loss(b)) + 1e-12


def test_loss_overflow_safe(small_problem):
    p = small_problem
    x = 1e6 * np.ones(p.d)
    val = p.loss(x)
    assert np.isfinite(val)
    assert np.all(np.isfinite(p.grad_full(x)))


# ---------------------------------------------------------------------------
# smoothness constants
# ---------------------------------------------------------------------------

def test_smoothness_identity_features():
    ds = Dataset(sp.csr_matrix(np.eye(2)), np.array([1.0, -1.0]))
    L, lam, Lmax = smoothness_constants(ds, mu=0.0)
    assert lam == pytest.approx(1.0, rel=1e-9)
    assert L == pytest.approx(1.0 / 8.0, rel=1e-9)
    assert Lmax == pytest.approx(0.25, rel=1e-12)


def test_smoothness_scaling_and_mu_shift():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((12, 5))
    ds = Dataset(sp.csr_matrix(A), np.ones(12))
    ds_scaled = Dataset(sp.csr_matrix(3.0 * A), np.ones(12))
    _, lam, _ = smoothness_constants(ds, 0.0)
    _, lam_scaled, _ = smoothness_constants(ds_scaled, 0.0)
    assert lam_scaled == pytest.approx(9.0 * lam, rel=1e-8)
    L0, _, _ = smoothness_constants(ds, 0.0)
    L5, _, _ = smoothness_constants(ds, 0.5)
    assert L5 == pytest.approx(L0 + 0.5, rel=1e-12)


def test_power_iteration_matches_dense_eig():
    rng = np.random.default_rng(21)
    for _ in range(5):
        A = rng.standard_normal((15, 6))
        ds = Dataset(sp.csr_matrix(A), np.ones(15))
        _, lam, _ = smoothness_constants(ds, 0.0)
        dense = np.linalg.eigvalsh(A.T @ A).max()
        assert lam == pytest.approx(dense, rel=1e-7)


# ---------------------------------------------------------------------------
# reference solution
# ---------------------------------------------------------------------------

def test_solve_reference_quadratic_closed_form(quad_factory):
    prob = quad_factory(n=1, m=1, d=1)
    prob.centers[:] = 3.0
    prob._mean = np.array([3.0])
    ref = solve_reference(prob, tol=1e-13)
    assert ref.x_star[0] == pytest.approx(3.0, abs=1e-12)
    assert ref.converged


def test_solve_reference_postconditions(small_problem, small_reference):
    p, ref = small_problem, small_reference
    assert ref.converged
    assert np.linalg.norm(p.grad_full(ref.x_star)) <= ref.tol
    mean_star = ref.grad_i_star.mean(axis=0)
    np.testing.assert_allclose(mean_star, p.grad_full(ref.x_star), atol=1e-12)


def test_solve_reference_deterministic(small_problem):
    a = solve_reference(small_problem, tol=1e-10)
    b = solve_reference(small_problem, tol=1e-10)
    np.testing.assert_array_equal(a.x_star, b.x_star)


def test_solve_reference_cap_flags(small_problem):
    ref = solve_reference(small_problem, tol=1e-15, max_iter=3)
    assert not ref.converged
    assert ref.achieved_grad_norm > 1e-15


# ---------------------------------------------------------------------------
# expected smoothness and starting points
# ---------------------------------------------------------------------------

def test_expected_smoothness_single_sample():
    prob = make_synthetic_problem(n=2, m=1, d=3, mu=0.0, seed=1)
    row_sq = np.asarray(prob.A.multiply(prob.A).sum(axis=1)).ravel()
    assert expected_smoothness_bound(prob) == pytest.approx(row_sq.max() / 4.0)


def test_expected_smoothness_dominates_L():
    for seed in range(5):
        prob = make_synthetic_problem(n=3, m=8, d=4, mu=0.01, seed=seed)
        assert expected_smoothness_bound(prob) >= prob.L


def test_expected_smoothness_identity_features():
    ds = Dataset(sp.csr_matrix(np.eye(4)), np.array([1.0, -1.0, 1.0, -1.0]))
    prob = LogisticProblem(ds, shard_dataset(ds, 2, seed=0), mu=0.0)
    assert expected_smoothness_bound(prob) == pytest.approx(0.25)


def test_mu_rule():
    prob = make_synthetic_problem(n=2, m=10, d=4, mu="rule", seed=0)
    assert prob.mu == pytest.approx(1e-4 * prob.lambda_max / (4 * 20), rel=1e-6)


def test_initial_point_gap10(small_problem, small_reference):
    x0 = initial_point(small_problem, small_reference, "gap10", seed=42)
    gap = small_problem.loss(x0) - small_reference.f_star
    assert 9.0 <= gap <= 11.0
    again = initial_point(small_problem, small_reference, "gap10", seed=42)
    np.testing.assert_array_equal(x0, again)
