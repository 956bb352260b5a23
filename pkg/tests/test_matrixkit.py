import numpy as np
import pytest

from dcollab import matrixkit as mk
from dcollab.errors import (
    InsufficientSamplesError,
    InvalidInputError,
    InvalidRankError,
    InvalidShapeError,
    SingularSystemError,
)


def frob(a):
    return np.linalg.norm(np.asarray(a))


# ---------------------------------------------------------------- svd


def test_svd_diagonal():
    f = mk.svd(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(f.singular_values, [3.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(np.abs(f.U), np.eye(2), atol=1e-12)
    np.testing.assert_allclose(np.abs(f.V), np.eye(2), atol=1e-12)


def test_svd_zero_matrix():
    f = mk.svd(np.zeros((3, 2)))
    np.testing.assert_allclose(f.singular_values, [0.0, 0.0], atol=0)


def test_svd_reconstruction_random():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(6, 4))
    f = mk.svd(A)
    assert frob(A - f.reconstruct()) <= 1e-10 * max(1.0, frob(A))


def test_svd_orthonormal_factors_and_sorted_values():
    rng = np.random.default_rng(5)
    for n, m in [(7, 3), (3, 7), (5, 5)]:
        f = mk.svd(rng.normal(size=(n, m)))
        k = min(n, m)
        assert frob(f.U.T @ f.U - np.eye(k)) <= 1e-10
        assert frob(f.V.T @ f.V - np.eye(k)) <= 1e-10
        assert np.all(np.diff(f.singular_values) <= 0)
        assert np.all(f.singular_values >= 0)


def test_svd_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        mk.svd(np.array([[1.0, np.nan], [0.0, 1.0]]))


# ------------------------------------------------------ truncated_svd


def test_truncated_svd_keeps_dominant_direction():
    np.testing.assert_allclose(
        mk.truncated_svd(np.diag([3.0, 1.0]), 1), np.diag([3.0, 0.0]), atol=1e-12
    )


def test_truncated_svd_full_rank_is_identity_map():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(5, 4))
    np.testing.assert_allclose(mk.truncated_svd(A, 4), A, atol=1e-10)


def test_truncated_svd_error_matches_tail_singular_values():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(8, 5))
    s = mk.svd(A).singular_values
    err2 = frob(A - mk.truncated_svd(A, 2)) ** 2
    assert abs(err2 - np.sum(s[2:] ** 2)) <= 1e-8


def test_truncated_svd_rank_out_of_range():
    A = np.eye(3)
    with pytest.raises(InvalidRankError):
        mk.truncated_svd(A, 0)
    with pytest.raises(InvalidRankError):
        mk.truncated_svd(A, 4)


# ----------------------------------------------------- pseudo_inverse


def test_pinv_identity():
    np.testing.assert_allclose(mk.pseudo_inverse(np.eye(3)), np.eye(3), atol=1e-12)


def test_pinv_diagonal_with_zero():
    P = mk.pseudo_inverse(np.array([[2.0, 0.0], [0.0, 0.0]]))
    np.testing.assert_allclose(P, [[0.5, 0.0], [0.0, 0.0]], atol=1e-12)


def penrose_residuals(A, P):
    return (
        frob(A @ P @ A - A) / max(1.0, frob(A)),
        frob(P @ A @ P - P) / max(1.0, frob(P)),
        frob((A @ P).T - A @ P) / max(1.0, frob(A @ P)),
        frob((P @ A).T - P @ A) / max(1.0, frob(P @ A)),
    )


def test_pinv_penrose_conditions_random():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(5, 3))
    P = mk.pseudo_inverse(A)
    assert max(penrose_residuals(A, P)) <= 1e-9


def test_pinv_penrose_conditions_rank_deficient():
    rng = np.random.default_rng(8)
    B = rng.normal(size=(10, 3))
    A = B @ rng.normal(size=(3, 6))  # rank 3, 10x6
    P = mk.pseudo_inverse(A)
    assert max(penrose_residuals(A, P)) <= 1e-9


# ---------------------------------------------------------------- pca


def test_pca_line_structure():
    t = np.linspace(-2, 2, 9)[:, None]
    X = t * np.array([[1.0, 1.0]])
    mean, basis = mk.pca(X, 1)
    np.testing.assert_allclose(mean, [0.0, 0.0], atol=1e-12)
    direction = np.array([1.0, 1.0]) / np.sqrt(2.0)
    assert min(frob(basis[:, 0] - direction), frob(basis[:, 0] + direction)) <= 1e-10


def test_pca_basis_orthonormal():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(20, 6))
    for k in (1, 3, 6):
        _, basis = mk.pca(X, k)
        assert frob(basis.T @ basis - np.eye(k)) <= 1e-10


def test_pca_full_rank_preserves_pairwise_distances():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(12, 5))
    mean, basis = mk.pca(X, 5)
    S = (X - mean) @ basis
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            d_raw = np.linalg.norm(X[i] - X[j])
            d_scores = np.linalg.norm(S[i] - S[j])
            assert abs(d_raw - d_scores) <= 1e-8


def test_pca_errors():
    rng = np.random.default_rng(1)
    with pytest.raises(InvalidRankError):
        mk.pca(rng.normal(size=(4, 3)), 4)  # k > min(n-1, m)
    with pytest.raises(InsufficientSamplesError):
        mk.pca(rng.normal(size=(1, 3)), 1)


# -------------------------------------------------------------- ridge


def normal_equation_oracle(X, Y, lam):
    """Independent brute-force solve of the penalized normal equations."""
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    D = np.eye(Xa.shape[1])
    D[-1, -1] = 0.0
    return np.linalg.solve(Xa.T @ Xa + lam * D, Xa.T @ Y)


def test_ridge_interpolates_square_invertible_at_lambda_zero():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    Y = rng.normal(size=(4, 2))
    model = mk.ridge_fit(X, Y, 0.0)
    np.testing.assert_allclose(mk.ridge_predict(model, X), Y, atol=1e-8)


def test_ridge_huge_lambda_shrinks_weights():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(30, 4))
    Y = rng.normal(size=(30, 2))
    model = mk.ridge_fit(X, Y, 1e12)
    assert frob(model.weights[:-1]) <= 1e-6 * frob(Y)


def test_ridge_matches_normal_equation_oracle():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(6, 3))
    Y = rng.normal(size=(6, 2))
    W = mk.ridge_fit(X, Y, 0.1).weights
    np.testing.assert_allclose(W, normal_equation_oracle(X, Y, 0.1), atol=1e-9)


def test_ridge_oracle_randomized_sizes():
    rng = np.random.default_rng(13)
    for _ in range(25):
        n = int(rng.integers(3, 21))
        m = int(rng.integers(1, 21))
        lam = float(rng.uniform(0.01, 5.0))
        X = rng.normal(size=(n, m))
        Y = rng.normal(size=(n, 2))
        W = mk.ridge_fit(X, Y, lam).weights
        assert frob(W - normal_equation_oracle(X, Y, lam)) <= 1e-9 * max(1, frob(W))


def test_ridge_singular_system_at_lambda_zero():
    X = np.ones((5, 2))  # duplicate of the intercept column
    Y = np.ones((5, 1))
    with pytest.raises(SingularSystemError):
        mk.ridge_fit(X, Y, 0.0)


def test_ridge_fit_shape_mismatch():
    with pytest.raises(InvalidShapeError):
        mk.ridge_fit(np.ones((4, 2)), np.ones((3, 1)), 1.0)


def test_ridge_objective_convexity_spot_check():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(15, 3))
    Y = rng.normal(size=(15, 2))
    lam = 0.7
    model = mk.ridge_fit(X, Y, lam)

    def objective(W):
        Xa = np.hstack([X, np.ones((len(X), 1))])
        return frob(Xa @ W - Y) ** 2 + lam * frob(W[:-1]) ** 2

    base = objective(model.weights)
    for _ in range(10):
        assert base <= objective(model.weights + 0.01 * rng.normal(size=model.weights.shape)) + 1e-12


def test_ridge_predict_zero_weights():
    model = mk.RidgeModel(weights=np.zeros((4, 2)), lam=1.0)
    np.testing.assert_allclose(mk.ridge_predict(model, np.ones((5, 3))), np.zeros((5, 2)))


def test_ridge_predict_shape_mismatch():
    model = mk.RidgeModel(weights=np.zeros((4, 2)), lam=1.0)
    with pytest.raises(InvalidShapeError):
        mk.ridge_predict(model, np.ones((5, 4)))


def test_ridge_prediction_invariant_under_orthogonal_feature_map():
    rng = np.random.default_rng(15)
    X = rng.normal(size=(10, 4))
    Y = rng.normal(size=(10, 2))
    X_test = rng.normal(size=(6, 4))
    Q = np.linalg.qr(rng.normal(size=(4, 4)))[0]
    base = mk.ridge_predict(mk.ridge_fit(X, Y, 1.0), X_test)
    rotated = mk.ridge_predict(mk.ridge_fit(X @ Q, Y, 1.0), X_test @ Q)
    np.testing.assert_allclose(rotated, base, atol=1e-8)


# --------------------------------------------------------- randomness


def test_random_gaussian_seeded_reproducible():
    a = mk.random_gaussian(8, 5, mk.RandomSource.seeded(42))
    b = mk.random_gaussian(8, 5, mk.RandomSource.seeded(42))
    assert np.array_equal(a, b)


def test_random_gaussian_moments():
    src = mk.RandomSource.seeded(100)
    x = mk.random_gaussian(100, 100, src)
    assert abs(x.mean()) <= 0.05
    assert abs(x.var() - 1.0) <= 0.1


def test_random_gaussian_entropy_mode_differs():
    a = mk.random_gaussian(20, 20, mk.RandomSource.entropy())
    b = mk.random_gaussian(20, 20, mk.RandomSource.entropy())
    assert np.mean(a != b) >= 0.99


def test_random_permutation_single_element():
    assert list(mk.random_permutation(1, mk.RandomSource.seeded(0))) == [0]


def test_random_permutation_inverse_restores_rows():
    rng = np.random.default_rng(16)
    X = rng.normal(size=(9, 3))
    p = mk.random_permutation(9, mk.RandomSource.seeded(3))
    inv = np.argsort(p)
    np.testing.assert_array_equal(X[p][inv], X)


def test_random_permutation_uniform_chi_square():
    src = mk.RandomSource.seeded(77)
    counts = {}
    for _ in range(6000):
        key = tuple(mk.random_permutation(3, src))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    for v in counts.values():
        assert abs(v - 1000) <= 120


def test_seeded_child_streams_are_stable_and_distinct():
    s = mk.RandomSource.seeded(5)
    a = s.child(1, 2).normal(3, 3)
    b = mk.RandomSource.seeded(5).child(1, 2).normal(3, 3)
    c = s.child(1, 3).normal(3, 3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_entropy_source_exposes_no_seed():
    src = mk.RandomSource.entropy()
    assert src.mode == "entropy"
    assert "entropy" in repr(src)
    assert "seed" not in repr(src).lower()
