"""Dense real-matrix numerics: SVD, truncated SVD, pseudo-inverse, PCA,
ridge regression, and reproducible-or-entropy randomness.

All matrices are 2-D float64 ``numpy.ndarray`` values with finite entries;
``as_matrix`` is the single validation gate used by every operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientSamplesError,
    InvalidInputError,
    InvalidRankError,
    InvalidShapeError,
    SingularSystemError,
)

# Relative cutoff below which singular values are treated as zero when
# inverting. Keep in sync with the pseudo_inverse docstring.
PINV_RCOND = 1e-12

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX = 0xBF58476D1CE4E5B9


def fold_seed(base: int, *indices: int) -> int:
    """Derive a child seed from a base seed and one or more indices.

    The fold is a splitmix-style XOR/multiply mix, so nearby indices give
    unrelated streams. Derivation uses only seed values, never stream
    state, so child streams do not depend on consumption order.
    """
    h = base & _MASK64
    for ix in indices:
        h ^= ((int(ix) + 1) * _GOLDEN) & _MASK64
        h = (h * _MIX) & _MASK64
        h ^= h >> 31
    return h


class RandomSource:
    """Single-owner randomness handle, either seeded or entropy-backed.

    Seeded sources reproduce identical streams for identical seeds and can
    derive reproducible children via ``child``. Entropy sources draw from
    the OS entropy pool, expose no seed, and cannot be replayed; ``child``
    on an entropy source returns a fresh independent entropy source.
    """

    def __init__(self, rng: np.random.Generator, mode: str, seed: int | None):
        self._rng = rng
        self.mode = mode
        self._seed = seed

    @classmethod
    def seeded(cls, seed: int) -> "RandomSource":
        return cls(np.random.default_rng(seed & _MASK64), "seeded", seed & _MASK64)

    @classmethod
    def entropy(cls) -> "RandomSource":
        return cls(np.random.default_rng(), "entropy", None)

    def child(self, *indices: int) -> "RandomSource":
        if self.mode == "seeded":
            return RandomSource.seeded(fold_seed(self._seed, *indices))
        return RandomSource.entropy()

    def normal(self, rows: int, cols: int) -> np.ndarray:
        return self._rng.standard_normal((rows, cols))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._rng.uniform(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._rng.permutation(n)

    def choice(self, n: int, k: int, replace: bool = False) -> np.ndarray:
        return self._rng.choice(n, size=k, replace=replace)

    def integers(self, low: int, high: int, size=None):
        return self._rng.integers(low, high, size=size)

    def __repr__(self) -> str:  # never leaks entropy state
        if self.mode == "seeded":
            return f"RandomSource.seeded({self._seed})"
        return "RandomSource.entropy()"


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array or raise ``InvalidInputError``."""
    try:
        m = np.asarray(a, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name}: not convertible to a real matrix: {exc}")
    if m.ndim != 2:
        raise InvalidInputError(f"{name}: expected 2-D, got ndim={m.ndim}")
    if m.size and not np.all(np.isfinite(m)):
        raise InvalidInputError(f"{name}: contains non-finite entries")
    return m


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``A = U @ diag(singular_values) @ V.T``.

    U is n-by-k and V is m-by-k with orthonormal columns, k = min(n, m),
    singular values sorted non-increasing and non-negative.
    """

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.singular_values) @ self.V.T


def svd(A) -> SvdFactors:
    """Thin singular value decomposition of a finite matrix.

    Parameters
    ----------
    A : (n, m) array_like
        Matrix to factor; all entries must be finite.

    Returns
    -------
    SvdFactors
        Factors with ``k = min(n, m)`` columns reconstructing A to
        1e-10 * max(1, ||A||_F) in Frobenius norm.
    """
    A = as_matrix(A, "A")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return SvdFactors(U=U, singular_values=s, V=Vt.T)


def truncated_svd(A, k: int) -> np.ndarray:
    """Best rank-k Frobenius approximation of A (Eckart-Young)."""
    A = as_matrix(A, "A")
    kmax = min(A.shape)
    if not 1 <= k <= kmax:
        raise InvalidRankError(f"rank k={k} outside [1, {kmax}] for shape {A.shape}")
    f = svd(A)
    return (f.U[:, :k] * f.singular_values[:k]) @ f.V[:, :k].T


def pseudo_inverse(A) -> np.ndarray:
    """Moore-Penrose inverse via SVD.

    Singular values below ``PINV_RCOND`` times the largest are treated as
    zero. Satisfies the four Penrose conditions to 1e-9 relative accuracy.
    """
    A = as_matrix(A, "A")
    if A.size == 0:
        return A.T.copy()
    return np.linalg.pinv(A, rcond=PINV_RCOND)


def pca(X, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Principal component basis of the centered data matrix.

    Parameters
    ----------
    X : (n, m) array_like
        Data matrix, one sample per row; needs n >= 2.
    k : int
        Number of components, 1 <= k <= min(n - 1, m).

    Returns
    -------
    mean : (m,) ndarray
        Column means of X.
    basis : (m, k) ndarray
        Orthonormal columns ordered by non-increasing explained variance;
        scores are ``(X - mean) @ basis``.
    """
    X = as_matrix(X, "X")
    n, m = X.shape
    if n < 2:
        raise InsufficientSamplesError(f"pca needs at least 2 samples, got {n}")
    if not 1 <= k <= min(n - 1, m):
        raise InvalidRankError(f"k={k} outside [1, {min(n - 1, m)}] for shape {X.shape}")
    mean = X.mean(axis=0)
    f = svd(X - mean)
    return mean, f.V[:, :k]


@dataclass(frozen=True)
class RidgeModel:
    """Linear model with L2-penalized weights and an unregularized intercept.

    ``weights`` is (m + 1)-by-l; the last row is the intercept.
    """

    weights: np.ndarray
    lam: float

    @property
    def n_features(self) -> int:
        return self.weights.shape[0] - 1


def _augment(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


def ridge_fit(X, Y, lam: float) -> RidgeModel:
    """Solve the ridge normal equations with an unregularized intercept.

    Minimizes ||Xw + b - Y||_F^2 + lam * ||w||_F^2, i.e. solves
    (Xa' Xa + lam * D) W = Xa' Y where Xa appends a ones column and D is
    the identity with a zero in the intercept position.

    Parameters
    ----------
    X : (n, m) array_like
    Y : (n, l) array_like
    lam : float
        Non-negative penalty; lam = 0 requires the augmented X to have
        full column rank, otherwise ``SingularSystemError`` is raised.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise InvalidShapeError(f"row mismatch: X has {X.shape[0]}, Y has {Y.shape[0]}")
    if lam < 0:
        raise InvalidInputError(f"lambda must be non-negative, got {lam}")
    Xa = _augment(X)
    p = Xa.shape[1]
    if lam == 0:
        # Unpenalized solve: demand a well-posed system (full rank for the
        # augmented design); underdetermined full-row-rank systems take the
        # minimum-norm interpolant.
        if np.linalg.matrix_rank(Xa) < min(Xa.shape):
            raise SingularSystemError(
                "augmented design is rank-deficient and lambda = 0; "
                "increase lambda or add samples"
            )
        W = np.linalg.lstsq(Xa, Y, rcond=None)[0]
        return RidgeModel(weights=W, lam=0.0)
    D = np.eye(p)
    D[-1, -1] = 0.0
    A = Xa.T @ Xa + lam * D
    try:
        W = np.linalg.solve(A, Xa.T @ Y)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc))
    return RidgeModel(weights=W, lam=float(lam))


def ridge_predict(model: RidgeModel, X) -> np.ndarray:
    """Predictions ``[X, 1] @ weights`` of a fitted ridge model."""
    X = as_matrix(X, "X")
    if X.shape[1] + 1 != model.weights.shape[0]:
        raise InvalidShapeError(
            f"model expects {model.n_features} features, got {X.shape[1]}"
        )
    return _augment(X) @ model.weights


def random_gaussian(rows: int, cols: int, src: RandomSource) -> np.ndarray:
    """Matrix of i.i.d. standard normal entries drawn from ``src``."""
    return src.normal(rows, cols)


def random_permutation(n: int, src: RandomSource) -> np.ndarray:
    """Uniformly random permutation of range(n) drawn from ``src``."""
    if n < 1:
        raise InvalidInputError(f"permutation length must be >= 1, got {n}")
    return src.permutation(n)
