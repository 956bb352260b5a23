"""Shareable anchor data built from perturbed low-rank approximations."""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidRankError, InvalidShapeError
from .matrixkit import RandomSource, as_matrix, truncated_svd


def default_anchor_rank(n: int, m: int) -> int:
    """Half of the smaller dimension, rounded up."""
    return -(-min(n, m) // 2)


@dataclass(frozen=True)
class AnchorSet:
    """Anchor matrix shared by every party, with per-row origin tags.

    Attributes
    ----------
    X_anc : ndarray, shape (r, m)
        The anchor rows themselves.
    r : int
        Row count; always equals ``X_anc.shape[0]``.
    delta : float
        Perturbation scale the local approximations were built with;
        recorded for reporting only.
    provenance : tuple
        One tag per row: the contributing party index, or the string
        ``"augmented"`` for synthesized rows.
    """

    X_anc: np.ndarray
    r: int
    delta: float
    provenance: tuple

    @property
    def m(self) -> int:
        return self.X_anc.shape[1]


def local_anchor(X_i, rank: int, delta: float, src: RandomSource) -> np.ndarray:
    """Perturbed rank-``rank`` approximation of one party's data.

    Returns ``TSVD(X_i, rank) + delta * E`` with E i.i.d. uniform on
    [-1, 1]. The result has the shape of ``X_i`` but carries only its
    leading-singular-subspace structure plus noise, so it can be pooled
    into a shareable anchor without exposing the raw rows.
    """
    X_i = as_matrix(X_i, "X_i")
    n, m = X_i.shape
    if not 1 <= rank <= min(n, m):
        raise InvalidRankError(f"rank must be in [1, {min(n, m)}], got {rank}")
    if delta < 0:
        raise InvalidRankError(f"delta must be nonnegative, got {delta}")
    approx = truncated_svd(X_i, rank)
    if delta == 0:
        return approx
    return approx + delta * src.uniform(-1.0, 1.0, (n, m))


def assemble_anchor(locals: list, r: int, src: RandomSource, delta: float = 0.05) -> AnchorSet:
    """Pool local anchors and resize to exactly ``r`` rows.

    If ``r`` is at most the pool size, a uniform random subset of pool
    rows is kept. Otherwise the whole pool is kept and the shortfall is
    filled with convex combinations of two random pool rows, so every
    synthesized row stays inside the entrywise envelope of its parents.
    """
    if not locals:
        raise InsufficientDataError("anchor pool is empty")
    mats = [as_matrix(A, f"locals[{i}]") for i, A in enumerate(locals)]
    m = mats[0].shape[1]
    for i, A in enumerate(mats[1:], start=1):
        if A.shape[1] != m:
            raise InvalidShapeError(
                f"locals[{i}] has {A.shape[1]} columns, expected {m}"
            )
    pool = np.vstack(mats)
    origins = [p for p, A in enumerate(mats) for _ in range(A.shape[0])]
    n_pool = pool.shape[0]
    if n_pool < 2:
        raise InsufficientDataError(f"anchor pool needs at least 2 rows, got {n_pool}")
    if r < 1:
        raise InsufficientDataError(f"r must be positive, got {r}")

    if r <= n_pool:
        keep = src.choice(n_pool, r)
        X = pool[keep]
        provenance = tuple(origins[k] for k in keep)
    else:
        extra = r - n_pool
        parents = np.column_stack(
            [src.choice(n_pool, extra, replace=True) for _ in range(2)]
        )
        w = src.uniform(0.0, 1.0, (extra, 1))
        synthesized = w * pool[parents[:, 0]] + (1.0 - w) * pool[parents[:, 1]]
        X = np.vstack([pool, synthesized])
        provenance = tuple(origins) + ("augmented",) * extra

    return AnchorSet(X_anc=X, r=r, delta=delta, provenance=provenance)
