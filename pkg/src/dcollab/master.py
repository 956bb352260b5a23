"""Master-side fusion: collaboration maps, shared model, anchor predictions."""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamplesError, InvalidRankError, InvalidShapeError
from .matrixkit import (
    RidgeModel,
    as_matrix,
    pseudo_inverse,
    ridge_fit,
    ridge_predict,
    svd,
)
from .worker import IntermediateShare

C_MODES = ("identity", "sigma")


@dataclass(frozen=True)
class CollabMaps:
    """Per-party maps G_i into the shared collaboration space.

    Attributes
    ----------
    G : tuple of ndarray
        One (m_tilde_i, m_hat) map per party, in party order.
    m_hat : int
        Collaboration space dimensionality.
    c_mode : str
        "identity" leaves the projected basis unscaled; "sigma" scales
        by the singular values, which preserves the magnitude of the
        original intermediate representations.
    sv : ndarray
        Singular values of the column-concatenated anchor block.
    warnings : tuple of str
        Rank-deficiency notes, empty when all blocks had full column rank.
    """

    G: tuple
    m_hat: int
    c_mode: str
    sv: np.ndarray
    warnings: tuple = ()

    @property
    def c(self) -> int:
        return len(self.G)


@dataclass(frozen=True)
class CollabModel:
    maps: CollabMaps
    h: RidgeModel


def default_m_hat(m_tildes) -> int:
    """Uniform m_tilde gives m_hat = m_tilde; otherwise the smallest."""
    return min(m_tildes)


def compute_collab_maps(anchor_blocks, m_hat: int, c_mode: str = "sigma") -> CollabMaps:
    """Solve the fusion problem on the parties' mapped anchors.

    Column-concatenates the anchor blocks, takes the rank-``m_hat`` SVD
    to find the common target subspace, and builds each party's map as
    ``G_i = pinv(block_i) @ U_mhat @ C``. In "sigma" mode C is the
    diagonal of leading singular values; in "identity" mode C = I.
    """
    if c_mode not in C_MODES:
        raise InvalidRankError(f"unknown c_mode {c_mode!r}")
    blocks = [as_matrix(B, f"anchor_blocks[{i}]") for i, B in enumerate(anchor_blocks)]
    if not blocks:
        raise InvalidShapeError("no anchor blocks given")
    r = blocks[0].shape[0]
    for i, B in enumerate(blocks):
        if B.shape[0] != r:
            raise InvalidShapeError(
                f"anchor_blocks[{i}] has {B.shape[0]} rows, expected {r}"
            )
    total_width = sum(B.shape[1] for B in blocks)
    if not 1 <= m_hat <= total_width:
        raise InvalidRankError(f"m_hat must be in [1, {total_width}], got {m_hat}")
    if r < m_hat:
        raise InsufficientSamplesError(
            f"anchor has {r} rows, fewer than m_hat={m_hat}"
        )

    factors = svd(np.hstack(blocks))
    U = factors.U[:, :m_hat]
    sv = factors.singular_values
    if c_mode == "sigma":
        target = U * sv[:m_hat]
    else:
        target = U

    G = []
    warnings = []
    for i, B in enumerate(blocks):
        if np.linalg.matrix_rank(B) < B.shape[1]:
            warnings.append(
                f"anchor block {i} is rank deficient; map uses cutoff pseudo-inverse"
            )
        G.append(pseudo_inverse(B) @ target)
    return CollabMaps(
        G=tuple(G), m_hat=m_hat, c_mode=c_mode, sv=sv, warnings=tuple(warnings)
    )


def assemble_collab(shares, maps: CollabMaps):
    """Stack per-party collaboration representations in party order.

    Returns (X_hat, Y_prime) where X_hat row-stacks each party's
    ``X_tilde @ G_i`` and Y_prime stacks their labels in the same order.
    """
    if len(shares) != maps.c:
        raise InvalidShapeError(f"{len(shares)} shares but {maps.c} maps")
    X_parts, Y_parts = [], []
    for share, G in zip(shares, maps.G):
        if share.X_tilde.shape[1] != G.shape[0]:
            raise InvalidShapeError(
                f"party {share.party_id} share width {share.X_tilde.shape[1]} "
                f"does not match map input width {G.shape[0]}"
            )
        X_parts.append(share.X_tilde @ G)
        Y_parts.append(share.Y_prime)
    return np.vstack(X_parts), np.vstack(Y_parts)


def fit_collab_model(X_hat, Y_prime, lam: float, maps: CollabMaps) -> CollabModel:
    return CollabModel(maps=maps, h=ridge_fit(X_hat, Y_prime, lam))


def predict_anchor(model: CollabModel, shares) -> list:
    """Per-party anchor predictions Y_anc_i = h(X_tilde_anc_i @ G_i)."""
    if len(shares) != model.maps.c:
        raise InvalidShapeError(f"{len(shares)} shares but {model.maps.c} maps")
    out = []
    for share, G in zip(shares, model.maps.G):
        if share.X_tilde_anc.shape[1] != G.shape[0]:
            raise InvalidShapeError(
                f"party {share.party_id} anchor width {share.X_tilde_anc.shape[1]} "
                f"does not match map input width {G.shape[0]}"
            )
        out.append(ridge_predict(model.h, share.X_tilde_anc @ G))
    return out
