"""Party-side mapping, share encoding, erasure, and local distillation."""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionalityError,
    InvalidInputError,
    InvalidShapeError,
    MissingCapabilityError,
    SingularSystemError,
)
from .matrixkit import (
    RandomSource,
    RidgeModel,
    as_matrix,
    pca,
    ridge_fit,
    ridge_predict,
)

MAP_KINDS = ("naive_pca", "proposed_randomized")

# Resample threshold for the random mixing matrix: a nearly singular
# draw would destroy information the collaboration map needs.
MAX_MIXING_COND = 1e8


class WorkerMap:
    """A party's private row-wise dimensionality-reduction map.

    Applying the map computes ``(X - mean) @ projection``. For the
    ``naive_pca`` kind the projection is the PCA basis itself; for
    ``proposed_randomized`` it is the basis multiplied by a random
    square mixing matrix, so the map cannot be regenerated once its
    parameters are destroyed.
    """

    def __init__(self, kind: str, mean: np.ndarray, projection: np.ndarray,
                 source_mode: str):
        self.kind = kind
        self.mean = mean
        self.projection = projection
        self.m_tilde = projection.shape[1]
        self.source_mode = source_mode
        self.destroyed = False

    @property
    def m(self) -> int:
        if self.destroyed:
            raise MissingCapabilityError("map parameters were erased")
        return self.projection.shape[0]

    def apply(self, X) -> np.ndarray:
        if self.destroyed:
            raise MissingCapabilityError("map parameters were erased")
        X = as_matrix(X, "X")
        if X.shape[1] != self.projection.shape[0]:
            raise InvalidShapeError(
                f"X has {X.shape[1]} columns, map expects {self.projection.shape[0]}"
            )
        return (X - self.mean) @ self.projection

    def destroy(self) -> None:
        """Erase parameters; any later use raises."""
        self.mean = None
        self.projection = None
        self.destroyed = True

    def __repr__(self) -> str:
        state = "destroyed" if self.destroyed else f"m_tilde={self.m_tilde}"
        return f"WorkerMap(kind={self.kind!r}, {state})"


@dataclass(frozen=True)
class IntermediateShare:
    """What a party transmits: mapped data, mapped anchor, labels.

    ``X_tilde`` and ``Y_prime`` carry the same (unrecorded) row
    permutation; ``X_tilde_anc`` is never permuted. The record holds no
    mapping parameters and no permutation.
    """

    party_id: int
    X_tilde: np.ndarray
    X_tilde_anc: np.ndarray
    Y_prime: np.ndarray
    m_tilde: int


@dataclass(frozen=True)
class LocalDistilledModel:
    """Party-local predictor over raw features, distilled from anchor labels."""

    party_id: int
    model: RidgeModel


class SealedMapReplay:
    """Seeded-test-only snapshot of a map, taken before encoding.

    Lets an oracle rebuild the identical map after the original was
    consumed, e.g. to compare permuted and unpermuted encodings of the
    same f'. Refuses to seal entropy-built maps: those must stay
    unrecoverable.
    """

    def __init__(self, map: WorkerMap):
        if map.source_mode != "seeded":
            raise MissingCapabilityError("only seeded maps can be sealed for replay")
        if map.destroyed:
            raise MissingCapabilityError("cannot seal a destroyed map")
        self._kind = map.kind
        self._mean = map.mean.copy()
        self._projection = map.projection.copy()

    def rebuild(self) -> WorkerMap:
        return WorkerMap(self._kind, self._mean.copy(), self._projection.copy(),
                         source_mode="seeded")


def make_map(X_i, m_tilde: int, kind: str, src: RandomSource) -> WorkerMap:
    """Build a party's map from its own data.

    Parameters
    ----------
    X_i : array, shape (n_i, m)
        The party's raw feature rows.
    m_tilde : int
        Output dimensionality, 1 <= m_tilde <= m. Equality is the
        degenerate no-reduction case used by exact-equivalence checks.
    kind : {"naive_pca", "proposed_randomized"}
        Naive maps project onto the PCA basis; proposed maps compose
        the basis with a random square mixing matrix drawn from `src`.
    src : RandomSource
        Entropy-mode in production for the proposed kind; the mixing
        matrix must not be reproducible.
    """
    X_i = as_matrix(X_i, "X_i")
    m = X_i.shape[1]
    if kind not in MAP_KINDS:
        raise InvalidInputError(f"unknown map kind {kind!r}")
    if not 1 <= m_tilde <= m:
        raise DimensionalityError(f"m_tilde must be in [1, {m}], got {m_tilde}")
    mean, basis = pca(X_i, m_tilde)
    if kind == "naive_pca":
        projection = basis
    else:
        projection = basis @ _draw_mixing(m_tilde, src)
    return WorkerMap(kind, mean, projection, source_mode=src.mode)


def _draw_mixing(k: int, src: RandomSource) -> np.ndarray:
    for _ in range(100):
        E = src.normal(k, k)
        if np.linalg.cond(E) <= MAX_MIXING_COND:
            return E
    raise SingularSystemError("could not draw a well-conditioned mixing matrix")


def make_share(map: WorkerMap, party_id: int, X_i, Y_i, X_anc,
               src: RandomSource, permute: bool = True) -> IntermediateShare:
    """Build a share without consuming the map (the retained-map protocol,
    where parties keep f_i to map test data later)."""
    X_i = as_matrix(X_i, "X_i")
    Y_i = as_matrix(Y_i, "Y_i")
    if X_i.shape[0] != Y_i.shape[0]:
        raise InvalidShapeError(
            f"X_i has {X_i.shape[0]} rows but Y_i has {Y_i.shape[0]}"
        )
    mapped = map.apply(X_i)
    mapped_anc = map.apply(X_anc)
    if permute:
        P = src.permutation(X_i.shape[0])
    else:
        P = np.arange(X_i.shape[0])
    return IntermediateShare(
        party_id=party_id,
        X_tilde=mapped[P],
        X_tilde_anc=mapped_anc,
        Y_prime=Y_i[P],
        m_tilde=map.m_tilde,
    )


def encode_share(map: WorkerMap, party_id: int, X_i, Y_i, X_anc,
                 src: RandomSource, permute: bool = True) -> IntermediateShare:
    """Build a share and destroy the map and permutation.

    After this returns, no API exposes the map parameters or the row
    permutation; the party can no longer map anything, which is the
    point: prediction later goes through the distilled model instead.
    """
    share = make_share(map, party_id, X_i, Y_i, X_anc, src, permute=permute)
    map.destroy()
    return share


def fit_local_model(X_anc, Y_anc, lam: float, party_id: int = -1) -> LocalDistilledModel:
    """Distill returned anchor predictions into a raw-feature model t_i."""
    return LocalDistilledModel(party_id=party_id, model=ridge_fit(X_anc, Y_anc, lam))


def predict_local(model: LocalDistilledModel, X_test) -> np.ndarray:
    """Predict from raw features; needs no map, no G, no master model."""
    return ridge_predict(model.model, X_test)


# --- share record form (also the netproto payload encoding) ---------------


def matrix_to_record(M) -> dict:
    M = as_matrix(M, "M")
    return {
        "rows": M.shape[0],
        "cols": M.shape[1],
        "data": [float(v) for v in M.ravel()],
    }


def matrix_from_record(d: dict) -> np.ndarray:
    rows, cols = int(d["rows"]), int(d["cols"])
    data = np.asarray(d["data"], dtype=np.float64)
    if data.size != rows * cols:
        raise InvalidShapeError(
            f"matrix record claims {rows}x{cols} but carries {data.size} values"
        )
    return data.reshape(rows, cols)


def share_to_record(share: IntermediateShare) -> dict:
    return {
        "party_id": share.party_id,
        "m_tilde": share.m_tilde,
        "X_tilde": matrix_to_record(share.X_tilde),
        "X_tilde_anc": matrix_to_record(share.X_tilde_anc),
        "Y_prime": matrix_to_record(share.Y_prime),
    }


def share_from_record(d: dict) -> IntermediateShare:
    return IntermediateShare(
        party_id=int(d["party_id"]),
        X_tilde=matrix_from_record(d["X_tilde"]),
        X_tilde_anc=matrix_from_record(d["X_tilde_anc"]),
        Y_prime=matrix_from_record(d["Y_prime"]),
        m_tilde=int(d["m_tilde"]),
    )
