"""Identifiability checks: correlation analysis, linkage attacks, verdicts."""

from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientSamplesError,
    InvalidInputError,
    InvalidShapeError,
    MissingCapabilityError,
)
from .matrixkit import RandomSource, as_matrix
from .worker import IntermediateShare, WorkerMap, make_map

LINKAGE_STRATEGIES = ("row_index", "known_map_nn", "learned_map_nn")

# Attack accuracy above this, or near-perfect correlation, flips the verdict.
ATTACK_VERDICT_THRESHOLD = 0.5
CORRELATION_VERDICT_THRESHOLD = 0.95
# Reported as a soft indicator only; plays no part in the verdict.
CORRELATION_SOFT_INDICATOR = 0.4

READILY_IDENTIFIABLE = "readily_identifiable"
NON_READILY_IDENTIFIABLE = "non_readily_identifiable"


@dataclass(frozen=True)
class DistinctnessReport:
    min_relative_distance: float
    max_column_correlation: float
    trials: int


@dataclass(frozen=True)
class AuditReport:
    max_abs_correlation: float
    correlation_matrix: np.ndarray
    linkage_accuracy: dict
    chance_level: float
    reconstruction_distance: float | None
    verdict: str
    trace: tuple


def _pearson_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    Ac = A - A.mean(axis=0)
    Bc = B - B.mean(axis=0)
    sa = np.sqrt((Ac * Ac).sum(axis=0))
    sb = np.sqrt((Bc * Bc).sum(axis=0))
    denom = np.outer(sa, sb)
    num = Ac.T @ Bc
    # zero-variance columns get correlation 0 so reports stay total
    safe = np.where(denom == 0.0, 1.0, denom)
    return np.where(denom == 0.0, 0.0, num / safe)


def correlation_audit(X_i, X_rep):
    """Pearson correlation of every raw feature against every
    representation column, on rows the auditor has aligned.

    Returns (max_abs_corr, correlation_matrix of shape m x m_tilde).
    """
    X_i = as_matrix(X_i, "X_i")
    X_rep = as_matrix(X_rep, "X_rep")
    if X_i.shape[0] != X_rep.shape[0]:
        raise InvalidShapeError(
            f"X_i has {X_i.shape[0]} rows but X_rep has {X_rep.shape[0]}"
        )
    if X_i.shape[0] < 2:
        raise InsufficientSamplesError("correlation needs at least 2 rows")
    C = _pearson_matrix(X_i, X_rep)
    return float(np.max(np.abs(C))), C


def _nearest_rows(queries: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    d = ((queries[:, None, :] - candidates[None, :, :]) ** 2).sum(axis=2)
    return d.argmin(axis=1)


def linkage_attack(X_i, share: IntermediateShare, strategy: str,
                   true_correspondence, known_map=None,
                   disclosed_fraction: float = 0.0) -> float:
    """Try to collate share rows with raw rows; score against the truth.

    ``true_correspondence[k]`` is the raw row index behind share row k,
    supplied by the auditor for scoring only — the attacks themselves
    never read it except where pairs are explicitly disclosed.

    Strategies: ``row_index`` pairs k-th with k-th; ``known_map_nn``
    applies a held map to the raw rows and nearest-neighbor matches;
    ``learned_map_nn`` fits a linear map on a disclosed fraction of true
    pairs and matches the rest.
    """
    X_i = as_matrix(X_i, "X_i")
    rep = share.X_tilde
    n = rep.shape[0]
    truth = np.asarray(true_correspondence, dtype=int)
    if truth.shape != (n,):
        raise InvalidShapeError(
            f"true_correspondence must have {n} entries, got {truth.shape}"
        )
    if X_i.shape[0] != n:
        raise InvalidShapeError(
            f"X_i has {X_i.shape[0]} rows but the share has {n}"
        )

    if strategy == "row_index":
        return float(np.mean(truth == np.arange(n)))

    if strategy == "known_map_nn":
        if known_map is None:
            raise MissingCapabilityError("known_map_nn needs the party's map")
        images = known_map.apply(X_i) if isinstance(known_map, WorkerMap) else known_map(X_i)
        guesses = _nearest_rows(rep, images)
        return float(np.mean(guesses == truth))

    if strategy == "learned_map_nn":
        if not 0.0 <= disclosed_fraction <= 1.0:
            raise InvalidInputError("disclosed_fraction must be in [0, 1]")
        d = int(round(disclosed_fraction * n))
        d = min(d, n - 1)  # something must be left to attack
        disclosed = np.arange(d)
        held_out_share = np.arange(d, n)
        held_out_raw = np.setdiff1d(np.arange(n), truth[disclosed])
        if d == 0:
            learned = lambda X: np.zeros((X.shape[0], rep.shape[1]))
        else:
            Xa = np.hstack([X_i[truth[disclosed]], np.ones((d, 1))])
            W = np.linalg.lstsq(Xa, rep[disclosed], rcond=None)[0]
            learned = lambda X: np.hstack([X, np.ones((X.shape[0], 1))]) @ W
        images = learned(X_i[held_out_raw])
        guesses = held_out_raw[_nearest_rows(rep[held_out_share], images)]
        return float(np.mean(guesses == truth[held_out_share]))

    raise InvalidInputError(f"unknown strategy {strategy!r}")


def reconstruction_distinctness(X_i, map_factory=None, trials: int = 5) -> DistinctnessReport:
    """Build independent maps of the same data and compare the images.

    Reports the minimum pairwise relative Frobenius distance between
    representations (0 means some pair is identical, i.e. the map is
    regenerable) and the maximum pairwise column correlation.
    """
    if trials < 2:
        raise InvalidInputError("distinctness needs at least 2 trials")
    X_i = as_matrix(X_i, "X_i")
    n, m = X_i.shape
    if map_factory is None:
        m_tilde = max(1, min(m - 1, n - 1))
        map_factory = lambda: make_map(
            X_i, m_tilde, "proposed_randomized", RandomSource.entropy()
        )
    reps = [map_factory().apply(X_i) for _ in range(trials)]
    min_dist = np.inf
    max_corr = 0.0
    for a in range(trials):
        for b in range(a + 1, trials):
            A, B = reps[a], reps[b]
            scale = max(np.linalg.norm(A), np.linalg.norm(B))
            dist = 0.0 if scale == 0.0 else np.linalg.norm(A - B) / scale
            min_dist = min(min_dist, dist)
            max_corr = max(max_corr, float(np.max(np.abs(_pearson_matrix(A, B)))))
    return DistinctnessReport(
        min_relative_distance=float(min_dist),
        max_column_correlation=max_corr,
        trials=trials,
    )


def decide_verdict(max_abs_corr: float, linkage_accuracy: dict):
    trace = []
    readily = False
    for strategy, accuracy in linkage_accuracy.items():
        if accuracy > ATTACK_VERDICT_THRESHOLD:
            readily = True
            trace.append(
                f"{strategy} accuracy {accuracy:.3f} exceeds {ATTACK_VERDICT_THRESHOLD}"
            )
    if max_abs_corr >= CORRELATION_VERDICT_THRESHOLD:
        readily = True
        trace.append(
            f"max |correlation| {max_abs_corr:.3f} at or above {CORRELATION_VERDICT_THRESHOLD}"
        )
    if not readily:
        trace.append(
            f"no attack above {ATTACK_VERDICT_THRESHOLD} and max |correlation| "
            f"{max_abs_corr:.3f} below {CORRELATION_VERDICT_THRESHOLD}"
        )
    verdict = READILY_IDENTIFIABLE if readily else NON_READILY_IDENTIFIABLE
    return verdict, tuple(trace)


def audit_share(X_i, share: IntermediateShare, true_correspondence,
                known_map=None, disclosed_fraction: float = 0.0,
                reconstruction: DistinctnessReport | None = None) -> AuditReport:
    """Run the attack suite against one share and assemble the report."""
    truth = np.asarray(true_correspondence, dtype=int)
    aligned = np.empty_like(share.X_tilde)
    aligned[truth] = share.X_tilde  # auditor holds the alignment
    max_corr, C = correlation_audit(X_i, aligned)

    accuracy = {}
    notes = []
    accuracy["row_index"] = linkage_attack(X_i, share, "row_index", truth)
    try:
        accuracy["known_map_nn"] = linkage_attack(
            X_i, share, "known_map_nn", truth, known_map=known_map
        )
    except MissingCapabilityError as exc:
        notes.append(f"known_map_nn impossible: {exc}")
    accuracy["learned_map_nn"] = linkage_attack(
        X_i, share, "learned_map_nn", truth, disclosed_fraction=disclosed_fraction
    )

    verdict, trace = decide_verdict(max_corr, accuracy)
    if max_corr >= CORRELATION_SOFT_INDICATOR:
        notes.append(
            f"max |correlation| {max_corr:.3f} above soft indicator "
            f"{CORRELATION_SOFT_INDICATOR}"
        )
    return AuditReport(
        max_abs_correlation=max_corr,
        correlation_matrix=C,
        linkage_accuracy=accuracy,
        chance_level=1.0 / share.X_tilde.shape[0],
        reconstruction_distance=(
            None if reconstruction is None else reconstruction.min_relative_distance
        ),
        verdict=verdict,
        trace=trace + tuple(notes),
    )


def simulate_share_audit(X, m_tilde: int, kind: str, src: RandomSource,
                         permute: bool = True, disclosed_fraction: float = 0.0,
                         distinctness_trials: int = 0) -> AuditReport:
    """What-if audit: build the share a party would transmit, with the
    permutation recorded for scoring, and attack it.

    Naive maps are retained by their party, so the known-map attack gets
    the real map; proposed maps are destroyed after encoding, so that
    attack is attempted against the erased map.
    """
    X = as_matrix(X, "X")
    n = X.shape[0]
    wm = make_map(X, m_tilde, kind, src)
    mapped = wm.apply(X)
    P = src.permutation(n) if permute else np.arange(n)
    share = IntermediateShare(
        party_id=0,
        X_tilde=mapped[P],
        X_tilde_anc=mapped,
        Y_prime=np.zeros((n, 1)),
        m_tilde=wm.m_tilde,
    )
    if kind == "proposed_randomized":
        wm.destroy()
    reconstruction = None
    if distinctness_trials >= 2:
        factory = lambda: make_map(X, m_tilde, kind, RandomSource.entropy())
        reconstruction = reconstruction_distinctness(X, factory, distinctness_trials)
    return audit_share(
        X, share, P, known_map=wm, disclosed_fraction=disclosed_fraction,
        reconstruction=reconstruction,
    )


def format_audit_report(report: AuditReport) -> str:
    lines = [
        f"verdict = {report.verdict}",
        f"max_abs_correlation = {report.max_abs_correlation:.6f}",
        f"chance_level = {report.chance_level:.6f}",
    ]
    for strategy in LINKAGE_STRATEGIES:
        if strategy in report.linkage_accuracy:
            lines.append(
                f"linkage.{strategy} = {report.linkage_accuracy[strategy]:.6f}"
            )
    if report.reconstruction_distance is not None:
        lines.append(
            f"reconstruction.min_relative_distance = "
            f"{report.reconstruction_distance:.6f}"
        )
    for note in report.trace:
        lines.append(f"note = {note}")
    return "\n".join(lines)
