"""Orchestration: the four analysis modes, AUC, and the trial harness."""

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .anchor import assemble_anchor, default_anchor_rank, local_anchor
from .dataio import LabeledDataset, horizontal_split, one_hot
from .errors import (
    ConfigurationError,
    InsufficientDataError,
    InvalidLabelError,
    InvalidShapeError,
    UndefinedAucError,
)
from .master import (
    C_MODES,
    assemble_collab,
    compute_collab_maps,
    default_m_hat,
    fit_collab_model,
    predict_anchor,
)
from .matrixkit import RandomSource, fold_seed, ridge_fit, ridge_predict
from .worker import (
    encode_share,
    fit_local_model,
    make_map,
    make_share,
    predict_local,
)

MODES = ("local", "centralized", "dc_naive", "dc_proposed")

# Role constants separating the independent random streams derived from
# one seed. Streams are derived from seed values, never from shared
# stream state, so in-process and networked runs draw identical numbers.
ROLE_SPLIT = 1
ROLE_ANCHOR_LOCAL = 2
ROLE_ANCHOR_POOL = 3
ROLE_MAP = 4
ROLE_PERM = 5
ROLE_TRIAL_SPLIT = 11
ROLE_TRIAL_ANCHOR = 12
ROLE_TRIAL_WORKER = 13

MAX_SPLIT_RETRIES = 20


@dataclass(frozen=True)
class Seeds:
    """Seed triple; None means OS entropy (non-reproducible).

    anchor_seed is the one seed shared across parties; split_seed drives
    partitioning and the test draw; trial_seed drives per-party map and
    permutation randomness (entropy in production).
    """

    anchor_seed: int | None = None
    split_seed: int | None = None
    trial_seed: int | None = None


def source_for(seed, *indices) -> RandomSource:
    if seed is None:
        return RandomSource.entropy()
    return RandomSource.seeded(fold_seed(seed, *indices))


def party_anchor_source(seeds: Seeds, party_index: int) -> RandomSource:
    return source_for(seeds.anchor_seed, ROLE_ANCHOR_LOCAL, party_index)


def pool_anchor_source(seeds: Seeds) -> RandomSource:
    return source_for(seeds.anchor_seed, ROLE_ANCHOR_POOL)


def party_map_source(seeds: Seeds, party_index: int) -> RandomSource:
    return source_for(seeds.trial_seed, ROLE_MAP, party_index)


def party_perm_source(seeds: Seeds, party_index: int) -> RandomSource:
    return source_for(seeds.trial_seed, ROLE_PERM, party_index)


@dataclass(frozen=True)
class RunConfig:
    mode: str = "dc_proposed"
    party_sizes: tuple = (10, 10, 10, 10)
    test_size: int = 20
    m_tilde: int | None = None  # None: min(m - 1, smallest party - 1)
    m_hat: int | None = None  # None: equals m_tilde
    c_mode: str = "sigma"
    lambda_collab: float = 1.0
    lambda_local: float = 1.0
    r: int = 2000
    delta: float = 0.05
    anchor_rank: int | None = None  # None: half of min(n_i, m) per party
    permute: bool = True
    seeds: Seeds = field(default_factory=Seeds)


@dataclass(frozen=True)
class PredictionResult:
    mode: str
    predictions: tuple  # per-party test-score matrices
    auc: tuple  # per-party AUC on the shared test rows
    wall_time: float
    anchor_predictions: tuple | None = None  # Y_anc per party (dc_proposed)


@dataclass(frozen=True)
class ModeSummary:
    mode: str
    mean_auc: float
    std_error: float
    trial_aucs: tuple


@dataclass(frozen=True)
class ExperimentReport:
    summaries: tuple
    trials: int
    config: RunConfig

    def summary(self, mode: str) -> ModeSummary:
        for s in self.summaries:
            if s.mode == mode:
                return s
        raise KeyError(mode)


def auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative.

    Mann-Whitney form with tied ranks, so equal scores count one half.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if scores.shape != labels.shape:
        raise InvalidShapeError(
            f"{scores.size} scores but {labels.size} labels"
        )
    if not set(np.unique(labels)) <= {0.0, 1.0}:
        raise InvalidLabelError("labels must be binary 0/1")
    pos = labels == 1.0
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError("AUC needs at least one positive and one negative")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    average_rank = (ends - counts + 1 + ends) / 2.0
    ranks = average_rank[inverse]
    return float(
        (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    )


def _check_config(config: RunConfig, D: LabeledDataset) -> None:
    if config.mode not in MODES:
        raise ConfigurationError(f"unknown mode {config.mode!r}")
    if config.c_mode not in C_MODES:
        raise ConfigurationError(f"unknown c_mode {config.c_mode!r}")
    if not config.party_sizes or any(s < 1 for s in config.party_sizes):
        raise ConfigurationError("party_sizes must be positive")
    if config.test_size < 1:
        raise ConfigurationError("test_size must be positive")
    if config.r < 1:
        raise ConfigurationError("r must be positive")
    if config.delta < 0:
        raise ConfigurationError("delta must be nonnegative")
    if config.lambda_collab < 0 or config.lambda_local < 0:
        raise ConfigurationError("regularization must be nonnegative")
    if sum(config.party_sizes) + config.test_size > D.n:
        raise ConfigurationError(
            f"{sum(config.party_sizes)} party rows + {config.test_size} test rows "
            f"exceed the {D.n} available"
        )
    if config.m_tilde is not None and not 1 <= config.m_tilde <= D.m:
        raise ConfigurationError(f"m_tilde must be in [1, {D.m}]")
    if not set(np.unique(D.Y)) <= {0.0, 1.0}:
        raise ConfigurationError("dataset labels must be binary 0/1")


def resolve_m_tilde(config: RunConfig, m: int) -> int:
    if config.m_tilde is not None:
        return config.m_tilde
    return max(1, min(m - 1, min(config.party_sizes) - 1))


def trial_split(config: RunConfig, D: LabeledDataset):
    """Split into parties and draw the shared test rows.

    Retries with a re-folded split stream when the test draw comes out
    single-class (AUC would be undefined); the retry path is a pure
    function of the seeds, so every mode of a trial lands on the same
    final split.
    """
    for retry in range(MAX_SPLIT_RETRIES):
        src = source_for(config.seeds.split_seed, ROLE_SPLIT, retry)
        part = horizontal_split(D, list(config.party_sizes), src)
        pool = part.test_pool
        pick = src.choice(pool.n, config.test_size)
        y_test = pool.Y[pick, 0]
        if 0 < y_test.sum() < y_test.size:
            return part.parties, pool.X[pick], y_test
    raise InsufficientDataError(
        f"test draw was single-class in {MAX_SPLIT_RETRIES} retries"
    )


def _party_labels(party) -> np.ndarray:
    return one_hot(party.Y[:, 0].astype(int), 2)


def _build_anchor(config: RunConfig, parties, m: int) -> np.ndarray:
    locals_ = []
    for i, party in enumerate(parties):
        rank = config.anchor_rank
        if rank is None:
            rank = default_anchor_rank(party.n, m)
        locals_.append(
            local_anchor(party.X, rank, config.delta, party_anchor_source(config.seeds, i))
        )
    aset = assemble_anchor(
        locals_, config.r, pool_anchor_source(config.seeds), delta=config.delta
    )
    return aset.X_anc


def _run_local(config, parties, X_test):
    preds = []
    for party in parties:
        model = ridge_fit(party.X, _party_labels(party), config.lambda_local)
        preds.append(ridge_predict(model, X_test))
    return tuple(preds), None


def _run_centralized(config, parties, X_test):
    X = np.vstack([p.X for p in parties])
    Y = np.vstack([_party_labels(p) for p in parties])
    model = ridge_fit(X, Y, config.lambda_collab)
    shared = ridge_predict(model, X_test)
    return tuple(shared for _ in parties), None


def _run_dc_naive(config, parties, X_test, m):
    m_tilde = resolve_m_tilde(config, m)
    m_hat = config.m_hat if config.m_hat is not None else default_m_hat([m_tilde] * len(parties))
    X_anc = _build_anchor(config, parties, m)
    maps, shares = [], []
    for i, party in enumerate(parties):
        wm = make_map(party.X, m_tilde, "naive_pca", party_map_source(config.seeds, i))
        share = make_share(
            wm, i, party.X, _party_labels(party), X_anc,
            party_perm_source(config.seeds, i), permute=config.permute,
        )
        maps.append(wm)
        shares.append(share)
    cmaps = compute_collab_maps([s.X_tilde_anc for s in shares], m_hat, config.c_mode)
    X_hat, Y_prime = assemble_collab(shares, cmaps)
    model = fit_collab_model(X_hat, Y_prime, config.lambda_collab, cmaps)
    preds = tuple(
        ridge_predict(model.h, wm.apply(X_test) @ G)
        for wm, G in zip(maps, cmaps.G)
    )
    return preds, None


def _run_dc_proposed(config, parties, X_test, m):
    m_tilde = resolve_m_tilde(config, m)
    m_hat = config.m_hat if config.m_hat is not None else default_m_hat([m_tilde] * len(parties))
    X_anc = _build_anchor(config, parties, m)
    shares = []
    for i, party in enumerate(parties):
        wm = make_map(
            party.X, m_tilde, "proposed_randomized", party_map_source(config.seeds, i)
        )
        shares.append(
            encode_share(
                wm, i, party.X, _party_labels(party), X_anc,
                party_perm_source(config.seeds, i), permute=config.permute,
            )
        )
    cmaps = compute_collab_maps([s.X_tilde_anc for s in shares], m_hat, config.c_mode)
    X_hat, Y_prime = assemble_collab(shares, cmaps)
    model = fit_collab_model(X_hat, Y_prime, config.lambda_collab, cmaps)
    anchor_preds = predict_anchor(model, shares)
    preds = []
    for i, Y_anc in enumerate(anchor_preds):
        t_i = fit_local_model(X_anc, Y_anc, config.lambda_local, party_id=i)
        preds.append(predict_local(t_i, X_test))
    return tuple(preds), tuple(anchor_preds)


def run(config: RunConfig, D: LabeledDataset) -> PredictionResult:
    """Run one analysis mode end to end on one split."""
    _check_config(config, D)
    start = time.perf_counter()
    parties, X_test, y_test = trial_split(config, D)
    if config.mode == "local":
        preds, anchor_preds = _run_local(config, parties, X_test)
    elif config.mode == "centralized":
        preds, anchor_preds = _run_centralized(config, parties, X_test)
    elif config.mode == "dc_naive":
        preds, anchor_preds = _run_dc_naive(config, parties, X_test, D.m)
    else:
        preds, anchor_preds = _run_dc_proposed(config, parties, X_test, D.m)
    aucs = tuple(auc(P[:, 1], y_test) for P in preds)
    return PredictionResult(
        mode=config.mode,
        predictions=preds,
        auc=aucs,
        wall_time=time.perf_counter() - start,
        anchor_predictions=anchor_preds,
    )


def trial_seeds(base: Seeds, index: int) -> Seeds:
    """Per-trial seeds, derived from the trial seed and index alone."""
    if base.trial_seed is None:
        return Seeds()
    return Seeds(
        anchor_seed=fold_seed(base.trial_seed, index, ROLE_TRIAL_ANCHOR),
        split_seed=fold_seed(base.trial_seed, index, ROLE_TRIAL_SPLIT),
        trial_seed=fold_seed(base.trial_seed, index, ROLE_TRIAL_WORKER),
    )


def _one_trial(config: RunConfig, D: LabeledDataset, index: int, modes):
    seeds_t = trial_seeds(config.seeds, index)
    return [
        float(np.mean(run(replace(config, mode=mode, seeds=seeds_t), D).auc))
        for mode in modes
    ]


def experiment(config: RunConfig, D: LabeledDataset, trials: int = 20,
               modes=MODES, jobs: int = 1) -> ExperimentReport:
    """Paired multi-trial comparison of analysis modes.

    Every mode within a trial runs from the same derived seeds, hence
    the same split, anchor, and worker randomness where applicable. A
    trial's AUC for a mode is the mean of its per-party AUCs. Trials are
    independent; jobs > 1 runs them concurrently, and aggregation is by
    trial index, so the report does not depend on completion order.
    """
    if trials < 1:
        raise ConfigurationError("trials must be at least 1")
    if jobs < 1:
        raise ConfigurationError("jobs must be at least 1")
    modes = tuple(modes)
    for mode in modes:
        if mode not in MODES:
            raise ConfigurationError(f"unknown mode {mode!r}")
    if jobs == 1:
        rows = [_one_trial(config, D, t, modes) for t in range(trials)]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(
                pool.map(lambda t: _one_trial(config, D, t, modes), range(trials))
            )
    per_mode = {mode: [row[k] for row in rows] for k, mode in enumerate(modes)}
    summaries = []
    for mode in modes:
        values = per_mode[mode]
        se = float(np.std(values, ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
        summaries.append(
            ModeSummary(mode, float(np.mean(values)), se, tuple(values))
        )
    return ExperimentReport(summaries=tuple(summaries), trials=trials, config=config)


def write_report_csv(report: ExperimentReport, path, dataset: str = "dataset") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "dataset", "trials", "mean_auc", "stderr"])
        for s in report.summaries:
            writer.writerow([s.mode, dataset, report.trials, repr(s.mean_auc), repr(s.std_error)])


def format_report_table(report: ExperimentReport, dataset: str = "dataset") -> str:
    lines = [f"dataset: {dataset} ({report.trials} trials, mean ± SE)"]
    for s in report.summaries:
        lines.append(f"  {s.mode:<12} {s.mean_auc:.2f} ± {s.std_error:.2f}")
    return "\n".join(lines)
