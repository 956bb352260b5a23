import numpy as np
import pytest

from dcollab import anchor
from dcollab.errors import InsufficientDataError, InvalidRankError, InvalidShapeError
from dcollab.matrixkit import RandomSource, svd


def test_default_anchor_rank():
    assert anchor.default_anchor_rank(10, 4) == 2
    assert anchor.default_anchor_rank(5, 7) == 3
    assert anchor.default_anchor_rank(1, 1) == 1


def test_local_anchor_full_rank_zero_delta_is_identity():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(8, 5))
    out = anchor.local_anchor(X, rank=5, delta=0.0, src=RandomSource.seeded(1))
    np.testing.assert_allclose(out, X, atol=1e-10)


def test_local_anchor_perturbation_bounded_entrywise():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 6))
    tsvd_part = anchor.local_anchor(X, rank=3, delta=0.0, src=RandomSource.seeded(2))
    out = anchor.local_anchor(X, rank=3, delta=0.05, src=RandomSource.seeded(2))
    assert np.max(np.abs(out - tsvd_part)) <= 0.05


def test_local_anchor_rank1_residual_matches_svd_tail():
    # Oracle: dropping all but the top singular direction leaves a
    # residual whose Frobenius norm is the norm of the trailing
    # singular values.
    rng = np.random.default_rng(2)
    X = rng.normal(size=(10, 4)) @ np.diag([3.0, 1.0, 0.2, 0.05])
    out = anchor.local_anchor(X, rank=1, delta=0.0, src=RandomSource.seeded(3))
    tail = svd(X).singular_values[1:]
    residual = np.linalg.norm(X - out)
    assert abs(residual - np.linalg.norm(tail)) <= 1e-8


def test_local_anchor_rank_out_of_range():
    X = np.ones((4, 3))
    with pytest.raises(InvalidRankError):
        anchor.local_anchor(X, rank=0, delta=0.0, src=RandomSource.seeded(0))
    with pytest.raises(InvalidRankError):
        anchor.local_anchor(X, rank=4, delta=0.0, src=RandomSource.seeded(0))


def test_local_anchor_seeded_reproducible():
    X = np.random.default_rng(3).normal(size=(6, 4))
    a = anchor.local_anchor(X, 2, 0.05, RandomSource.seeded(9))
    b = anchor.local_anchor(X, 2, 0.05, RandomSource.seeded(9))
    np.testing.assert_array_equal(a, b)


def make_pool(sizes, m=4, seed=0):
    rng = np.random.default_rng(seed)
    return [rng.normal(size=(n, m)) for n in sizes]


def test_assemble_exact_pool_size_keeps_multiset():
    mats = make_pool([3, 4, 5])
    aset = anchor.assemble_anchor(mats, r=12, src=RandomSource.seeded(4))
    assert aset.X_anc.shape == (12, 4)
    pool_rows = sorted(map(tuple, np.vstack(mats)))
    assert sorted(map(tuple, aset.X_anc)) == pool_rows


def test_assemble_subsample_rows_come_from_pool():
    mats = make_pool([10, 10])
    aset = anchor.assemble_anchor(mats, r=7, src=RandomSource.seeded(5))
    assert aset.r == 7 and aset.X_anc.shape == (7, 4)
    pool = {tuple(row) for row in np.vstack(mats)}
    for row, tag in zip(aset.X_anc, aset.provenance):
        assert tuple(row) in pool
        assert tag in (0, 1)
    # subset without replacement: no duplicate picks
    assert len({tuple(r) for r in aset.X_anc}) == 7


def test_assemble_subsample_provenance_matches_party():
    mats = make_pool([5, 5], seed=6)
    aset = anchor.assemble_anchor(mats, r=6, src=RandomSource.seeded(6))
    by_party = [{tuple(r) for r in A} for A in mats]
    for row, tag in zip(aset.X_anc, aset.provenance):
        assert tuple(row) in by_party[tag]


def test_assemble_augmented_rows_in_parent_envelope():
    mats = make_pool([4, 4], seed=7)
    aset = anchor.assemble_anchor(mats, r=30, src=RandomSource.seeded(7))
    assert aset.X_anc.shape == (30, 4)
    pool = np.vstack(mats)
    lo, hi = pool.min(axis=0), pool.max(axis=0)
    np.testing.assert_array_equal(aset.X_anc[:8], pool)
    assert aset.provenance[8:] == ("augmented",) * 22
    synth = aset.X_anc[8:]
    assert np.all(synth >= lo - 1e-12) and np.all(synth <= hi + 1e-12)


def test_assemble_augmented_rows_are_two_parent_mixes():
    # Each synthesized row must be an exact convex combination of some
    # pool pair: solve for the weight from one column and check the rest.
    mats = make_pool([3, 3], seed=8)
    pool = np.vstack(mats)
    aset = anchor.assemble_anchor(mats, r=20, src=RandomSource.seeded(8))
    for row in aset.X_anc[6:]:
        ok = False
        for a in range(6):
            for b in range(6):
                diff = pool[a] - pool[b]
                j = np.argmax(np.abs(diff))
                if abs(diff[j]) < 1e-12:
                    continue
                w = (row[j] - pool[b][j]) / diff[j]
                if -1e-9 <= w <= 1 + 1e-9 and np.allclose(
                    row, w * pool[a] + (1 - w) * pool[b], atol=1e-9
                ):
                    ok = True
        assert ok


def test_assemble_seeded_reproducible():
    mats = make_pool([6, 6], seed=9)
    a = anchor.assemble_anchor(mats, r=40, src=RandomSource.seeded(10))
    b = anchor.assemble_anchor(mats, r=40, src=RandomSource.seeded(10))
    np.testing.assert_array_equal(a.X_anc, b.X_anc)
    assert a.provenance == b.provenance


def test_assemble_errors():
    with pytest.raises(InsufficientDataError):
        anchor.assemble_anchor([], r=5, src=RandomSource.seeded(0))
    with pytest.raises(InsufficientDataError):
        anchor.assemble_anchor([np.ones((1, 3))], r=5, src=RandomSource.seeded(0))
    with pytest.raises(InvalidShapeError):
        anchor.assemble_anchor(
            [np.ones((2, 3)), np.ones((2, 4))], r=4, src=RandomSource.seeded(0)
        )


def test_assemble_all_entries_finite():
    mats = make_pool([5, 5, 5], seed=11)
    aset = anchor.assemble_anchor(mats, r=100, src=RandomSource.seeded(11))
    assert np.all(np.isfinite(aset.X_anc))
