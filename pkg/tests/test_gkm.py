import numpy as np
import pytest

from dpkmeans.data import SyntheticSpec, gen_synthetic
from dpkmeans.gkm import (
    BLOCK_MAX_ITER,
    align_to_reference,
    BlockPolicy,
    batched_lloyd,
    gkm,
    noise_scale,
    partition_blocks,
    resolve_ell,
    sag_only,
)
from dpkmeans.kmeans import lloyd, nicv
from dpkmeans.mechanisms import Budget, ParameterError, make_rng

# dataset rows: (name, N, k, ell_gkm, ell_gkm_3k)
TABLE = [
    ("S1", 5000, 15, 30, 111),
    ("Gowalla", 107091, 5, 103, 7139),
    ("TIGER", 16281, 2, 48, 2714),
    ("Image", 34112, 3, 65, 3790),
    ("Adult-num", 48841, 5, 75, 3256),
    ("Lifesci", 26733, 3, 59, 2970),
]


@pytest.mark.parametrize("name,n,k,ell,ell3k", TABLE)
def test_block_counts_match_dataset_table(name, n, k, ell, ell3k):
    assert resolve_ell(n, k, BlockPolicy.n_pow_04()) == ell
    assert resolve_ell(n, k, BlockPolicy.three_k()) == ell3k


def test_synthetic_row():
    assert resolve_ell(10_000, 5, BlockPolicy.n_pow_04()) == 40
    assert resolve_ell(10_000, 5, BlockPolicy.three_k()) == 667


def test_three_k_small_n_is_one_block():
    assert resolve_ell(4, 5, BlockPolicy.three_k()) == 1


def test_explicit_too_large():
    with pytest.raises(ParameterError):
        resolve_ell(10, 2, BlockPolicy.explicit(11))


def test_partition_sizes_and_disjointness():
    X = np.arange(10.0)[:, None]
    blocks = partition_blocks(X, 3, rng=0)
    assert sorted(len(b) for b in blocks) == [3, 3, 4]
    np.testing.assert_array_equal(np.sort(np.concatenate(blocks).ravel()), np.arange(10.0))


def test_singleton_blocks():
    assert all(len(b) == 1 for b in partition_blocks(np.zeros((7, 2)), 7, rng=0))


def test_noise_scale_arithmetic():
    assert noise_scale(5, 2, 7139, 1.0) == pytest.approx(2 * 2 * 5 * 2 / 7139)
    assert noise_scale(5, 2, 7139, 1.0) == pytest.approx(5.60e-3, rel=1e-3)


def test_batched_lloyd_matches_lloyd(rng):
    blocks = [rng.uniform(-1, 1, (n, 2)) for n in (20, 23, 17)]
    init = rng.uniform(-1, 1, (3, 4, 2))
    out = batched_lloyd(blocks, init, BLOCK_MAX_ITER, 1e-6)
    for b in range(3):
        np.testing.assert_allclose(out[b], lloyd(blocks[b], init[b], max_iter=BLOCK_MAX_ITER), atol=1e-12)


def _lex(C):
    return C[np.lexsort(C.T[::-1])]


def test_single_block_noise_free_is_kmeans(five_blobs):
    data, _ = five_blobs
    seed = 4
    out = gkm(data, 5, 1e9, BlockPolicy.explicit(1), rng=seed)
    # replay the stream: permutation, then k points of the single block as init
    rng = make_rng(seed)
    block = data.points[rng.permutation(data.n)]
    init = block[rng.choice(data.n, 5, replace=False)]
    expected = lloyd(data, init, max_iter=BLOCK_MAX_ITER)
    np.testing.assert_allclose(_lex(out), _lex(expected), atol=1e-3)


def test_alignment_recovers_permuted_blocks(rng):
    C = np.array([[-0.5, -0.5], [0.5, 0.5], [0.5, -0.5]])
    blocks = np.stack([C[rng.permutation(3)] + rng.normal(0, 0.01, C.shape) for _ in range(50)])
    aligned = align_to_reference(blocks, C + 0.2)
    np.testing.assert_allclose(aligned.mean(axis=0), C, atol=0.01)


@pytest.mark.parametrize("alignment", ["shared_init", "sort"])
def test_other_alignments_run(two_blobs, alignment):
    data, _ = two_blobs
    out = gkm(data, 2, 1.0, rng=0, alignment=alignment)
    assert out.shape == (2, 2) and np.all(np.abs(out) <= 1)


def test_unknown_alignment(two_blobs):
    with pytest.raises(ParameterError):
        gkm(two_blobs[0], 2, 1.0, alignment="nearest")


def test_sag_near_true_centers_with_small_blocks(two_blobs):
    data, centers = two_blobs
    agg = sag_only(data, 2, resolve_ell(data.n, 2, BlockPolicy.three_k()), rng=0)
    # match aggregated centroids to the true centres
    err = min(np.abs(agg - centers).max(), np.abs(agg[::-1] - centers).max())
    assert err < 0.1


def test_noise_only_adds_error(two_blobs):
    data, _ = two_blobs
    ell = resolve_ell(data.n, 2, BlockPolicy.n_pow_04())
    clean = [nicv(data, sag_only(data, 2, ell, rng=s)) for s in range(100)]
    noisy = [nicv(data, gkm(data, 2, 0.1, rng=s)) for s in range(100)]
    assert np.mean(clean) <= np.mean(noisy)


def test_ledger_and_half_range_option(two_blobs):
    data, _ = two_blobs
    b = Budget(1.0)
    gkm(data, 2, 1.0, rng=0, budget=b)
    assert b.ledger == [("gkm/aggregate", 1.0)]
    b = Budget(1.0)
    gkm(data, 2, 1.0, rng=0, budget=b, half_budget_range=True)
    assert b.exhausted() and len(b.ledger) == 2


def test_three_k_beats_n_pow_04_at_low_eps():
    data, _ = gen_synthetic(SyntheticSpec(d=2, k=2, n=16_000, separation=0.8, seed=1))
    small = np.mean([nicv(data, gkm(data, 2, 0.1, BlockPolicy.three_k(), rng=s)) for s in range(20)])
    large = np.mean([nicv(data, gkm(data, 2, 0.1, BlockPolicy.n_pow_04(), rng=s)) for s in range(20)])
    assert small < large
