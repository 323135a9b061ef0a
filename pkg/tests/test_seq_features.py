import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abreformat.dataset import AMINO_ACIDS
from abreformat.seq_features import (
    ALIGNED_LENGTH,
    ALPHABET_SIZE,
    GAP,
    EmbeddingMatrix,
    align_chain,
    one_hot_features,
    pool_embedding,
    read_embedding,
    read_position_map,
    sequence_columns,
    sequence_dim,
    write_embedding,
    write_position_map,
)

VOCAB = [f"L{i}" for i in range(8)]


def gap_positions(chain):
    return [i + 1 for i, c in enumerate(chain.positions) if c == GAP]


def test_full_length_has_no_gaps():
    seq = ("ACDEFGHIKLMNPQRSTVWY" * 8)[:152]
    assert gap_positions(align_chain(seq)) == []


def test_position_map_places_residues():
    chain = align_chain("ACD", [(1, 1), (2, 5), (3, 6)])
    assert gap_positions(chain) == [2, 3, 4] + list(range(7, 153))
    assert chain.to_string()[:6] == "A---CD"


@pytest.mark.parametrize("pmap", [
    [(1, 1), (2, 1), (3, 6)],   # duplicate AHo position
    [(1, 1), (2, 5)],           # residue 3 unmapped
    [(1, 5), (2, 1), (3, 6)],   # order reversed
    [(1, 1), (2, 5), (3, 153)],  # out of range
])
def test_bad_position_maps(pmap):
    with pytest.raises(ValueError):
        align_chain("ACD", pmap)


def test_too_long_sequence():
    with pytest.raises(ValueError):
        align_chain("A" * 153)


def test_position_map_file_roundtrip(tmp_path):
    pmap = [(1, 3), (2, 4), (3, 10)]
    write_position_map(pmap, tmp_path / "m.txt")
    assert read_position_map(tmp_path / "m.txt") == pmap


def test_dimension_with_eight_linkers():
    assert sequence_dim(8) == 2 * 152 * 21 + 2 + 8 == 6394
    x = one_hot_features(align_chain("EVQ"), align_chain("DIQ"), "VH_VL", "L3", VOCAB)
    assert x.shape == (6394,)
    assert len(sequence_columns(VOCAB)) == 6394


def test_all_gap_chains():
    x = one_hot_features(align_chain(""), align_chain(""), "VH_VL", "L0", VOCAB)
    blocks = x[: 2 * ALIGNED_LENGTH * ALPHABET_SIZE].reshape(-1, ALPHABET_SIZE)
    assert np.all(blocks[:, GAP] == 1.0) and blocks.sum() == 2 * ALIGNED_LENGTH


@pytest.mark.parametrize("orient,expected", [("VH_VL", [1, 0]), ("VL_VH", [0, 1])])
def test_orientation_block(orient, expected):
    x = one_hot_features(align_chain("EV"), align_chain("DI"), orient, "L0", VOCAB)
    o = 2 * ALIGNED_LENGTH * ALPHABET_SIZE
    assert x[o : o + 2].tolist() == expected


def test_unknown_linker_rejected():
    with pytest.raises(ValueError):
        one_hot_features(align_chain("EV"), align_chain("DI"), "VH_VL", "L99", VOCAB)


def test_pool_examples():
    assert pool_embedding(np.array([[1.0, 3.0], [3.0, 5.0]])).tolist() == [2.0, 4.0]
    assert pool_embedding(np.array([[7.0, -1.0]])).tolist() == [7.0, -1.0]


def test_pool_matches_summation_oracle(rng):
    M = rng.normal(size=(100, 480))
    oracle = np.array([sum(M[i, j] for i in range(100)) for j in range(480)]) / 100
    np.testing.assert_allclose(pool_embedding(EmbeddingMatrix(M, "VH")), oracle, rtol=0, atol=1e-12)


def test_pool_rejects_empty_and_nan():
    with pytest.raises(ValueError):
        pool_embedding(np.empty((0, 4)))
    with pytest.raises(ValueError):
        pool_embedding(np.array([[np.nan, 1.0]]))


@pytest.mark.parametrize("suffix", [".bin", ".txt"])
def test_embedding_file_roundtrip(tmp_path, rng, suffix):
    m = EmbeddingMatrix(rng.normal(size=(5, 3)), "VL")
    write_embedding(m, tmp_path / f"e{suffix}")
    back = read_embedding(tmp_path / f"e{suffix}")
    assert back.chain_id == "VL"
    np.testing.assert_array_equal(back.values, m.values)


# -- properties -------------------------------------------------------------

seqs = st.text(alphabet=AMINO_ACIDS, max_size=152)


@settings(max_examples=100, deadline=None)
@given(seqs, seqs, st.sampled_from(["VH_VL", "VL_VH"]), st.sampled_from(VOCAB))
def test_positional_blocks_are_one_hot(vh, vl, orient, linker):
    x = one_hot_features(align_chain(vh), align_chain(vl), orient, linker, VOCAB)
    blocks = x[: 2 * ALIGNED_LENGTH * ALPHABET_SIZE].reshape(-1, ALPHABET_SIZE)
    assert np.all(blocks.sum(axis=1) == 1.0)
    assert set(np.unique(x)) <= {0.0, 1.0}


@settings(max_examples=100, deadline=None)
@given(st.tuples(seqs, seqs, st.sampled_from(["VH_VL", "VL_VH"]), st.sampled_from(VOCAB)),
       st.tuples(seqs, seqs, st.sampled_from(["VH_VL", "VL_VH"]), st.sampled_from(VOCAB)))
def test_one_hot_injective(a, b):
    fa = one_hot_features(align_chain(a[0]), align_chain(a[1]), a[2], a[3], VOCAB)
    fb = one_hot_features(align_chain(b[0]), align_chain(b[1]), b[2], b[3], VOCAB)
    assert (a == b) == bool(np.array_equal(fa, fb))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_pool_permutation_invariant(rows, cols, seed):
    r = np.random.default_rng(seed)
    M = r.normal(size=(rows, cols))
    np.testing.assert_allclose(pool_embedding(M[r.permutation(rows)]), pool_embedding(M),
                               rtol=0, atol=1e-12)
