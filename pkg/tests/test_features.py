"""Tfidf, embedding training, pooling, sequence encoding, persistence."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codeset_bench.errors import ConfigError, DatasetError
from codeset_bench.features import (
    TFIDF_FILTERED,
    TFIDF_LARGE,
    EmbeddingMatrix,
    TfidfConfig,
    align_embeddings,
    average_embedding,
    build_tfidf_table,
    build_vocabulary,
    compute_idf,
    encode_corpus_sequences,
    encode_word_sequence,
    load_dense,
    load_sequences,
    load_sparse,
    load_word2vec_text,
    save_dense,
    save_sequences,
    save_sparse,
    save_word2vec_text,
    select_tfidf_config,
    tfidf_vectorize,
    train_word2vec_cbow,
)
from codeset_bench.textproc import PAD_INDEX

FIVE_DOCS = [
    ["alpha", "beta", "gamma"],
    ["alpha", "beta"],
    ["alpha", "delta"],
    ["alpha", "epsilon", "delta"],
    ["alpha", "beta", "beta", "zeta"],
]


# -------------------------------------------------------------------- idf

def test_idf_of_everywhere_token_is_one():
    table = compute_idf(build_vocabulary(FIVE_DOCS))
    # alpha in all 5 docs: ln(5/5) + 1 = 1
    assert table.idf[table.vocabulary.token_to_index["alpha"]] == pytest.approx(1.0, abs=1e-12)


def test_idf_uses_natural_log_plus_one():
    table = compute_idf(build_vocabulary(FIVE_DOCS))
    idx = table.vocabulary.token_to_index["beta"]
    assert table.idf[idx] == pytest.approx(math.log(5 / 3) + 1.0, abs=1e-12)
    idx = table.vocabulary.token_to_index["gamma"]
    assert table.idf[idx] == pytest.approx(math.log(5.0) + 1.0, abs=1e-12)


def test_idf_pad_slot_is_zero():
    table = compute_idf(build_vocabulary(FIVE_DOCS))
    assert table.idf[PAD_INDEX] == 0.0


# ------------------------------------------------------------------ tfidf

def test_tfidf_is_raw_count_times_idf_without_normalization():
    table = compute_idf(build_vocabulary(FIVE_DOCS))
    m = tfidf_vectorize(FIVE_DOCS, table).toarray()
    beta_col = table.vocabulary.token_to_index["beta"] - 1
    beta_idf = math.log(5 / 3) + 1.0
    assert m[1, beta_col] == pytest.approx(beta_idf, abs=1e-12)      # count 1
    assert m[4, beta_col] == pytest.approx(2 * beta_idf, abs=1e-12)  # count 2


def test_tfidf_column_layout_skips_pad():
    vocab = build_vocabulary(FIVE_DOCS)
    table = compute_idf(vocab)
    m = tfidf_vectorize(FIVE_DOCS, table)
    assert m.shape == (5, len(vocab.index_to_token) - 1)


def test_tfidf_ignores_out_of_vocabulary_tokens():
    table = compute_idf(build_vocabulary(FIVE_DOCS))
    m = tfidf_vectorize([["alpha", "unseen"]], table).toarray()
    assert m[0].sum() == pytest.approx(1.0)  # only alpha contributes


def test_full_rank_cut_keeps_highest_total_mass():
    # summed tfidf mass: beta 4*(ln(5/3)+1)=6.043, alpha 5*1=5,
    # delta 2*(ln(5/2)+1)=3.833, gamma=eps=zeta=ln5+1=2.609
    cfg = TfidfConfig(name="t", strategy="full_rank", max_features=3)
    table = build_tfidf_table(FIVE_DOCS, cfg)
    assert sorted(table.vocabulary.token_to_index) == ["alpha", "beta", "delta"]


def test_df_band_applies_both_bounds():
    # min 2 drops df-1 tokens; max_doc_frac 0.8 drops alpha (df 5/5)
    cfg = TfidfConfig(name="t", strategy="df_band", min_doc_freq=2, max_doc_frac=0.8)
    table = build_tfidf_table(FIVE_DOCS, cfg)
    assert sorted(table.vocabulary.token_to_index) == ["beta", "delta"]


def test_named_configs_resolve():
    assert select_tfidf_config("tfidf40k") is TFIDF_LARGE
    assert select_tfidf_config("tfidf20k") is TFIDF_FILTERED
    with pytest.raises(ConfigError):
        select_tfidf_config("tfidf99k")


def test_filtered_config_on_tiny_corpus_selects_nothing():
    # df floor of 10 exceeds every df in a 5-doc corpus
    with pytest.raises(DatasetError):
        build_tfidf_table(FIVE_DOCS, TFIDF_FILTERED)


# ------------------------------------------------------------------- cbow

def two_topic_docs(n_per_topic=30, length=12, seed=0):
    rng = np.random.default_rng(seed)
    a = [f"art{i}" for i in range(8)]
    b = [f"bio{i}" for i in range(8)]
    docs = []
    for _ in range(n_per_topic):
        docs.append(list(rng.choice(a, size=length)))
        docs.append(list(rng.choice(b, size=length)))
    return docs


def test_cbow_shapes_and_pad_row():
    docs = two_topic_docs(10)
    res = train_word2vec_cbow(docs, dim=8, epochs=1, seed=0)
    n_tokens = len(res.vocabulary.index_to_token)
    assert res.vectors.shape == (n_tokens, 8)
    assert not res.vectors[PAD_INDEX].any()
    assert res.losses.ndim == 1 and len(res.losses) > 0


def test_cbow_is_seed_deterministic():
    docs = two_topic_docs(6)
    a = train_word2vec_cbow(docs, dim=8, epochs=2, seed=3)
    b = train_word2vec_cbow(docs, dim=8, epochs=2, seed=3)
    assert np.array_equal(a.vectors, b.vectors)
    assert np.array_equal(a.losses, b.losses)


def test_cbow_loss_declines_on_learnable_corpus():
    docs = two_topic_docs(30)
    res = train_word2vec_cbow(docs, dim=16, epochs=5, seed=0)
    per_epoch = res.losses.reshape(5, -1).mean(axis=1)
    assert per_epoch[-1] < per_epoch[0]


def test_cbow_min_count_restricts_vocabulary():
    docs = [["common", "common", "rare"], ["common", "other"], ["common", "other"]]
    res = train_word2vec_cbow(docs, dim=4, epochs=1, min_count=2, seed=0)
    assert "rare" not in res.vocabulary.token_to_index


# ------------------------------------------------------------- embeddings

def test_align_embeddings_copies_known_and_zeros_unknown():
    vocab = build_vocabulary([["a", "b", "c"]])
    vecs = np.array([[1.0, 2.0], [3.0, 4.0]])
    emb = align_embeddings(vocab, ["b", "a"], vecs, oov="zeros")
    assert emb.matrix.shape == (4, 2)
    assert emb.matrix[vocab.token_to_index["a"]].tolist() == [3.0, 4.0]
    assert emb.matrix[vocab.token_to_index["b"]].tolist() == [1.0, 2.0]
    assert not emb.matrix[vocab.token_to_index["c"]].any()
    assert not emb.matrix[PAD_INDEX].any()


def test_align_embeddings_random_oov_is_seeded():
    vocab = build_vocabulary([["a", "b"]])
    vecs = np.array([[1.0, 2.0]])
    e1 = align_embeddings(vocab, ["a"], vecs, oov="random", seed=5)
    e2 = align_embeddings(vocab, ["a"], vecs, oov="random", seed=5)
    assert np.array_equal(e1.matrix, e2.matrix)
    assert e1.matrix[vocab.token_to_index["b"]].any()


def test_average_embedding_drops_pads():
    vocab = build_vocabulary([["a", "b"]])
    matrix = np.array([[0.0, 0.0], [2.0, 4.0], [6.0, 0.0]])
    emb = EmbeddingMatrix(vocabulary=vocab, matrix=matrix)
    out = average_embedding([PAD_INDEX, 1, 2], emb)
    assert out.tolist() == [4.0, 2.0]


def test_average_embedding_all_pad_gives_zeros():
    vocab = build_vocabulary([["a"]])
    emb = EmbeddingMatrix(vocabulary=vocab, matrix=np.ones((2, 3)))
    assert not average_embedding([PAD_INDEX, PAD_INDEX], emb).any()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=5), min_size=1, max_size=30),
       st.randoms(use_true_random=False))
def test_average_embedding_is_bitwise_permutation_invariant(indices, rnd):
    vocab = build_vocabulary([["a", "b", "c", "d", "e"]])
    rng = np.random.default_rng(0)
    emb = EmbeddingMatrix(vocabulary=vocab, matrix=rng.standard_normal((6, 4)))
    base = average_embedding(indices, emb)
    shuffled = list(indices)
    rnd.shuffle(shuffled)
    # bitwise equal, not approx: summation order must not depend on input order
    assert np.array_equal(base, average_embedding(shuffled, emb))


# -------------------------------------------------------------- sequences

def test_encode_word_sequence_front_pads():
    vocab = build_vocabulary([["a", "b", "c"]])
    seq = encode_word_sequence(["a", "b"], vocab, max_len=5)
    ia, ib = vocab.token_to_index["a"], vocab.token_to_index["b"]
    assert seq.tolist() == [PAD_INDEX, PAD_INDEX, PAD_INDEX, ia, ib]


def test_encode_word_sequence_drops_oov_before_truncating():
    vocab = build_vocabulary([["a", "b", "c"]])
    toks = ["a", "unseen", "b", "unseen", "c"]
    seq = encode_word_sequence(toks, vocab, max_len=2)
    # oov removal happens first, then the LAST max_len tokens are kept
    assert seq.tolist() == [vocab.token_to_index["b"], vocab.token_to_index["c"]]


def test_encode_corpus_sequences_shape_and_dtype():
    vocab = build_vocabulary([["a", "b"]])
    out = encode_corpus_sequences([["a"], ["a", "b"], []], vocab, max_len=3)
    assert out.shape == (3, 3)
    assert np.issubdtype(out.dtype, np.integer)
    assert out[2].tolist() == [PAD_INDEX] * 3


# ------------------------------------------------------------ persistence

def test_sparse_round_trip_is_exact(tmp_path):
    table = compute_idf(build_vocabulary(FIVE_DOCS))
    m = tfidf_vectorize(FIVE_DOCS, table)
    path = tmp_path / "m.sparse"
    save_sparse(m, path)
    loaded = load_sparse(path)
    assert loaded.shape == m.shape
    assert np.array_equal(loaded.toarray(), m.toarray())


def test_dense_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(4)
    m = rng.standard_normal((7, 5))
    path = tmp_path / "m.dense"
    save_dense(m, path)
    assert np.array_equal(load_dense(path), m)


def test_sequences_round_trip(tmp_path):
    seqs = np.array([[0, 0, 3], [1, 2, 3]], dtype=np.int64)
    path = tmp_path / "x.seq"
    save_sequences(seqs, path)
    assert np.array_equal(load_sequences(path), seqs)


def test_word2vec_text_round_trip_omits_pad(tmp_path):
    docs = two_topic_docs(4)
    res = train_word2vec_cbow(docs, dim=6, epochs=1, seed=1)
    path = tmp_path / "emb.txt"
    save_word2vec_text(res, path)
    tokens, vectors = load_word2vec_text(path)
    assert "" not in tokens
    assert len(tokens) == len(res.vocabulary.index_to_token) - 1
    for tok, vec in zip(tokens, vectors):
        src = res.vectors[res.vocabulary.token_to_index[tok]]
        assert np.array_equal(vec, src)
