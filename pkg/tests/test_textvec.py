import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftbench.corpus import Sample
from driftbench.textvec import (SparseVector, cosine, dataset_vector,
                                fit_tfidf, tokenize, transform)


def reference_tokens(text: str) -> list[str]:
    """Character-by-character splitter used as an independent check on the
    regex implementation."""
    chunks = []
    cur = []
    for ch in text:
        if "a" <= ch <= "z" or "A" <= ch <= "Z" or "0" <= ch <= "9":
            cur.append(ch)
        elif cur:
            chunks.append(cur)
            cur = []
    if cur:
        chunks.append(cur)

    tokens = []
    for chunk in chunks:
        piece = [chunk[0]]
        for i in range(1, len(chunk)):
            prev, ch = chunk[i - 1], chunk[i]
            nxt = chunk[i + 1] if i + 1 < len(chunk) else ""
            boundary = ch.isupper() and (
                prev.islower() or prev.isdigit()
                or (prev.isupper() and nxt.islower()))
            if boundary:
                tokens.append("".join(piece).lower())
                piece = []
            piece.append(ch)
        tokens.append("".join(piece).lower())
    return tokens


def test_tokenize_empty():
    assert tokenize("") == []
    assert tokenize("  \t\n--") == []


def test_tokenize_underscores_and_camel():
    assert tokenize("getUserName_fast") == ["get", "user", "name", "fast"]


def test_tokenize_acronym_run_matches_reference():
    for text in ("HTTPServer2 start", "parseXMLDoc", "XMLHttpRequest",
                 "ABCd", "a1B2c3", "IOError", "9Lives", "snake_case_id"):
        assert tokenize(text) == reference_tokens(text)


@given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=0x2FF),
               max_size=60))
@settings(max_examples=300, deadline=None)
def test_tokenize_matches_reference_splitter(text):
    assert tokenize(text) == reference_tokens(text)


@given(st.text(max_size=40))
def test_tokenize_output_shape(text):
    for token in tokenize(text):
        assert token
        assert all("a" <= c <= "z" or "0" <= c <= "9" for c in token)


def test_sparse_vector_drops_zeros_and_caches_norm():
    v = SparseVector({0: 3.0, 2: 0.0, 5: 4.0})
    assert v.entries == {0: 3.0, 5: 4.0}
    assert v.norm == pytest.approx(5.0, abs=1e-12)
    assert len(SparseVector()) == 0
    assert SparseVector().norm == 0.0


def test_sparse_vector_unit_and_dot():
    v = SparseVector({1: 1.0, 2: 1.0})
    u = v.unit()
    assert u.norm == pytest.approx(1.0, abs=1e-12)
    assert v.dot(SparseVector({2: 2.0, 7: 9.0})) == pytest.approx(2.0)
    assert SparseVector().unit() == SparseVector()


entries_st = st.dictionaries(st.integers(0, 50),
                             st.floats(0.0, 10.0, allow_nan=False), max_size=12)


@given(entries_st, entries_st)
def test_sparse_vector_dot_is_symmetric(a, b):
    va, vb = SparseVector(a), SparseVector(b)
    assert va.dot(vb) == pytest.approx(vb.dot(va), abs=1e-12)


@given(entries_st)
def test_sparse_vector_norm_definition(entries):
    v = SparseVector(entries)
    dense = np.zeros(51)
    for i, w in entries.items():
        dense[i] = w
    assert v.norm == pytest.approx(float(np.linalg.norm(dense)), rel=1e-12, abs=1e-300)


def test_fit_tfidf_counts():
    model = fit_tfidf([["a", "b"], ["a", "c"]])
    assert set(model.vocabulary) == {"a", "b", "c"}
    df = {t: model.doc_freq[i] for t, i in model.vocabulary.items()}
    assert df == {"a": 2, "b": 1, "c": 1}
    assert model.corpus_size == 2


def test_fit_tfidf_single_doc_df_one():
    model = fit_tfidf([["x", "y", "x", "z"]])
    assert all(df == 1 for df in model.doc_freq)


def test_fit_tfidf_rejects_empty_corpus():
    with pytest.raises(ValueError):
        fit_tfidf([])


def test_fit_tfidf_indices_dense_and_df_bounded():
    model = fit_tfidf([["a"], [], ["b", "a"]])
    assert sorted(model.vocabulary.values()) == list(range(len(model.vocabulary)))
    assert all(1 <= df <= model.corpus_size for df in model.doc_freq)


@given(st.lists(st.lists(st.sampled_from("abcdefg"), max_size=8),
                min_size=1, max_size=50))
def test_fit_tfidf_matches_bruteforce_df(docs):
    model = fit_tfidf(docs)
    every_token = {t for doc in docs for t in doc}
    assert set(model.vocabulary) == every_token
    for token in every_token:
        brute = sum(1 for doc in docs if token in doc)
        assert model.doc_freq[model.vocabulary[token]] == brute


def test_transform_hand_value():
    model = fit_tfidf([["a", "b"], ["a", "c"]])
    vec = transform(model, ["a", "b"])
    w_a, w_b = 1.0, math.log(3.0 / 2.0) + 1.0
    norm = math.hypot(w_a, w_b)
    assert vec.entries[model.vocabulary["a"]] == pytest.approx(w_a / norm, abs=1e-9)
    assert vec.entries[model.vocabulary["b"]] == pytest.approx(w_b / norm, abs=1e-9)
    assert vec.entries[model.vocabulary["a"]] == pytest.approx(0.5798, abs=1e-4)
    assert vec.entries[model.vocabulary["b"]] == pytest.approx(0.8149, abs=1e-4)


def test_transform_unknown_tokens_ignored():
    model = fit_tfidf([["a", "b"]])
    assert transform(model, ["zz", "qq"]) == SparseVector()
    assert transform(model, []) == SparseVector()


@given(st.lists(st.lists(st.sampled_from("abcde"), max_size=6), min_size=1, max_size=10),
       st.lists(st.sampled_from("abcdez"), max_size=10))
def test_transform_norm_is_zero_or_one(docs, doc):
    vec = transform(fit_tfidf(docs), doc)
    assert vec.norm == pytest.approx(0.0, abs=1e-9) or vec.norm == pytest.approx(1.0, abs=1e-9)


@given(st.lists(st.sampled_from("abc"), min_size=1, max_size=6))
def test_transform_duplication_invariant(doc):
    model = fit_tfidf([["a", "b", "c"], ["a"]])
    once = transform(model, doc)
    twice = transform(model, doc + doc)
    assert set(once.entries) == set(twice.entries)
    for i, w in once.entries.items():
        assert twice.entries[i] == pytest.approx(w, abs=1e-12)


def _sample(i: int, text: str) -> Sample:
    return Sample(f"s{i}", text, 0)


def test_dataset_vector_single_and_duplicate():
    model = fit_tfidf([["alpha", "beta"], ["alpha"]])
    one = dataset_vector(model, [_sample(0, "alpha beta")])
    direct = transform(model, ["alpha", "beta"])
    assert set(one.entries) == set(direct.entries)
    for i, w in direct.entries.items():
        assert one.entries[i] == pytest.approx(w, abs=1e-12)
    dup = dataset_vector(model, [_sample(0, "alpha beta"), _sample(1, "alpha beta")])
    for i, w in one.entries.items():
        assert dup.entries[i] == pytest.approx(w, abs=1e-12)


def test_dataset_vector_rejects_empty():
    model = fit_tfidf([["a"]])
    with pytest.raises(ValueError):
        dataset_vector(model, [])


@given(st.lists(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=8),
                min_size=1, max_size=20))
def test_dataset_vector_matches_dense_oracle(token_lists):
    corpus = [["a", "b", "c", "d", "e", "f"]] + token_lists
    model = fit_tfidf(corpus)
    samples = [_sample(i, " ".join(tokens)) for i, tokens in enumerate(token_lists)]
    got = dataset_vector(model, samples)

    size = len(model.vocabulary)
    acc = np.zeros(size)
    for tokens in token_lists:
        dense = np.zeros(size)
        for i, w in transform(model, tokens).entries.items():
            dense[i] = w
        acc += dense
    acc /= len(token_lists)
    norm = np.linalg.norm(acc)
    if norm > 0:
        acc /= norm
    for i in range(size):
        assert got.entries.get(i, 0.0) == pytest.approx(acc[i], abs=1e-12)


def test_cosine_hand_values():
    x = SparseVector({0: 1.0})
    assert cosine(x, SparseVector({0: 1.0})) == pytest.approx(1.0)
    assert cosine(x, SparseVector({1: 1.0})) == 0.0
    assert cosine(SparseVector({0: 1.0, 1: 1.0}), x) == pytest.approx(1 / math.sqrt(2), abs=1e-9)
    assert cosine(SparseVector(), x) == 0.0


@given(entries_st, entries_st)
def test_cosine_bounds_and_symmetry(a, b):
    va, vb = SparseVector(a), SparseVector(b)
    c = cosine(va, vb)
    assert 0.0 <= c <= 1.0 + 1e-12
    assert c == pytest.approx(cosine(vb, va), abs=1e-12)
    if va.norm > 0:
        assert cosine(va, va) == pytest.approx(1.0, abs=1e-9)
