import numpy as np
import pytest

from emdpriv import EmbeddingStore, embed_word, load_embeddings, nearest_word, nearest_words
from emdpriv.embeddings import word_distance
from emdpriv.mechanism import Bag, embed_bag


class TestLoad:
    def test_fixture_round_trip(self, word2vec_file):
        store = load_embeddings(word2vec_file)
        assert store.dim == 2
        assert len(store) == 3
        assert store.words == ("alpha", "beta", "gamma")
        assert np.allclose(embed_word(store, "beta"), [3.0, 0.0])

    def test_max_vocab_truncates_in_file_order(self, word2vec_file):
        store = load_embeddings(word2vec_file, max_vocab=2)
        assert len(store) == 2
        assert embed_word(store, "gamma") is None

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("banana\nalpha 1.0\n")
        with pytest.raises(ValueError, match=r":1: malformed header"):
            load_embeddings(path)

    def test_wrong_row_width_reports_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 2\nalpha 1.0 2.0\nbeta 1.0\n")
        with pytest.raises(ValueError, match=r":3: expected 3 fields"):
            load_embeddings(path)

    def test_phrase_rows_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 2\nnew york 1.0 2.0\n")
        with pytest.raises(ValueError, match=r":2: expected 3 fields"):
            load_embeddings(path)

    def test_duplicate_word_reports_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 1\nalpha 1.0\nalpha 2.0\n")
        with pytest.raises(ValueError, match=r":3: duplicate word"):
            load_embeddings(path)

    def test_unparseable_float_reports_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 2\nalpha 1.0 xyz\n")
        with pytest.raises(ValueError, match=r":2: unparseable float"):
            load_embeddings(path)

    def test_short_file_detected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("5 1\nalpha 1.0\n")
        with pytest.raises(ValueError, match="declared 5 rows"):
            load_embeddings(path)

    def test_scientific_notation_floats(self, tmp_path):
        path = tmp_path / "sci.txt"
        path.write_text("1 2\nalpha 1e-3 -2.5E2\n")
        store = load_embeddings(path)
        assert np.allclose(embed_word(store, "alpha"), [0.001, -250.0])

    def test_lowercase_vocab_first_occurrence_wins(self, tmp_path):
        path = tmp_path / "case.txt"
        path.write_text("3 1\nApple 1.0\napple 2.0\nBanana 3.0\n")
        store = load_embeddings(path, lowercase_vocab=True)
        assert len(store) == 2
        assert embed_word(store, "apple")[0] == 1.0
        assert embed_word(store, "banana")[0] == 3.0

    def test_vectors_are_read_only(self, word2vec_file):
        store = load_embeddings(word2vec_file)
        with pytest.raises(ValueError):
            store.vectors[0, 0] = 9.9


class TestEmbedWord:
    def test_known_word(self, tiny_store):
        assert np.array_equal(embed_word(tiny_store, "gamma"), [0.0, 4.0])

    def test_unknown_word_is_none(self, tiny_store):
        assert embed_word(tiny_store, "zeta") is None

    def test_case_sensitive(self, tiny_store):
        assert embed_word(tiny_store, "Alpha") is None


class TestEmbedBag:
    def test_all_known(self, tiny_store):
        bag = Bag(tokens=("alpha", "beta", "gamma", "alpha"))
        vb, passthrough = embed_bag(tiny_store, bag)
        assert vb.size == 4
        assert passthrough == ()

    def test_oov_passthrough(self, tiny_store):
        bag = Bag(tokens=("alpha", "snape", "beta", "gamma"))
        vb, passthrough = embed_bag(tiny_store, bag)
        assert vb.size == 3
        assert passthrough == ("snape",)

    def test_duplicates_keep_multiplicity(self, tiny_store):
        bag = Bag(tokens=("beta", "beta"))
        vb, _ = embed_bag(tiny_store, bag)
        assert vb.size == 2
        assert np.allclose(vb.vectors[0], vb.vectors[1])

    def test_fully_oov_is_error(self, tiny_store):
        with pytest.raises(ValueError, match="nothing to privatize"):
            embed_bag(tiny_store, Bag(tokens=("x", "y")))


class TestNearestWord:
    def test_exact_inversion(self, tiny_store):
        for w in tiny_store.words:
            assert nearest_word(tiny_store, embed_word(tiny_store, w)) == w

    def test_derived_case(self):
        store = EmbeddingStore.from_pairs([("near", [0.0, 0.0]), ("far", [10.0, 0.0])])
        # sqrt(17) to "near" vs sqrt(37) to "far".
        assert nearest_word(store, [4.0, 1.0]) == "near"

    def test_tie_broken_by_store_position(self):
        store = EmbeddingStore.from_pairs([("first", [0.0]), ("second", [2.0])])
        assert nearest_word(store, [1.0]) == "first"
        # Order flipped: the earlier row still wins.
        flipped = EmbeddingStore.from_pairs([("second", [2.0]), ("first", [0.0])])
        assert nearest_word(flipped, [1.0]) == "second"

    def test_matches_bruteforce_argmin(self, rng):
        g = rng.generator
        vectors = g.uniform(-1, 1, size=(200, 5))
        store = EmbeddingStore.from_pairs([(f"w{i}", vectors[i]) for i in range(200)])
        queries = g.uniform(-1.2, 1.2, size=(50, 5))
        got = nearest_words(store, queries)
        for q, w in zip(queries, got):
            d2 = ((vectors - q[None, :]) ** 2).sum(axis=1)
            assert w == f"w{int(np.argmin(d2))}"

    def test_chunked_scan_matches_small_scan(self, rng, monkeypatch):
        import emdpriv.embeddings as emb

        g = rng.generator
        vectors = g.uniform(-1, 1, size=(50, 3))
        store = EmbeddingStore.from_pairs([(f"w{i}", vectors[i]) for i in range(50)])
        queries = g.uniform(-1, 1, size=(23, 3))
        plain = nearest_words(store, queries)
        monkeypatch.setattr(emb, "_SCAN_CHUNK", 7)
        assert nearest_words(store, queries) == plain

    def test_query_dim_checked(self, tiny_store):
        with pytest.raises(ValueError, match="queries must be"):
            nearest_words(tiny_store, np.zeros((2, 5)))


def test_store_rejects_duplicates_and_bad_words():
    with pytest.raises(ValueError, match="duplicate"):
        EmbeddingStore.from_pairs([("a", [1.0]), ("a", [2.0])])
    with pytest.raises(ValueError, match="invalid word"):
        EmbeddingStore.from_pairs([("bad word", [1.0])])
    with pytest.raises(ValueError, match="dimensions"):
        EmbeddingStore.from_pairs([("a", [1.0]), ("b", [1.0, 2.0])])


def test_word_distance_metrics(tiny_store):
    assert word_distance(tiny_store, "alpha", "beta") == pytest.approx(3.0)
