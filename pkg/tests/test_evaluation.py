import math
from collections import Counter

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from emdpriv import Bag, EmbeddingStore, PipelineConfig, PrivacyParams, RngState, VecBag
from emdpriv import evaluation as ev


def small_spec(**overrides):
    base = dict(
        topics=2,
        authors_per_topic=3,
        vocab_per_topic=9,
        dim=4,
        topic_separation=6.0,
        author_jitter=0.6,
        doc_length=15,
        seed=71,
    )
    base.update(overrides)
    return ev.SyntheticCorpusSpec(**base)


class TestCorpus:
    def test_bookkeeping(self):
        store, docs = ev.generate_corpus(small_spec())
        assert len(store) == 18
        assert len(docs) == 12  # one known text + one snippet per author
        kinds = Counter(d.kind for d in docs)
        assert kinds == Counter({"known_text": 6, "snippet": 6})
        topics = Counter(d.topic for d in docs)
        assert topics == Counter({"T0": 6, "T1": 6})
        for d in docs:
            assert d.bag.size == 15

    def test_deterministic_per_seed(self):
        s1, d1 = ev.generate_corpus(small_spec())
        s2, d2 = ev.generate_corpus(small_spec())
        assert s1.words == s2.words
        assert np.array_equal(s1.vectors, s2.vectors)
        assert [d.bag.tokens for d in d1] == [d.bag.tokens for d in d2]

    def test_validation(self):
        with pytest.raises(ValueError, match="nest"):
            small_spec(topic_separation=0.5, author_jitter=0.6)
        with pytest.raises(ValueError, match="per author"):
            small_spec(vocab_per_topic=2, authors_per_topic=3)

    def test_clean_separation_gives_perfect_topic_knn(self):
        store, docs = ev.generate_corpus(small_spec())
        known = [d for d in docs if d.kind == "known_text"]
        snippets = [d for d in docs if d.kind == "snippet"]
        assert all(ev.knn_topic(s, known, store, k=5) == s.topic for s in snippets)

    def test_author_accuracy_degrades_as_jitter_grows(self):
        def accuracy(jitter, seed):
            store, docs = ev.generate_corpus(
                small_spec(author_jitter=jitter, topic_separation=8.0, seed=seed)
            )
            known = [d for d in docs if d.kind == "known_text"]
            snippets = [d for d in docs if d.kind == "snippet"]
            return sum(ev.nn_author(s, known, store) == s.author for s in snippets)

        tight = sum(accuracy(0.6, s) for s in range(60, 65))
        # Word scatter nearly as wide as the topic spacing: sub-clusters overlap.
        loose = sum(accuracy(7.9, s) for s in range(60, 65))
        assert tight > loose


class TestNearestNeighbourClassifiers:
    def test_exact_match_returns_own_labels(self):
        store, docs = ev.generate_corpus(small_spec())
        known = [d for d in docs if d.kind == "known_text"]
        for d in known:
            assert ev.knn_topic(d, known, store, k=1) == d.topic
            assert ev.nn_author(d, known, store) == d.author

    def test_k_validation(self):
        store, docs = ev.generate_corpus(small_spec())
        known = [d for d in docs if d.kind == "known_text"]
        with pytest.raises(ValueError, match="exceeds"):
            ev.knn_topic(known[0], known, store, k=len(known) + 1)

    def test_distance_tie_keeps_document_order(self, tiny_store):
        a = ev.LabelledDoc(bag=Bag(tokens=("alpha",)), topic="TA", author="A", kind="known_text")
        b = ev.LabelledDoc(bag=Bag(tokens=("alpha",)), topic="TB", author="B", kind="known_text")
        probe = ev.LabelledDoc(bag=Bag(tokens=("alpha",)), topic="?", author="?", kind="snippet")
        assert ev.nn_author(probe, [a, b], tiny_store) == "A"
        assert ev.nn_author(probe, [b, a], tiny_store) == "B"

    def test_vote_tie_takes_smallest_label(self, tiny_store):
        docs = [
            ev.LabelledDoc(bag=Bag(tokens=("alpha",)), topic="TB", author="x", kind="known_text"),
            ev.LabelledDoc(bag=Bag(tokens=("alpha",)), topic="TA", author="y", kind="known_text"),
        ]
        probe = ev.LabelledDoc(bag=Bag(tokens=("alpha",)), topic="?", author="?", kind="snippet")
        assert ev.knn_topic(probe, docs, tiny_store, k=2) == "TA"

    def test_fully_oov_snippet_is_error(self, tiny_store):
        known = [
            ev.LabelledDoc(bag=Bag(tokens=("alpha",)), topic="T", author="a", kind="known_text")
        ]
        probe = ev.LabelledDoc(bag=Bag(tokens=("zzz",)), topic="?", author="?", kind="snippet")
        with pytest.raises(ValueError, match="no in-vocabulary"):
            ev.knn_topic(probe, known, tiny_store, k=1)

    def test_emd_variant_agrees_on_clean_clusters(self):
        store, docs = ev.generate_corpus(small_spec())
        known = [d for d in docs if d.kind == "known_text"]
        snippets = [d for d in docs if d.kind == "snippet"]
        for s in snippets[:3]:
            assert ev.nn_author(s, known, store, use_emd=True) == s.author


class TestCharNgrams:
    def test_color_colour(self):
        assert ev.char_ngrams("color", 3) == Counter({"col": 1, "olo": 1, "lor": 1})
        assert ev.char_ngrams("colour", 3) == Counter(
            {"col": 1, "olo": 1, "lou": 1, "our": 1}
        )

    def test_short_word_passes_whole(self):
        assert ev.char_ngrams("ab", 3) == Counter({"ab": 1})

    def test_repeated_substrings_counted(self):
        assert ev.char_ngrams("aaaa", 2) == Counter({"aa": 3})

    @given(st.text(alphabet="abcdef", min_size=1, max_size=12), st.integers(1, 5))
    def test_multiplicity_sum(self, word, n):
        total = sum(ev.char_ngrams(word, n).values())
        assert total == max(1, len(word) - n + 1)

    def test_doc_counts_include_multiplicity(self):
        bag = Bag(tokens=("aa", "aa"))
        assert ev.doc_ngram_counts(bag, 2) == Counter({"aa": 2})


class TestNgramAttribution:
    def known(self, *token_sets):
        return [
            ev.LabelledDoc(bag=Bag(tokens=toks), topic="T", author=f"A{i}", kind="known_text")
            for i, toks in enumerate(token_sets)
        ]

    def test_verbatim_snippet_attributed_to_itself(self, rng):
        known = self.known(("colour", "castle"), ("zebra", "quartz"))
        probe = ev.LabelledDoc(
            bag=Bag(tokens=("colour", "castle")), topic="T", author="?", kind="snippet"
        )
        got = ev.ngram_attribution(probe, known, rng, rounds=1, keep_fraction=1.0)
        assert got == "A0"

    def test_disjoint_alphabets(self, rng):
        known = self.known(("aaaa", "abab"), ("zzzz", "zyzy"))
        probe = ev.LabelledDoc(bag=Bag(tokens=("aaab",)), topic="T", author="?", kind="snippet")
        assert ev.ngram_attribution(probe, known, rng, rounds=15) == "A0"

    def test_deterministic_per_seed(self):
        known = self.known(("aaaa", "abab"), ("zzzz", "zyzy"), ("mnmn", "nmnm"))
        probe = ev.LabelledDoc(bag=Bag(tokens=("abmn",)), topic="T", author="?", kind="snippet")
        a = ev.ngram_attribution(probe, known, RngState(3), rounds=20)
        b = ev.ngram_attribution(probe, known, RngState(3), rounds=20)
        assert a == b

    def test_round_and_fraction_validation(self, rng):
        known = self.known(("abc",))
        probe = known[0]
        with pytest.raises(ValueError):
            ev.ngram_attribution(probe, known, rng, rounds=0)
        with pytest.raises(ValueError):
            ev.ngram_attribution(probe, known, rng, keep_fraction=0.0)

    def test_all_zero_vectors_score_zero(self, rng):
        # Snippet shares no n-gram with either candidate: every round scores
        # 0 for everyone and the earliest document wins each round.
        known = self.known(("aaaa",), ("bbbb",))
        probe = ev.LabelledDoc(bag=Bag(tokens=("zzzz",)), topic="T", author="?", kind="snippet")
        assert ev.ngram_attribution(probe, known, rng, rounds=5) == "A0"

    def test_topic_knn_in_ngram_space(self):
        docs = [
            ev.LabelledDoc(bag=Bag(tokens=("aaaa", "aaab")), topic="TA", author="1", kind="known_text"),
            ev.LabelledDoc(bag=Bag(tokens=("aaba", "aabb")), topic="TA", author="2", kind="known_text"),
            ev.LabelledDoc(bag=Bag(tokens=("zzzz", "zzzy")), topic="TB", author="3", kind="known_text"),
            ev.LabelledDoc(bag=Bag(tokens=("zzyz", "zyzz")), topic="TB", author="4", kind="known_text"),
        ]
        probe = ev.LabelledDoc(bag=Bag(tokens=("aaab", "aaba")), topic="?", author="?", kind="snippet")
        assert ev.ngram_knn_topic(probe, docs, n=3, k=2) == "TA"


class TestWilson:
    def test_bounds_bracket_estimate(self):
        for k, n in [(0, 100), (5, 100), (50, 100), (100, 100)]:
            lo = ev.wilson_lower(k, n)
            hi = ev.wilson_upper(k, n)
            assert 0.0 <= lo <= k / n <= hi <= 1.0

    def test_zero_successes(self):
        assert ev.wilson_lower(0, 1000) == 0.0
        assert ev.wilson_upper(0, 1000) > 0.0

    def test_tightens_with_more_trials(self):
        narrow = ev.wilson_upper(500, 1000) - ev.wilson_lower(500, 1000)
        wide = ev.wilson_upper(50, 100) - ev.wilson_lower(50, 100)
        assert narrow < wide


class TestPrivacyRatio:
    def test_identical_words_stay_within_slack(self, line_store):
        cfg = PipelineConfig(epsilon=1.0)
        report = ev.privacy_ratio_test(line_store, "mid", "mid", cfg, trials=4000, rng=RngState(5))
        assert report.log_bound == 0.0
        assert report.empirical_pass
        # Identical inputs, independent streams: ratios are pure noise around 0.
        assert report.max_log_ratio <= 0.35

    def test_exact_oracle_on_line_store(self, line_store):
        cfg = PipelineConfig(epsilon=1.0)
        report = ev.privacy_ratio_test(line_store, "low", "high", cfg, trials=12_000, rng=RngState(6))
        assert report.exact_pass
        assert report.exact_normalization_error <= 1e-9
        assert report.empirical_pass
        assert report.warning is None

    def test_warning_below_ten_thousand_trials(self, line_store):
        report = ev.privacy_ratio_test(
            line_store, "low", "mid", PipelineConfig(epsilon=1.0), trials=500, rng=RngState(7)
        )
        assert report.warning is not None

    def test_max_log_ratio_shrinks_with_epsilon(self, line_store):
        # Exact transition law: weaker noise scale brings the two output
        # distributions together monotonically.
        maxima = []
        for eps in (4.0, 2.0, 1.0, 0.5):
            report = ev.privacy_ratio_test(
                line_store, "low", "high", PipelineConfig(epsilon=eps), trials=2000, rng=RngState(8)
            )
            maxima.append(report.exact_max_log_ratio)
        assert all(a >= b for a, b in zip(maxima, maxima[1:]))
        assert maxima[-1] < maxima[0]

    def test_large_vocab_requires_1d(self, rng):
        pairs = [(f"w{i}", [float(i), 0.0]) for i in range(101)]
        store = EmbeddingStore.from_pairs(pairs)
        with pytest.raises(ValueError, match="100"):
            ev.privacy_ratio_test(store, "w0", "w1", PipelineConfig(epsilon=1.0), trials=100)


class TestUtilityBound:
    def fixture_bag(self):
        return VecBag(vectors=np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]))

    def test_precondition_enforced_with_message(self, rng):
        b = self.fixture_bag()
        with pytest.raises(ValueError, match=r"whenever epsilon\*N\*delta <= n/e"):
            ev.utility_bound_test(b, PrivacyParams(1.0, 2), delta=2.5, trials=10, rng=rng)

    def test_zero_delta_is_vacuously_passed(self, rng):
        b = self.fixture_bag()
        report = ev.utility_bound_test(b, PrivacyParams(1.0, 2), delta=0.0, trials=50, rng=rng)
        assert report.stated_bound == 0.0
        assert report.stated_pass
        assert report.p_hat == 0.0

    def test_reference_bound_holds_with_margin(self):
        # Spread 2-D bag: optimal matching strictly beats per-element radii,
        # so the empirical probability clears the reference bound.
        b = self.fixture_bag()
        p = PrivacyParams(1.0, 2)
        report = ev.utility_bound_test(
            b, p, delta=2.5, trials=4000, rng=RngState(3), enforce_precondition=False
        )
        assert report.reference_pass
        assert report.p_hat > report.reference_bound

    def test_reference_bound_passes_across_twenty_seeds(self):
        b = self.fixture_bag()
        p = PrivacyParams(1.0, 2)
        passes = 0
        for seed in range(20):
            report = ev.utility_bound_test(
                b, p, delta=2.5, trials=2000, rng=RngState(1000 + seed), enforce_precondition=False
            )
            passes += report.reference_pass
        assert passes >= 19

    def test_monte_carlo_calibrates_to_exact_law_on_clustered_bag(self):
        # All elements identical: the transport cost is exactly the mean of
        # the per-element radii, so the reference bound is the true value.
        n, big_n, eps = 2, 4, 1.0
        b = VecBag(vectors=np.zeros((big_n, n)))
        p = PrivacyParams(eps, n)
        delta = 2.0  # alpha = 8: exact probability sits mid-range
        trials = 20_000
        report = ev.utility_bound_test(
            b, p, delta=delta, trials=trials, rng=RngState(17), enforce_precondition=False
        )
        exact = report.reference_bound
        spread = 3.3 * math.sqrt(exact * (1 - exact) / trials)
        assert report.p_hat == pytest.approx(exact, abs=spread)

    def test_stated_bound_exceeds_truth_on_multi_element_bags(self):
        # The closed form with e_{n-1} is provably above the achievable
        # probability once N > 1 (the radius sum follows a Gamma with shape
        # n*N, not n); this documents the gap that the acceptance suite
        # reports as a failing criterion.
        n, big_n, eps, delta = 2, 4, 1.0, 2.0
        b = VecBag(vectors=np.zeros((big_n, n)))
        report = ev.utility_bound_test(
            b, PrivacyParams(eps, n), delta=delta, trials=5000, rng=RngState(19),
            enforce_precondition=False,
        )
        assert report.stated_bound > report.reference_bound
        assert not report.stated_pass

    def test_paper_scale_bound_evaluates_without_overflow(self):
        # n=300 and eps*N*delta = 100, well inside float range in log space.
        b = VecBag(vectors=np.zeros((4, 300)))
        p = PrivacyParams(1.0, 300)
        report = ev.utility_bound_test(b, p, delta=25.0, trials=5, rng=RngState(2))
        with mpmath.workdps(120):
            ek = sum(mpmath.mpf(100) ** i / mpmath.factorial(i) for i in range(300))
            expected = float(1 - mpmath.e ** (-100) * ek)
        assert report.stated_bound == pytest.approx(expected, rel=1e-6)
        assert math.isfinite(report.reference_bound)


class TestSweep:
    def test_none_row_matches_unperturbed_scores(self):
        spec = small_spec()
        rows = ev.sweep_epsilon(spec, [8.0], ev.SweepConfig(seed=spec.seed, rounds=3))
        store, docs = ev.generate_corpus(spec)
        known = [d for d in docs if d.kind == "known_text"]
        snippets = [d for d in docs if d.kind == "snippet"]
        sr_auth = sum(ev.nn_author(s, known, store) == s.author for s in snippets)
        sr_topic = sum(ev.knn_topic(s, known, store, k=5) == s.topic for s in snippets)
        none_row = rows[0]
        assert none_row.epsilon == "none"
        assert none_row.sr_auth == sr_auth
        assert none_row.sr_topic == sr_topic

    def test_row_structure_and_csv(self):
        rows = ev.sweep_epsilon(small_spec(), [8.0, 1.0], ev.SweepConfig(seed=1, rounds=2))
        assert [r.epsilon for r in rows] == ["none", "8", "1"]
        csv_text = ev.sweep_to_csv(rows)
        lines = csv_text.strip().split("\n")
        assert lines[0] == "epsilon,SRauth,SRtopic,DRauth,DRtopic"
        assert len(lines) == 4
        for line in lines[1:]:
            parts = line.split(",")
            assert len(parts) == 5
            assert all(0 <= int(x) <= 6 for x in parts[1:])

    def test_sweep_deterministic(self):
        a = ev.sweep_epsilon(small_spec(), [2.0], ev.SweepConfig(seed=5, rounds=2))
        b = ev.sweep_epsilon(small_spec(), [2.0], ev.SweepConfig(seed=5, rounds=2))
        assert a == b

    def test_empty_epsilons_rejected(self):
        with pytest.raises(ValueError):
            ev.sweep_epsilon(small_spec(), [], ev.SweepConfig())


def test_hash_label_is_stable():
    assert ev.hash_label("T0A01") == ev.hash_label("T0A01")
    assert ev.hash_label("T0A01") != ev.hash_label("T0A02")
