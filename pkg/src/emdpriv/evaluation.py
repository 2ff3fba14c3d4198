"""Desk-scale verification and evaluation harness.

Three groups of machinery live here:

* a synthetic labelled corpus generator whose vocabulary forms topic
  clusters with nested author sub-clusters, standing in for real
  author/topic data at a size where every experiment runs in seconds;
* the inference attacks used to score obfuscation: 1-NN author and k-NN
  topic classifiers over word-vector centroids (the same representation the
  mechanism works in), and a character n-gram attribution scheme with
  repeated feature subsampling plus a k-NN topic classifier in that n-gram
  space (a genuinely different representation);
* statistical checks of the mechanism itself: empirical and closed-form
  privacy-ratio tests, and a Monte Carlo check of the transport-distance
  utility bound, reported with one-sided 99% Wilson intervals.

Every randomized routine takes an explicit RngState and is deterministic
per seed.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, asdict

import numpy as np

from .embeddings import EmbeddingStore, embed_word, nearest_words
from .emd import VecBag, emd_equal, emd_general
from .laplace import PrivacyParams, radial_cdf, sample_noisy_vectors
from .mechanism import Bag, PipelineConfig, embed_bag, obfuscate_document, private_bag
from .rng import RngState
from .vectors import euclidean

Z_99_ONE_SIDED = 2.3263478740408408  # standard normal quantile at 0.99


# ---------------------------------------------------------------------------
# Synthetic corpus


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    topics: int
    authors_per_topic: int
    vocab_per_topic: int
    dim: int
    topic_separation: float
    author_jitter: float
    doc_length: int
    seed: int

    def __post_init__(self):
        if min(self.topics, self.authors_per_topic, self.vocab_per_topic, self.dim, self.doc_length) < 1:
            raise ValueError("all corpus sizes must be >= 1")
        if not self.topic_separation > self.author_jitter > 0:
            raise ValueError("need topic_separation > author_jitter > 0 so clusters nest")
        if self.vocab_per_topic < self.authors_per_topic:
            raise ValueError("need at least one vocabulary word per author")


@dataclass(frozen=True)
class LabelledDoc:
    bag: Bag
    topic: str
    author: str
    kind: str  # "known_text" or "snippet"


def _ball_point(dim: int, radius: float, rng: RngState) -> np.ndarray:
    direction = rng.generator.standard_normal(dim)
    norm = np.linalg.norm(direction)
    while norm == 0.0:
        direction = rng.generator.standard_normal(dim)
        norm = np.linalg.norm(direction)
    r = radius * rng.generator.random() ** (1.0 / dim)
    return r * direction / norm


def generate_corpus(spec: SyntheticCorpusSpec) -> tuple[EmbeddingStore, list[LabelledDoc]]:
    """Build the clustered vocabulary and one known text + snippet per author.

    Topic centers sit ``topic_separation`` apart along the first axis. Each
    author's words cluster inside a ball of radius ``author_jitter / 2``
    around an author center offset ``author_jitter`` from the topic center,
    so author structure nests strictly inside topic structure.
    """
    rng = RngState(spec.seed)
    pairs: list[tuple[str, np.ndarray]] = []
    author_words: dict[str, list[str]] = {}
    labels: list[tuple[str, str]] = []

    base, extra = divmod(spec.vocab_per_topic, spec.authors_per_topic)
    for t in range(spec.topics):
        center = np.zeros(spec.dim)
        center[0] = t * spec.topic_separation
        for a in range(spec.authors_per_topic):
            author = f"T{t}A{a:02d}"
            labels.append((f"T{t}", author))
            a_rng = rng.child(t, a)
            direction = a_rng.generator.standard_normal(spec.dim)
            direction /= np.linalg.norm(direction)
            author_center = center + spec.author_jitter * direction
            n_words = base + (1 if a < extra else 0)
            words = []
            for w in range(n_words):
                word = f"t{t}a{a:02d}w{w:03d}"
                vec = author_center + _ball_point(spec.dim, spec.author_jitter / 2.0, a_rng)
                pairs.append((word, vec))
                words.append(word)
            author_words[author] = words

    store = EmbeddingStore.from_pairs(pairs)
    docs: list[LabelledDoc] = []
    for topic, author in labels:
        words = author_words[author]
        for kind in ("known_text", "snippet"):
            d_rng = rng.child(hash_label(author), 0 if kind == "known_text" else 1)
            idx = d_rng.generator.integers(0, len(words), size=spec.doc_length)
            tokens = tuple(words[i] for i in idx)
            docs.append(LabelledDoc(bag=Bag(tokens=tokens), topic=topic, author=author, kind=kind))
    return store, docs


def hash_label(label: str) -> int:
    """Stable small integer for seeding; Python's hash() is salted per process."""
    h = 0
    for ch in label:
        h = (h * 131 + ord(ch)) % (2**31)
    return h


# ---------------------------------------------------------------------------
# Same-representation inference (word-vector centroids)


def doc_centroid(store: EmbeddingStore, bag: Bag) -> np.ndarray:
    """Mean of the in-vocabulary word vectors, multiplicity included."""
    rows = [embed_word(store, t) for t in bag.tokens]
    rows = [r for r in rows if r is not None]
    if not rows:
        raise ValueError("document has no in-vocabulary tokens")
    return np.mean(rows, axis=0)


def _nearest_known(
    snippet: LabelledDoc,
    known: list[LabelledDoc],
    store: EmbeddingStore,
    k: int,
    use_emd: bool = False,
) -> list[LabelledDoc]:
    if not known:
        raise ValueError("need at least one known document")
    if k > len(known):
        raise ValueError(f"k={k} exceeds the {len(known)} known documents")
    if use_emd:
        qbag, _ = embed_bag(store, snippet.bag)
        dists = np.array(
            [emd_general(qbag, embed_bag(store, d.bag)[0])[0] for d in known]
        )
    else:
        q = doc_centroid(store, snippet.bag)
        centroids = np.array([doc_centroid(store, d.bag) for d in known])
        dists = np.linalg.norm(centroids - q[None, :], axis=1)
    order = np.argsort(dists, kind="stable")  # distance ties keep document order
    return [known[i] for i in order[:k]]


def _majority(labels: list[str]) -> str:
    votes = Counter(labels)
    return min(votes, key=lambda lab: (-votes[lab], lab))


def knn_topic(
    snippet: LabelledDoc, known: list[LabelledDoc], store: EmbeddingStore, k: int = 5
) -> str:
    """Majority topic among the k nearest known centroids."""
    return _majority([d.topic for d in _nearest_known(snippet, known, store, k)])


def nn_author(
    snippet: LabelledDoc,
    known: list[LabelledDoc],
    store: EmbeddingStore,
    use_emd: bool = False,
) -> str:
    """Author of the closest known text; optionally transport distance on bags."""
    return _nearest_known(snippet, known, store, 1, use_emd=use_emd)[0].author


# ---------------------------------------------------------------------------
# Different-representation inference (character n-grams)


def char_ngrams(word: str, n: int) -> Counter:
    """Multiset of contiguous length-n substrings; short words pass whole."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(word) < n:
        return Counter({word: 1})
    return Counter(word[i : i + n] for i in range(len(word) - n + 1))


def doc_ngram_counts(bag: Bag, n: int) -> Counter:
    total: Counter = Counter()
    for token in bag.tokens:
        total.update(char_ngrams(token, n))
    return total


def _feature_space(known: list[LabelledDoc], n: int, k_features: int) -> list[str]:
    pooled: Counter = Counter()
    for doc in known:
        pooled.update(doc_ngram_counts(doc.bag, n))
    if not pooled:
        raise ValueError("empty character n-gram feature space")
    ranked = sorted(pooled, key=lambda g: (-pooled[g], g))
    return ranked[:k_features]


def _count_vector(counts: Counter, features: list[str]) -> np.ndarray:
    return np.array([counts.get(f, 0) for f in features], dtype=np.float64)


def ngram_attribution(
    snippet: LabelledDoc,
    known: list[LabelledDoc],
    rng: RngState,
    n: int = 3,
    k_features: int = 10_000,
    rounds: int = 100,
    keep_fraction: float = 0.5,
) -> str:
    """Attribute a snippet by repeated cosine votes over n-gram subvectors.

    Each round keeps a random fraction of the most frequent n-gram features
    (ranked over the known set), scores every known text by cosine
    similarity to the snippet on the surviving features, and records the
    winner's author; the most frequent winner overall is returned. All-zero
    subvectors score 0 for that round. Ties go to the earlier document
    within a round and to the smaller author label across rounds.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must be in (0, 1]")
    features = _feature_space(known, n, k_features)
    known_matrix = np.array(
        [_count_vector(doc_ngram_counts(d.bag, n), features) for d in known]
    )
    snippet_vec = _count_vector(doc_ngram_counts(snippet.bag, n), features)
    keep = max(1, round(keep_fraction * len(features)))

    winners: list[str] = []
    for _ in range(rounds):
        idx = rng.generator.choice(len(features), size=keep, replace=False)
        sub_known = known_matrix[:, idx]
        sub_snip = snippet_vec[idx]
        snip_norm = np.linalg.norm(sub_snip)
        known_norms = np.linalg.norm(sub_known, axis=1)
        scores = np.zeros(len(known))
        if snip_norm > 0:
            ok = known_norms > 0
            scores[ok] = (sub_known[ok] @ sub_snip) / (known_norms[ok] * snip_norm)
        winners.append(known[int(np.argmax(scores))].author)
    return _majority(winners)


def ngram_knn_topic(
    snippet: LabelledDoc,
    known: list[LabelledDoc],
    n: int = 3,
    k_features: int = 10_000,
    k: int = 5,
) -> str:
    """k-NN topic vote using cosine distance in n-gram count space."""
    if k > len(known):
        raise ValueError(f"k={k} exceeds the {len(known)} known documents")
    features = _feature_space(known, n, k_features)
    known_matrix = np.array(
        [_count_vector(doc_ngram_counts(d.bag, n), features) for d in known]
    )
    snip = _count_vector(doc_ngram_counts(snippet.bag, n), features)
    snip_norm = np.linalg.norm(snip)
    known_norms = np.linalg.norm(known_matrix, axis=1)
    sims = np.zeros(len(known))
    if snip_norm > 0:
        ok = known_norms > 0
        sims[ok] = (known_matrix[ok] @ snip) / (known_norms[ok] * snip_norm)
    order = np.argsort(-sims, kind="stable")
    return _majority([known[i].topic for i in order[:k]])


# ---------------------------------------------------------------------------
# Privacy ratio checks


def wilson_lower(successes: int, trials: int, z: float = Z_99_ONE_SIDED) -> float:
    """One-sided Wilson score lower bound for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = p + z * z / (2 * trials)
    spread = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return max(0.0, (center - spread) / denom)


def wilson_upper(successes: int, trials: int, z: float = Z_99_ONE_SIDED) -> float:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = p + z * z / (2 * trials)
    spread = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return min(1.0, (center + spread) / denom)


def _laplace_cdf_1d(t: float, center: float, epsilon: float) -> float:
    if t == math.inf:
        return 1.0
    if t == -math.inf:
        return 0.0
    if t <= center:
        return 0.5 * math.exp(epsilon * (t - center))
    return 1.0 - 0.5 * math.exp(-epsilon * (t - center))


def word_transition_matrix(store: EmbeddingStore, epsilon: float) -> np.ndarray:
    """Exact word-to-word transition probabilities for a 1-D store.

    Row w gives the law of "perturb Vec(w) with 1-D Laplacian noise, then
    snap to the nearest word". Each nearest-word cell is the interval
    between midpoints of adjacent distinct values; a value shared by
    several words belongs entirely to the earliest store position, so
    shadowed words get all-zero columns.
    """
    if store.dim != 1:
        raise ValueError("closed-form transitions require a 1-D store")
    values = store.vectors[:, 0]
    distinct = sorted(set(values.tolist()))
    owners = []
    for v in distinct:
        owners.append(int(np.nonzero(values == v)[0][0]))
    edges = [-math.inf]
    for left, right in zip(distinct, distinct[1:]):
        edges.append((left + right) / 2.0)
    edges.append(math.inf)

    matrix = np.zeros((len(store), len(store)))
    for i in range(len(store)):
        center = values[i]
        for j, owner in enumerate(owners):
            lo, hi = edges[j], edges[j + 1]
            matrix[i, owner] = _laplace_cdf_1d(hi, center, epsilon) - _laplace_cdf_1d(
                lo, center, epsilon
            )
    return matrix


@dataclass(frozen=True)
class PrivacyRatioReport:
    word_1: str
    word_2: str
    epsilon: float
    distance: float
    log_bound: float
    trials: int
    max_log_ratio: float
    empirical_pass: bool
    warning: str | None
    exact_max_log_ratio: float | None
    exact_pass: bool | None
    exact_normalization_error: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def privacy_ratio_test(
    store: EmbeddingStore,
    w1: str,
    w2: str,
    cfg: PipelineConfig,
    trials: int,
    rng: RngState | None = None,
) -> PrivacyRatioReport:
    """Compare output-word distributions of the two singleton input bags.

    Empirically the max absolute log probability ratio must stay within
    epsilon * distance, up to one-sided 99% Wilson slack on both estimates;
    for 1-D stores the closed-form transition matrix is also checked, with
    tolerance 1e-6.
    """
    if len(store) > 100 and store.dim != 1:
        raise ValueError("empirical enumeration is limited to vocabularies of <= 100 words")
    if rng is None:
        rng = RngState(cfg.seed)
    p = PrivacyParams(epsilon=cfg.epsilon, dim=store.dim)
    d = float(euclidean(embed_word(store, w1), embed_word(store, w2)))
    log_bound = cfg.epsilon * d

    counts = []
    for i, w in enumerate((w1, w2)):
        z = sample_noisy_vectors(embed_word(store, w), p, rng.child(i), trials)
        out = nearest_words(store, z)
        c = Counter(out)
        counts.append(np.array([c.get(word, 0) for word in store.words], dtype=np.int64))
    c1, c2 = counts

    both = (c1 > 0) & (c2 > 0)
    if np.any(both):
        ratios = np.abs(np.log(c1[both] / trials) - np.log(c2[both] / trials))
        max_log_ratio = float(ratios.max())
    else:
        max_log_ratio = 0.0

    # A genuine violation needs the conservative ends of both intervals to
    # disagree with the bound.
    empirical_pass = True
    for a, b in ((c1, c2), (c2, c1)):
        for j in range(len(store)):
            lo = wilson_lower(int(a[j]), trials)
            hi = wilson_upper(int(b[j]), trials)
            if lo > 0 and math.log(lo) - math.log(hi if hi > 0 else 1e-300) > log_bound:
                empirical_pass = False

    warning = None if trials >= 10_000 else "fewer than 10^4 trials: slack is weak"

    exact_max = exact_pass = exact_norm = None
    if store.dim == 1:
        matrix = word_transition_matrix(store, cfg.epsilon)
        exact_norm = float(np.abs(matrix.sum(axis=1) - 1.0).max())
        r1, r2 = matrix[store.position(w1)], matrix[store.position(w2)]
        bound = math.exp(log_bound)
        exact_pass = bool(
            np.all(r1 <= bound * r2 + 1e-6) and np.all(r2 <= bound * r1 + 1e-6)
        )
        pos = (r1 > 0) & (r2 > 0)
        exact_max = float(np.abs(np.log(r1[pos]) - np.log(r2[pos])).max()) if np.any(pos) else 0.0

    return PrivacyRatioReport(
        word_1=w1,
        word_2=w2,
        epsilon=cfg.epsilon,
        distance=d,
        log_bound=log_bound,
        trials=trials,
        max_log_ratio=max_log_ratio,
        empirical_pass=empirical_pass,
        warning=warning,
        exact_max_log_ratio=exact_max,
        exact_pass=exact_pass,
        exact_normalization_error=exact_norm,
    )


# ---------------------------------------------------------------------------
# Utility bound check


@dataclass(frozen=True)
class UtilityBoundReport:
    epsilon: float
    dim: int
    bag_size: int
    delta: float
    trials: int
    p_hat: float
    wilson_lower_99: float
    stated_bound: float
    stated_pass: bool
    reference_bound: float
    reference_pass: bool

    def to_dict(self) -> dict:
        return asdict(self)


def utility_bound_test(
    b: VecBag,
    p: PrivacyParams,
    delta: float,
    trials: int,
    rng: RngState,
    enforce_precondition: bool = True,
) -> UtilityBoundReport:
    """Monte Carlo check that noised bags stay within transport distance delta.

    ``stated_bound`` is the closed-form lower bound
    ``1 - exp(-eps*N*delta) * e_{n-1}(eps*N*delta)``, which is only claimed
    whenever eps*N*delta <= n/e; by default violating parameters are
    rejected. ``reference_bound`` is the same expression with n*N in place
    of n; it equals the probability that the per-element noise radii sum to
    at most N*delta, which lower-bounds the transport event for every bag,
    with no parameter restriction.

    PASS means the one-sided 99% Wilson lower bound on the empirical
    probability is at least the corresponding closed-form bound.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if b.dim != p.dim:
        raise ValueError(f"dimension mismatch: bag has {b.dim}, params expect {p.dim}")
    alpha = p.epsilon * b.size * delta
    if enforce_precondition and alpha > p.dim / math.e:
        raise ValueError(
            f"epsilon*N*delta = {alpha:.6g} exceeds n/e = {p.dim / math.e:.6g}; "
            "the stated bound applies only whenever epsilon*N*delta <= n/e"
        )
    successes = 0
    for _ in range(trials):
        noisy = private_bag(b, p, rng)
        cost, _plan = emd_equal(b, noisy)
        if cost <= delta:
            successes += 1
    p_hat = successes / trials
    lower = wilson_lower(successes, trials)
    stated = radial_cdf(b.size * delta, PrivacyParams(p.epsilon, p.dim))
    reference = radial_cdf(b.size * delta, PrivacyParams(p.epsilon, p.dim * b.size))
    return UtilityBoundReport(
        epsilon=p.epsilon,
        dim=p.dim,
        bag_size=b.size,
        delta=delta,
        trials=trials,
        p_hat=p_hat,
        wilson_lower_99=lower,
        stated_bound=stated,
        stated_pass=lower >= stated,
        reference_bound=reference,
        reference_pass=lower >= reference,
    )


# ---------------------------------------------------------------------------
# Epsilon sweep


@dataclass(frozen=True)
class SweepConfig:
    seed: int = 0
    k_topic: int = 5
    ngram_n: int = 3
    k_features: int = 10_000
    rounds: int = 100
    keep_fraction: float = 0.5


@dataclass(frozen=True)
class SweepRow:
    epsilon: str  # "none" or a numeric string
    sr_auth: int
    sr_topic: int
    dr_auth: int
    dr_topic: int


CSV_HEADER = "epsilon,SRauth,SRtopic,DRauth,DRtopic"


def sweep_epsilon(
    spec: SyntheticCorpusSpec, epsilons: list[float], cfg: SweepConfig
) -> list[SweepRow]:
    """Correct-prediction counts per inference attack, for each noise level.

    Row "none" scores the unperturbed snippets; every other row obfuscates
    each snippet at that epsilon (known texts stay untouched) before
    scoring. Seeds derive from (epsilon index, snippet index), so the table
    is reproducible under any execution order.
    """
    if not epsilons:
        raise ValueError("need at least one epsilon")
    store, docs = generate_corpus(spec)
    known = [d for d in docs if d.kind == "known_text"]
    snippets = [d for d in docs if d.kind == "snippet"]
    master = RngState(cfg.seed)

    rows = []
    for e_idx, eps in enumerate([None] + list(epsilons)):
        tallies = dict(sr_auth=0, sr_topic=0, dr_auth=0, dr_topic=0)
        for s_idx, snippet in enumerate(snippets):
            if eps is None:
                scored = snippet
            else:
                pcfg = PipelineConfig(epsilon=eps, seed=cfg.seed)
                out_bag, _ = obfuscate_document(
                    snippet.bag, store, pcfg, rng=master.child(e_idx, s_idx)
                )
                scored = LabelledDoc(
                    bag=out_bag, topic=snippet.topic, author=snippet.author, kind="snippet"
                )
            if nn_author(scored, known, store) == snippet.author:
                tallies["sr_auth"] += 1
            if knn_topic(scored, known, store, k=cfg.k_topic) == snippet.topic:
                tallies["sr_topic"] += 1
            att = ngram_attribution(
                scored,
                known,
                rng=master.child(e_idx, s_idx, 1),
                n=cfg.ngram_n,
                k_features=cfg.k_features,
                rounds=cfg.rounds,
                keep_fraction=cfg.keep_fraction,
            )
            if att == snippet.author:
                tallies["dr_auth"] += 1
            if (
                ngram_knn_topic(
                    scored, known, n=cfg.ngram_n, k_features=cfg.k_features, k=cfg.k_topic
                )
                == snippet.topic
            ):
                tallies["dr_topic"] += 1
        label = "none" if eps is None else f"{eps:g}"
        rows.append(SweepRow(epsilon=label, **tallies))
    return rows


def sweep_to_csv(rows: list[SweepRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(f"{r.epsilon},{r.sr_auth},{r.sr_topic},{r.dr_auth},{r.dr_topic}")
    return "\n".join(lines) + "\n"
