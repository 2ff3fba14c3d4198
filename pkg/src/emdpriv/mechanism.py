"""The document obfuscation mechanism and its text pipeline.

A document is a bag of words. Obfuscation embeds each in-vocabulary token,
perturbs every embedded vector independently with the n-dimensional
Laplacian, and inverts each noisy vector back to the nearest vocabulary
word. The per-word noise scale ``epsilon`` induces a bag-level guarantee:
between any two input bags of equal size N, output distributions differ by
at most ``exp(epsilon * N * D)`` where D is the Earth Mover's distance
between the embedded bags. Nearest-word inversion is post-processing and
cannot weaken that bound.

Out-of-vocabulary tokens cannot be embedded; they bypass the noise and are
re-merged verbatim into the output. That is a real leak, so every run
reports exactly which tokens passed through.
"""

from __future__ import annotations

import json
import string
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingStore, embed_word, nearest_words
from .emd import VecBag
from .laplace import PrivacyParams, sample_noisy_vectors
from .rng import RngState
from .stopwords import DEFAULT_STOPWORDS

_PUNCT_TO_SPACE = str.maketrans({c: " " for c in string.punctuation})


@dataclass(frozen=True, eq=False)
class Bag:
    """Multiset of tokens. Internal order is incidental, never contractual."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("a bag must hold at least one token")
        for t in self.tokens:
            if not t or any(c.isspace() for c in t):
                raise ValueError(f"invalid token {t!r}")

    @property
    def size(self) -> int:
        return len(self.tokens)

    def counts(self) -> Counter:
        return Counter(self.tokens)

    def same_multiset(self, other: "Bag") -> bool:
        return self.counts() == other.counts()


@dataclass(frozen=True)
class PipelineConfig:
    epsilon: float
    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    truncate_to: int | None = None
    lowercase: bool = True
    strip_punctuation: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.truncate_to is not None and self.truncate_to < 1:
            raise ValueError("truncate_to must be >= 1")


@dataclass(frozen=True)
class OovReport:
    """Tokens that bypassed the mechanism, one entry per occurrence."""

    passthrough: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps(sorted(self.passthrough), ensure_ascii=False)


def preprocess(text: str, cfg: PipelineConfig) -> Bag:
    """Normalize raw text into a bag.

    Punctuation becomes whitespace, tokens are lowercased, stopwords drop
    out, and with ``truncate_to`` only the first N surviving tokens (in
    document order) are kept. Refuses to produce an empty bag.
    """
    if not text or not text.strip():
        raise ValueError("cannot preprocess empty text")
    if cfg.strip_punctuation:
        text = text.translate(_PUNCT_TO_SPACE)
    if cfg.lowercase:
        text = text.lower()
    tokens = [t for t in text.split() if t not in cfg.stopwords]
    if cfg.truncate_to is not None:
        tokens = tokens[: cfg.truncate_to]
    if not tokens:
        raise ValueError("no tokens survived preprocessing")
    return Bag(tokens=tuple(tokens))


def embed_bag(store: EmbeddingStore, bag: Bag) -> tuple[VecBag, tuple[str, ...]]:
    """Split a bag into its embedded in-vocabulary part and the passthrough rest.

    Multiplicity is preserved: each occurrence becomes its own vector row.
    """
    rows = []
    passthrough = []
    for token in bag.tokens:
        vec = embed_word(store, token)
        if vec is None:
            passthrough.append(token)
        else:
            rows.append(vec)
    if not rows:
        raise ValueError("no in-vocabulary tokens: nothing to privatize")
    return VecBag(vectors=rows), tuple(passthrough)


def private_bag(x: VecBag, p: PrivacyParams, rng: RngState) -> VecBag:
    """Perturb every element of the bag independently.

    Output size equals input size. Between any two equal-size input bags the
    output distributions differ by at most exp(epsilon * N * EMD).
    """
    if x.dim != p.dim:
        raise ValueError(f"dimension mismatch: bag has {x.dim}, params expect {p.dim}")
    noise = sample_noisy_vectors(np.zeros(p.dim), p, rng, x.size)
    return VecBag(vectors=x.vectors + noise)


def invert_bag(store: EmbeddingStore, z: VecBag) -> Bag:
    """Map each vector to its nearest vocabulary word (post-processing)."""
    return Bag(tokens=tuple(nearest_words(store, z.vectors)))


def compose(first, second):
    """Sequential composition: run ``first``, feed its sample to ``second``.

    Both arguments are mechanisms, i.e. callables (value, rng) -> value. The
    composite inherits the privacy bound of ``first``.
    """

    def composed(value, rng: RngState):
        return second(first(value, rng), rng)

    return composed


def obfuscate_document(
    bag: Bag,
    store: EmbeddingStore,
    cfg: PipelineConfig,
    rng: RngState | None = None,
) -> tuple[Bag, OovReport]:
    """Noise every in-vocabulary token and re-merge the rest verbatim.

    Returns the output bag (same size as the input) and the passthrough
    report. Deterministic for a fixed config seed; pass an explicit rng to
    draw repeated samples.
    """
    if rng is None:
        rng = RngState(cfg.seed)
    embedded, passthrough = embed_bag(store, bag)
    p = PrivacyParams(epsilon=cfg.epsilon, dim=store.dim)

    def noise_stage(vb: VecBag, r: RngState) -> VecBag:
        return private_bag(vb, p, r)

    def invert_stage(vb: VecBag, r: RngState) -> Bag:
        return invert_bag(store, vb)

    replaced = compose(noise_stage, invert_stage)(embedded, rng)
    out_tokens = replaced.tokens + passthrough
    return Bag(tokens=out_tokens), OovReport(passthrough=tuple(sorted(passthrough)))


def bag_guarantee(epsilon: float, in_vocab_size: int) -> float:
    """The bag-level privacy scale implied by a per-word epsilon."""
    return epsilon * in_vocab_size


def bag_to_json(bag: Bag) -> str:
    """Canonical serialization: {"size": N, "counts": {...}} with sorted keys."""
    payload = {"size": bag.size, "counts": dict(sorted(bag.counts().items()))}
    return json.dumps(payload, ensure_ascii=False, sort_keys=True)


def bag_from_json(text: str) -> Bag:
    payload = json.loads(text)
    tokens = []
    for word, mult in payload["counts"].items():
        tokens.extend([word] * int(mult))
    bag = Bag(tokens=tuple(sorted(tokens)))
    if bag.size != payload["size"]:
        raise ValueError("bag size field does not match counts")
    return bag
