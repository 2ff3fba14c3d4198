"""Word embedding store: loading, lookup, and exact nearest-word inversion.

The on-disk format is the plain-text word2vec layout: a "<count> <dim>"
header line, then one "<word> <f1> ... <fdim>" row per word, single-space
separated. Rows are kept in file order, which doubles as the frequency
order of the standard distributions and as the deterministic tie-break for
nearest-word queries. Vectors are stored raw; pre-normalized embedding
releases are not usable with the noise mechanism, whose geometry depends
on the original norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .vectors import MetricKind, as_vector, distance

_SCAN_CHUNK = 8192


@dataclass(frozen=True, eq=False)
class EmbeddingStore:
    """Immutable word <-> vector table with positional tie-breaking."""

    words: tuple[str, ...]
    vectors: np.ndarray
    _index: dict = field(repr=False)

    @classmethod
    def from_pairs(cls, pairs) -> "EmbeddingStore":
        words = []
        rows = []
        index: dict[str, int] = {}
        for word, vec in pairs:
            if not isinstance(word, str) or not word or any(c.isspace() for c in word):
                raise ValueError(f"invalid word {word!r}: must be nonempty without whitespace")
            if word in index:
                raise ValueError(f"duplicate word {word!r}")
            index[word] = len(words)
            words.append(word)
            rows.append(as_vector(vec))
        if not words:
            raise ValueError("embedding store must hold at least one word")
        dims = {r.shape[0] for r in rows}
        if len(dims) != 1:
            raise ValueError(f"inconsistent vector dimensions: {sorted(dims)}")
        mat = np.vstack(rows)
        mat.setflags(write=False)
        return cls(words=tuple(words), vectors=mat, _index=index)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def position(self, word: str) -> int:
        return self._index[word]


def load_embeddings(
    path, max_vocab: int | None = None, lowercase_vocab: bool = False
) -> EmbeddingStore:
    """Read a word2vec text file, keeping the first min(count, max_vocab) rows.

    Raises ValueError naming the offending line on a malformed header, a row
    of the wrong width, an unparseable float, or a duplicate word. With
    ``lowercase_vocab`` keys are lowercased at load and the first occurrence
    wins on collision.
    """
    if max_vocab is not None and max_vocab < 1:
        raise ValueError("max_vocab must be >= 1")
    pairs: list[tuple[str, np.ndarray]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:1: malformed header {header.strip()!r}")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"{path}:1: malformed header {header.strip()!r}") from None
        if count < 1 or dim < 1:
            raise ValueError(f"{path}:1: header must declare positive count and dim")
        want = count if max_vocab is None else min(count, max_vocab)
        rows_read = 0
        for lineno, line in enumerate(fh, start=2):
            if rows_read == want:
                break
            fields = line.split()
            if not fields:
                continue
            if len(fields) != dim + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected {dim + 1} fields, got {len(fields)}"
                )
            rows_read += 1
            word = fields[0]
            if lowercase_vocab:
                word = word.lower()
                if word in seen:
                    continue  # first occurrence wins
            if word in seen:
                raise ValueError(f"{path}:{lineno}: duplicate word {word!r}")
            try:
                vec = np.array([float(f) for f in fields[1:]], dtype=np.float64)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: unparseable float in row") from None
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{path}:{lineno}: non-finite component in row")
            seen.add(word)
            pairs.append((word, vec))
        if rows_read < want:
            raise ValueError(
                f"{path}: header declared {count} rows but only {rows_read} were read"
            )
    return EmbeddingStore.from_pairs(pairs)


def embed_word(store: EmbeddingStore, word: str) -> np.ndarray | None:
    """The stored vector, or None when out of vocabulary. Exact-match lookup."""
    pos = store._index.get(word)
    if pos is None:
        return None
    return store.vectors[pos]


def word_distance(
    store: EmbeddingStore, w1: str, w2: str, metric: MetricKind = MetricKind.EUCLIDEAN
) -> float:
    """Ground distance between two words' vectors.

    A pseudometric: distinct words sharing a stored vector are at distance 0.
    """
    for w in (w1, w2):
        if w not in store:
            raise KeyError(f"word {w!r} is not in the vocabulary")
    return distance(embed_word(store, w1), embed_word(store, w2), metric)


def nearest_word(store: EmbeddingStore, z) -> str:
    """Word minimizing Euclidean distance to z over the whole vocabulary.

    Exhaustive exact scan; ties resolve to the smallest store position.
    """
    return nearest_words(store, np.asarray(z, dtype=np.float64)[None, :])[0]


def nearest_words(store: EmbeddingStore, queries: np.ndarray) -> list[str]:
    """Batched nearest-word scan, one query per row."""
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != store.dim:
        raise ValueError(f"queries must be M x {store.dim}, got shape {q.shape}")
    vocab_norms = (store.vectors * store.vectors).sum(axis=1)
    best_d2 = np.full(q.shape[0], np.inf)
    best_pos = np.zeros(q.shape[0], dtype=np.int64)
    for qstart in range(0, q.shape[0], _SCAN_CHUNK):
        qblock = q[qstart : qstart + _SCAN_CHUNK]
        qnorms = (qblock * qblock).sum(axis=1)
        for vstart in range(0, len(store), _SCAN_CHUNK):
            chunk = store.vectors[vstart : vstart + _SCAN_CHUNK]
            d2 = qnorms[:, None] - 2.0 * (qblock @ chunk.T) + vocab_norms[vstart : vstart + _SCAN_CHUNK][None, :]
            arg = d2.argmin(axis=1)
            cand = d2[np.arange(qblock.shape[0]), arg]
            rows = np.arange(qstart, qstart + qblock.shape[0])
            better = cand < best_d2[rows]  # strict: earlier positions win exact ties
            best_d2[rows[better]] = cand[better]
            best_pos[rows[better]] = arg[better] + vstart
    return [store.words[p] for p in best_pos]
