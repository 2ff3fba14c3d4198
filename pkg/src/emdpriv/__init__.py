"""Metric differential privacy for bags of vectors and bag-of-words documents.

The mechanism perturbs each word embedding with n-dimensional Laplacian
noise and snaps the result back to the vocabulary; output distributions of
two documents then differ by a factor bounded by exp(epsilon * N * EMD)
where EMD is the Earth Mover's distance between the embedded bags.
"""

from .emd import TransportPlan, VecBag, emd_bruteforce, emd_equal, emd_general
from .embeddings import (
    EmbeddingStore,
    embed_word,
    load_embeddings,
    nearest_word,
    nearest_words,
    word_distance,
)
from .laplace import (
    PrivacyParams,
    gamma_sample,
    laplacian_log_pdf,
    laplacian_pdf,
    log_normalizing_constant,
    noisy_vector,
    normalizing_constant,
    radial_cdf,
    radial_cdf_batch,
    sample_noisy_vectors,
    sample_unit_directions,
    truncated_exp_sum,
    unit_sphere_sample,
    unit_sphere_surface_area,
)
from .mechanism import (
    Bag,
    OovReport,
    PipelineConfig,
    bag_from_json,
    bag_guarantee,
    bag_to_json,
    compose,
    embed_bag,
    obfuscate_document,
    preprocess,
    private_bag,
)
from .rng import RngState
from .stopwords import DEFAULT_STOPWORDS, load_stopwords
from .vectors import MetricKind, euclidean, manhattan, pairwise_distances

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
