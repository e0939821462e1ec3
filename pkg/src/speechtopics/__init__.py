"""Two-layer NMF dynamic topic modeling for timestamped speech corpora."""

from .coherence import (
    CoherenceReport,
    CooccurrenceIndex,
    KSelectionResult,
    build_cooccurrence_index,
    coherence_cv,
    model_coherence,
    select_k,
    topic_coherence_w2v,
)
from .config import PipelineConfig, load_config
from .corpus import (
    DocumentTermMatrix,
    PreprocessConfig,
    Speech,
    TimeWindow,
    build_matrix,
    ingest,
    partition_windows,
    preprocess,
)
from .dynamic import (
    DynamicTopicModel,
    TopicDocumentMatrix,
    TopicTimeSeries,
    WindowTopicModel,
    assign_speeches,
    build_topic_document_matrix,
    collect_speeches,
    fit_dynamic,
    speaker_contributions,
    topic_time_series,
)
from .embeddings import (
    EmbeddingSpace,
    SkipGramConfig,
    cosine,
    load_embeddings,
    save_embeddings,
    train_embeddings,
)
from .nmf import (
    Factorization,
    TopicDescriptor,
    factorize,
    nndsvd_init,
    reconstruction_error,
    top_terms,
)
from .validation import (
    Dendrogram,
    SubjectDocument,
    cluster_topics,
    jaccard,
    load_taxonomy,
    match_taxonomy,
    term_stability,
)

__version__ = "0.1.0"

__all__ = [
    "CoherenceReport",
    "CooccurrenceIndex",
    "Dendrogram",
    "DocumentTermMatrix",
    "DynamicTopicModel",
    "EmbeddingSpace",
    "Factorization",
    "KSelectionResult",
    "PipelineConfig",
    "PreprocessConfig",
    "Speech",
    "SkipGramConfig",
    "SubjectDocument",
    "TimeWindow",
    "TopicDescriptor",
    "TopicDocumentMatrix",
    "TopicTimeSeries",
    "WindowTopicModel",
    "assign_speeches",
    "build_cooccurrence_index",
    "build_matrix",
    "build_topic_document_matrix",
    "cluster_topics",
    "coherence_cv",
    "collect_speeches",
    "cosine",
    "factorize",
    "fit_dynamic",
    "ingest",
    "jaccard",
    "load_config",
    "load_embeddings",
    "load_taxonomy",
    "match_taxonomy",
    "model_coherence",
    "nndsvd_init",
    "partition_windows",
    "preprocess",
    "reconstruction_error",
    "save_embeddings",
    "select_k",
    "speaker_contributions",
    "term_stability",
    "top_terms",
    "topic_coherence_w2v",
    "topic_time_series",
    "train_embeddings",
]
