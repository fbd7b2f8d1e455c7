"""Link emerging technologies to R&D-spending companies through entity embeddings."""

__version__ = "0.1.0"

from .alignment import OrthogonalMap, alignment_residual, apply_alignment, fit_procrustes, refine_anchors
from .clustering import agglomerate, cut, profile_clusters
from .embeddings import EmbeddingStore, get_vector, parse_embeddings, unit_normalize
from .projection import fit_pca, transform
from .registry import Company, Technology, load_companies, load_technologies, resolve_entities
from .similarity import cosine_similarity, cross_similarity, top_k
from .validation import correlate_technology, load_patents, validation_summary

__all__ = [
    "Company", "EmbeddingStore", "OrthogonalMap", "Technology", "agglomerate", "alignment_residual",
    "apply_alignment", "correlate_technology", "cosine_similarity", "cross_similarity", "cut", "fit_pca",
    "fit_procrustes", "get_vector", "load_companies", "load_patents", "load_technologies", "parse_embeddings",
    "profile_clusters", "refine_anchors", "resolve_entities", "top_k", "transform", "unit_normalize",
    "validation_summary",
]
