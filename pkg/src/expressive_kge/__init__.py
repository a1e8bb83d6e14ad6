"""Knowledge graph embeddings whose relations are parallelograms in a virtual triple space."""
from .geometry import certify_patterns, comp_def_region, head_tail_intervals, load_fixture, parallelogram_of
from .kg import KnowledgeGraph, load_dataset, parse_triples
from .model import ModelConfig, RelationEmbedding, Variant, is_true, load_checkpoint, save_checkpoint, score
from .training import TrainConfig, init_model, train

__all__ = [
    "KnowledgeGraph", "ModelConfig", "RelationEmbedding", "TrainConfig", "Variant",
    "certify_patterns", "comp_def_region", "head_tail_intervals", "init_model", "is_true",
    "load_checkpoint", "load_dataset", "load_fixture", "parallelogram_of", "parse_triples",
    "save_checkpoint", "score", "train",
]
