"""Trust evaluation for IoT devices from self-supervised hypergraph embeddings."""

from .data import Dataset, generate_synthetic, load_dataset, save_dataset
from .evaluation import sensitivity_sweep, silhouette_score, trust_cluster_ss
from .hypergraph import Hyperedge, Hypergraph, RelationKind
from .model import EmbeddingPair, HgnnParams, forward
from .relations import BuildConfig, build_all
from .trainer import TrainConfig, TrainReport, infer_embeddings, train
from .trust import TrustRanking, rank, select_collaborator, trust

__version__ = "0.1.0"

__all__ = [
    "BuildConfig",
    "Dataset",
    "EmbeddingPair",
    "HgnnParams",
    "Hyperedge",
    "Hypergraph",
    "RelationKind",
    "TrainConfig",
    "TrainReport",
    "TrustRanking",
    "build_all",
    "forward",
    "generate_synthetic",
    "infer_embeddings",
    "load_dataset",
    "rank",
    "save_dataset",
    "select_collaborator",
    "sensitivity_sweep",
    "silhouette_score",
    "train",
    "trust",
    "trust_cluster_ss",
]
