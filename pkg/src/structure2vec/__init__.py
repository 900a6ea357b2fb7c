"""Discriminative embeddings of latent variable models for structured data.

Graphs (and strings, as chains) are embedded by unrolling a fixed number of
mean-field or belief-propagation style updates with learned weights, pooling
node embeddings, and feeding the result to a small prediction head. All
parameters are trained jointly by SGD with exact reverse-mode gradients.
"""
from .autodiff import Gradients, grad_check, loss_and_grad
from .checkpoint import ModelCheckpoint, load_checkpoint, save_checkpoint
from .config import ConfigError, TrainConfig, load_config
from .dataio import DataError, Dataset, dataset_stats, kfold, load_bundled, load_graph_dataset, load_string_dataset
from .embed import EmbedParams, EngineKind, embed_batch, pool
from .graph import Alphabet, Graph, GraphError, from_edge_list, permute, string_to_chain
from .head import HeadParams, TaskKind
from .model import Params, forward, init_params
from .topology import GraphBatch
from .train import evaluate, sgd_epoch, train

__all__ = [
    "Alphabet", "ConfigError", "DataError", "Dataset", "EmbedParams", "EngineKind", "Gradients", "Graph",
    "GraphBatch", "GraphError", "HeadParams", "ModelCheckpoint", "Params", "TaskKind", "TrainConfig",
    "dataset_stats", "embed_batch", "evaluate", "forward", "from_edge_list", "grad_check", "init_params",
    "kfold", "load_bundled", "load_checkpoint", "load_config", "load_graph_dataset", "load_string_dataset",
    "loss_and_grad", "permute", "pool", "save_checkpoint", "sgd_epoch", "string_to_chain", "train",
]
