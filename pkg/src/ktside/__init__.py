"""Knowledge tracing with relational side information.

Recurrent student models whose question representations come from
relation-preserving graph embeddings, trained with a next-answer
prediction loss plus a graph-Laplacian smoothness penalty.
"""

from .autodiff import CompGraph, grad_check
from .data import (Interaction, InteractionSequence, SimulatorConfig,
                   filter_sequences, parse_log, serialize_log, simulate, split)
from .embeddings import (EmbeddingTable, SgnsConfig, embed_gaussian, embed_line,
                         embed_node2vec, random_walks, sgns_train)
from .metrics import Metrics, auc, evaluate
from .model import (KnowledgeState, ModelParams, encode_interaction,
                    forward_sequence, load_checkpoint, predict, save_checkpoint,
                    step_gru, step_lstm, step_rnn)
from .qgraph import (QuestionGraph, SkillMap, build_graph, laplacian, quad_form,
                     quad_form_grad)
from .sparse import SparseMatrix
from .training import (LossBreakdown, TrainConfig, fit, loss_prediction,
                       loss_relation, sequence_loss, tune_alpha)

__version__ = "0.1.0"

__all__ = [
    "CompGraph", "grad_check", "SparseMatrix",
    "Interaction", "InteractionSequence", "SimulatorConfig", "filter_sequences",
    "parse_log", "serialize_log", "simulate", "split",
    "EmbeddingTable", "SgnsConfig", "embed_gaussian", "embed_line",
    "embed_node2vec", "random_walks", "sgns_train",
    "Metrics", "auc", "evaluate",
    "KnowledgeState", "ModelParams", "encode_interaction", "forward_sequence",
    "load_checkpoint", "predict", "save_checkpoint", "step_gru", "step_lstm",
    "step_rnn",
    "QuestionGraph", "SkillMap", "build_graph", "laplacian", "quad_form",
    "quad_form_grad",
    "LossBreakdown", "TrainConfig", "fit", "loss_prediction", "loss_relation",
    "sequence_loss", "tune_alpha",
]
