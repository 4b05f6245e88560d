"""Recurrent knowledge-state model with a per-question prediction head.

An interaction (question q, correctness a) is encoded as concat(e_q, a*e_q)
over a frozen (or optionally trainable) embedding table.  A recurrent cell
(plain tanh RNN, LSTM, or GRU) folds encoded interactions into the hidden
knowledge state; after each step a sigmoid head maps the state to one
correct-answer probability per question.

All recurrences are expressed once, as builders over
:class:`~ktside.autodiff.CompGraph`, in row-vector convention: activations
are (batch, dim) matrices, weights map inputs on the right.  The vector
level API (``step_rnn`` etc.) and the trainer both go through these
builders, so there is a single implementation of the math.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import CompGraph, Node
from .data import Interaction, InteractionSequence
from .embeddings import EmbeddingTable
from .errors import ValidationError

CELL_TYPES = ("rnn", "lstm", "gru")

# gate tags per cell type; parameter names are in_<tag>, rec_<tag>, bias_<tag>
_GATES = {"rnn": ("",), "lstm": ("i", "f", "o", "g"), "gru": ("z", "r", "h")}


def _gate_names(cell: str):
    for tag in _GATES[cell]:
        suffix = f"_{tag}" if tag else ""
        yield f"in{suffix}", f"rec{suffix}", f"bias{suffix}"


def param_names(cell: str) -> list[str]:
    """Canonical parameter order for a cell type (head included)."""
    names = []
    for w_in, w_rec, bias in _gate_names(cell):
        names.extend([w_in, w_rec, bias])
    names.extend(["out_w", "out_b"])
    return names


@dataclass
class KnowledgeState:
    """Per-student latent state; ``cell`` is used by the LSTM only."""

    hidden: np.ndarray
    cell: np.ndarray | None = None


@dataclass
class ModelParams:
    """Embedding table plus recurrent and output-head weights.

    Shapes: in_* are (2d, n_h), rec_* are (n_h, n_h), bias_* are (n_h,),
    out_w is (n_h, Q), out_b is (Q,).
    """

    cell: str
    embedding: EmbeddingTable
    hidden_size: int
    weights: dict[str, np.ndarray]
    trainable_embedding: bool = False

    @property
    def question_count(self) -> int:
        return self.embedding.question_count

    @property
    def input_dim(self) -> int:
        return 2 * self.embedding.dim

    @classmethod
    def init(cls, cell: str, embedding: EmbeddingTable, hidden_size: int,
             seed: int, trainable_embedding: bool = False) -> "ModelParams":
        """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
        if cell not in CELL_TYPES:
            raise ValidationError(f"unknown cell type {cell!r}")
        rng = np.random.default_rng(seed)
        d_x = 2 * embedding.dim
        n_h = hidden_size
        q = embedding.question_count

        def uniform(fan_in, shape):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, shape)

        weights: dict[str, np.ndarray] = {}
        for w_in, w_rec, bias in _gate_names(cell):
            weights[w_in] = uniform(d_x, (d_x, n_h))
            weights[w_rec] = uniform(n_h, (n_h, n_h))
            weights[bias] = np.zeros(n_h)
        weights["out_w"] = uniform(n_h, (n_h, q))
        weights["out_b"] = np.zeros(q)
        return cls(cell, embedding, hidden_size, weights, trainable_embedding)

    @classmethod
    def zeros(cls, cell: str, embedding: EmbeddingTable,
              hidden_size: int) -> "ModelParams":
        """All-zero weights; predicts 0.5 everywhere regardless of input."""
        params = cls.init(cell, embedding, hidden_size, seed=0)
        for name in params.weights:
            params.weights[name][:] = 0.0
        return params

    def zero_state(self, batch: int = 1) -> tuple[np.ndarray, np.ndarray | None]:
        h = np.zeros((batch, self.hidden_size))
        c = np.zeros((batch, self.hidden_size)) if self.cell == "lstm" else None
        return h, c


def encode_interaction(x: Interaction, table: EmbeddingTable) -> np.ndarray:
    """concat(e_q, a * e_q): question embedding plus its correctness-gated copy."""
    if not 0 <= x.question < table.question_count:
        raise IndexError(f"question id {x.question} out of range "
                         f"(table has {table.question_count} rows)")
    e = table.values[x.question]
    return np.concatenate([e, x.correct * e])


def encode_batch(questions: np.ndarray, corrects: np.ndarray,
                 table: EmbeddingTable) -> np.ndarray:
    """Row-wise interaction encoding for a batch, as a (B, 2d) array."""
    e = table.values[questions]
    return np.concatenate([e, corrects[:, None] * e], axis=1)


# ----------------------------------------------------------------------
# graph builders (the single implementation of the recurrences)


def register_params(g: CompGraph, params: ModelParams) -> dict[str, Node]:
    """Bind all trainable arrays of ``params`` into a graph."""
    nodes = {name: g.param(name, params.weights[name])
             for name in param_names(params.cell)}
    if params.trainable_embedding:
        nodes["embedding"] = g.param("embedding", params.embedding.values)
    return nodes


def build_encoded_input(g: CompGraph, params: ModelParams, pnodes,
                        questions: np.ndarray, corrects: np.ndarray) -> Node:
    """Encoded (B, 2d) input node; differentiable through the table when
    the embedding is trainable, a plain constant otherwise."""
    if not params.trainable_embedding:
        return g.constant(encode_batch(questions, corrects, params.embedding))
    rows = g.rows(pnodes["embedding"], questions)
    gate = g.constant(np.repeat(corrects[:, None], params.embedding.dim, axis=1)
                      .astype(np.float64))
    return g.concat(rows, g.mul(rows, gate))


def _gate_pre(g: CompGraph, x: Node, h: Node, pnodes, tag: str) -> Node:
    suffix = f"_{tag}" if tag else ""
    s = g.add(g.matmul(x, pnodes[f"in{suffix}"]), g.matmul(h, pnodes[f"rec{suffix}"]))
    return g.add_bias(s, pnodes[f"bias{suffix}"])


def build_cell_step(g: CompGraph, cell: str, x: Node, h: Node,
                    c: Node | None, pnodes) -> tuple[Node, Node | None]:
    """One recurrent step; returns (new hidden, new cell-memory or None)."""
    if cell == "rnn":
        return g.tanh(_gate_pre(g, x, h, pnodes, "")), None
    if cell == "lstm":
        i = g.sigmoid(_gate_pre(g, x, h, pnodes, "i"))
        f = g.sigmoid(_gate_pre(g, x, h, pnodes, "f"))
        o = g.sigmoid(_gate_pre(g, x, h, pnodes, "o"))
        cand = g.tanh(_gate_pre(g, x, h, pnodes, "g"))
        c_new = g.add(g.mul(f, c), g.mul(i, cand))
        return g.mul(o, g.tanh(c_new)), c_new
    if cell == "gru":
        z = g.sigmoid(_gate_pre(g, x, h, pnodes, "z"))
        r = g.sigmoid(_gate_pre(g, x, h, pnodes, "r"))
        cand_pre = g.add(g.matmul(x, pnodes["in_h"]),
                         g.matmul(g.mul(r, h), pnodes["rec_h"]))
        cand = g.tanh(g.add_bias(cand_pre, pnodes["bias_h"]))
        # h' = (1-z) (.) h + z (.) cand, written as h + z (.) (cand - h)
        return g.add(h, g.mul(z, g.sub(cand, h))), None
    raise ValidationError(f"unknown cell type {cell!r}")


def build_prediction(g: CompGraph, h: Node, pnodes) -> Node:
    """Sigmoid head: per-question correctness probabilities, (B, Q)."""
    return g.sigmoid(g.add_bias(g.matmul(h, pnodes["out_w"]), pnodes["out_b"]))


# ----------------------------------------------------------------------
# vector-level operations


def _single_step(params: ModelParams, x: np.ndarray,
                 state: KnowledgeState) -> KnowledgeState:
    g = CompGraph()
    pnodes = register_params(g, params)
    xn = g.constant(np.asarray(x, dtype=np.float64)[None, :])
    hn = g.constant(np.asarray(state.hidden, dtype=np.float64)[None, :])
    cn = None
    if params.cell == "lstm":
        cell_val = state.cell if state.cell is not None else np.zeros_like(state.hidden)
        cn = g.constant(np.asarray(cell_val, dtype=np.float64)[None, :])
    h_new, c_new = build_cell_step(g, params.cell, xn, hn, cn, pnodes)
    g.forward()
    return KnowledgeState(g.value(h_new)[0],
                          g.value(c_new)[0] if c_new is not None else None)


def step_rnn(x, state: KnowledgeState, params: ModelParams) -> KnowledgeState:
    """h' = tanh(x W_in + h W_rec + bias)."""
    if params.cell != "rnn":
        raise ValidationError(f"params are for cell {params.cell!r}")
    return _single_step(params, x, state)


def step_lstm(x, state: KnowledgeState, params: ModelParams) -> KnowledgeState:
    if params.cell != "lstm":
        raise ValidationError(f"params are for cell {params.cell!r}")
    return _single_step(params, x, state)


def step_gru(x, state: KnowledgeState, params: ModelParams) -> KnowledgeState:
    if params.cell != "gru":
        raise ValidationError(f"params are for cell {params.cell!r}")
    return _single_step(params, x, state)


def predict(state: KnowledgeState, params: ModelParams) -> np.ndarray:
    """Per-question correct-answer probabilities from a knowledge state."""
    g = CompGraph()
    pnodes = register_params(g, params)
    hn = g.constant(np.asarray(state.hidden, dtype=np.float64)[None, :])
    p = build_prediction(g, hn, pnodes)
    g.forward()
    return g.value(p)[0]


def forward_sequence(seq, params: ModelParams) -> list[np.ndarray]:
    """Predictions after each consumed interaction: entry t scores step t+1.

    Returns n-1 probability vectors for a length-n sequence; the state
    starts at zero.
    """
    steps = seq.steps if isinstance(seq, InteractionSequence) else list(seq)
    if len(steps) < 2:
        raise ValidationError("sequence must contain at least 2 interactions")
    g = CompGraph()
    pnodes = register_params(g, params)
    h0, c0 = params.zero_state(batch=1)
    h = g.constant(h0)
    c = g.constant(c0) if c0 is not None else None
    p_nodes = []
    for x in steps[:-1]:
        questions = np.array([x.question], dtype=np.intp)
        corrects = np.array([x.correct], dtype=np.float64)
        xn = build_encoded_input(g, params, pnodes, questions, corrects)
        h, c = build_cell_step(g, params.cell, xn, h, c, pnodes)
        p_nodes.append(build_prediction(g, h, pnodes))
    g.forward()
    return [g.value(p)[0] for p in p_nodes]


# ----------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params: ModelParams, meta: dict | None = None) -> None:
    """Write a self-describing .npz checkpoint; round-trips value-exact."""
    payload = {f"weight_{name}": arr for name, arr in params.weights.items()}
    payload["embedding_values"] = params.embedding.values
    info = {
        "cell": params.cell,
        "hidden_size": params.hidden_size,
        "trainable_embedding": params.trainable_embedding,
        "embedding_method": params.embedding.method,
        "embedding_dim": params.embedding.dim,
        "embedding_seed": params.embedding.seed,
    }
    if meta:
        info["meta"] = meta
    payload["info_json"] = np.array(json.dumps(info, sort_keys=True))
    np.savez(path, **payload)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    with np.load(path, allow_pickle=False) as archive:
        info = json.loads(str(archive["info_json"]))
        weights = {key[len("weight_"):]: archive[key]
                   for key in archive.files if key.startswith("weight_")}
        embedding = EmbeddingTable(info["embedding_method"], info["embedding_dim"],
                                   archive["embedding_values"],
                                   info["embedding_seed"])
    params = ModelParams(info["cell"], embedding, info["hidden_size"], weights,
                         info["trainable_embedding"])
    return params, info.get("meta", {})
