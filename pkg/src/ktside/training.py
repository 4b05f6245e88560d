"""Training: composite loss and mini-batch truncated BPTT.

The per-sequence loss averages, over the predicted steps, a clamped binary
cross-entropy on the probability assigned to the actually-asked next
question, plus ``alpha`` times the Laplacian quadratic form of the whole
prediction vector.  Batches bucket sequences by length and pad; padded
steps are masked out of both terms, and each sequence contributes its own
per-step mean so ``alpha`` keeps one meaning across lengths.

When ``alpha == 0`` (or no graph is supplied) the relation term is not
built at all, so such runs are bit-identical to a regulariser-free build.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .autodiff import CompGraph, Node
from .data import Interaction, InteractionSequence
from .errors import NumericError, ValidationError
from .metrics import evaluate, prediction_loss
from .model import (ModelParams, build_cell_step, build_encoded_input,
                    build_prediction, param_names, register_params)
from .qgraph import QuestionGraph, quad_form

CLAMP_EPS = 1e-7


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.1              # relation-regulariser weight
    learning_rate: float = 1e-3
    optimizer: str = "adam"         # adam | sgd
    epochs: int = 25
    batch_size: int = 32
    max_seq_len: int = 100          # truncation window for BPTT
    clip_norm: float = 5.0
    seed: int = 0
    finetune_embeddings: bool = False
    patience: int = 0               # early-stop patience on val AUC; 0 = off

    def validate(self) -> None:
        if self.alpha < 0:
            raise ValidationError("alpha must be >= 0")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValidationError("batch_size must be >= 1 and epochs >= 0")
        if self.max_seq_len < 2:
            raise ValidationError("max_seq_len must be >= 2")
        if self.clip_norm <= 0:
            raise ValidationError("clip_norm must be > 0")
        if self.patience < 0:
            raise ValidationError("patience must be >= 0")


@dataclass(frozen=True)
class LossBreakdown:
    prediction: float
    relation: float
    total: float


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: LossBreakdown
    val_auc: float | None
    wall_time: float


def loss_prediction(p: np.ndarray, nxt: Interaction) -> float:
    """Clamped cross-entropy of the entry selected by the next question."""
    p = np.asarray(p)
    if not 0 <= nxt.question < p.shape[0]:
        raise ValidationError(f"next question {nxt.question} out of range")
    return prediction_loss(float(p[nxt.question]), nxt.correct, eps=CLAMP_EPS)


def loss_relation(p: np.ndarray, graph: QuestionGraph) -> float:
    """Smoothness of one prediction vector over the question graph."""
    return quad_form(graph, p)


# ----------------------------------------------------------------------
# batched loss graph


class _BatchGraph:
    """Loss graph over a batch of same-epoch sequence windows."""

    def __init__(self, params: ModelParams, chunks: list[list[Interaction]],
                 graph: QuestionGraph | None, alpha: float):
        if alpha > 0 and graph is None:
            raise ValidationError("a question graph is required when alpha > 0")
        self.batch = len(chunks)
        g = CompGraph()
        pnodes = register_params(g, params)
        b = len(chunks)
        t_max = max(len(c) for c in chunks)
        q_count = params.question_count

        questions = np.zeros((b, t_max), dtype=np.intp)
        corrects = np.zeros((b, t_max))
        lengths = np.array([len(c) for c in chunks])
        for i, chunk in enumerate(chunks):
            questions[i, :len(chunk)] = [x.question for x in chunk]
            corrects[i, :len(chunk)] = [x.correct for x in chunk]
        seq_w = 1.0 / (np.maximum(lengths - 1, 1) * b)

        h0, c0 = params.zero_state(batch=b)
        h = g.constant(h0)
        c = g.constant(c0) if c0 is not None else None
        ones = g.constant(np.ones((b, q_count)))

        pred_sum: Node | None = None
        rel_sum: Node | None = None
        for t in range(t_max - 1):
            x = build_encoded_input(g, params, pnodes, questions[:, t],
                                    corrects[:, t])
            h, c = build_cell_step(g, params.cell, x, h, c, pnodes)
            p = build_prediction(g, h, pnodes)
            valid = t + 1 < lengths
            pos = np.zeros((b, q_count))
            neg = np.zeros((b, q_count))
            for i in np.flatnonzero(valid):
                target = questions[i, t + 1]
                if corrects[i, t + 1]:
                    pos[i, target] = seq_w[i]
                else:
                    neg[i, target] = seq_w[i]
            term = None
            if pos.any():
                log_p = g.log(g.clamp(p, CLAMP_EPS, 1.0 - CLAMP_EPS))
                term = g.sum(g.mul(g.constant(pos), log_p))
            if neg.any():
                log_not = g.log(g.clamp(g.sub(ones, p), CLAMP_EPS, 1.0 - CLAMP_EPS))
                neg_term = g.sum(g.mul(g.constant(neg), log_not))
                term = neg_term if term is None else g.add(term, neg_term)
            if term is not None:
                pred_sum = term if pred_sum is None else g.add(pred_sum, term)
            if alpha > 0:
                row_w = np.where(valid, seq_w, 0.0)
                quad = g.graph_quad(p, (graph.edge_i, graph.edge_j, graph.edge_w),
                                    row_w)
                rel_sum = quad if rel_sum is None else g.add(rel_sum, quad)

        self.graph = g
        self.pred_node = g.smul(pred_sum, -1.0)
        self.rel_node = rel_sum
        if rel_sum is not None:
            self.total_node = g.add(self.pred_node, g.smul(rel_sum, alpha))
        else:
            self.total_node = self.pred_node

    def run(self) -> LossBreakdown:
        self.graph.forward()
        pred = float(self.graph.value(self.pred_node))
        rel = float(self.graph.value(self.rel_node)) if self.rel_node is not None else 0.0
        return LossBreakdown(pred, rel, float(self.graph.value(self.total_node)))

    def gradients(self) -> dict[str, np.ndarray]:
        return self.graph.backward(self.total_node)


def sequence_loss(seq, params: ModelParams, graph: QuestionGraph | None,
                  alpha: float) -> LossBreakdown:
    """Loss of one full sequence: per-step means of both terms."""
    steps = seq.steps if isinstance(seq, InteractionSequence) else list(seq)
    if len(steps) < 2:
        raise ValidationError("sequence must contain at least 2 interactions")
    return _BatchGraph(params, [steps], graph, alpha).run()


# ----------------------------------------------------------------------
# optimisation


class _Sgd:
    def __init__(self, arrays: dict[str, np.ndarray], lr: float):
        self.arrays = arrays
        self.lr = lr

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for name, arr in self.arrays.items():
            arr -= self.lr * grads[name]


class _Adam:
    def __init__(self, arrays: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.arrays = arrays
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, arr in self.arrays.items():
            gr = grads[name]
            m = self.m[name]
            v = self.v[name]
            m[:] = self.beta1 * m + (1 - self.beta1) * gr
            v[:] = self.beta2 * v + (1 - self.beta2) * (gr * gr)
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            arr -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _clip_global_norm(grads: dict[str, np.ndarray], names: list[str],
                      clip: float) -> None:
    total = 0.0
    for name in names:
        g = grads[name]
        total += float((g * g).sum())
    norm = np.sqrt(total)
    if norm > clip:
        scale = clip / norm
        for name in names:
            grads[name] = grads[name] * scale


def _windows(seqs, max_len: int) -> list[list[Interaction]]:
    units = []
    for seq in seqs:
        for start in range(0, len(seq.steps), max_len):
            chunk = seq.steps[start:start + max_len]
            if len(chunk) >= 2:
                units.append(chunk)
    return units


def _make_batches(units, batch_size: int, rng) -> list[list[list[Interaction]]]:
    # shuffle, bucket by length (stable sort keeps the shuffle within a
    # length), then shuffle the batch order
    perm = rng.permutation(len(units))
    shuffled = [units[i] for i in perm]
    shuffled.sort(key=len)
    batches = [shuffled[i:i + batch_size]
               for i in range(0, len(shuffled), batch_size)]
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


def _trainable_arrays(params: ModelParams) -> dict[str, np.ndarray]:
    arrays = {name: params.weights[name] for name in param_names(params.cell)}
    if params.trainable_embedding:
        arrays["embedding"] = params.embedding.values
    return arrays


def fit(train_seqs, params: ModelParams, graph: QuestionGraph | None,
        cfg: TrainConfig, val_seqs=None) -> tuple[ModelParams, list[EpochStats]]:
    """Optimise ``params`` in place; returns it with the per-epoch history.

    Epochs shuffle the truncation windows into length-bucketed padded
    batches; gradients are clipped to the configured global norm.  With a
    validation set and ``patience > 0``, training stops once the validation
    AUC has not improved for ``patience`` epochs and the best-epoch weights
    are restored.  Deterministic under ``cfg.seed``.
    """
    cfg.validate()
    if not train_seqs:
        raise ValidationError("empty training set")
    if cfg.finetune_embeddings and not params.trainable_embedding:
        params.trainable_embedding = True
    units = _windows(train_seqs, cfg.max_seq_len)
    if not units:
        raise ValidationError("no trainable windows (all sequences shorter than 2)")
    rng = np.random.default_rng(cfg.seed)
    arrays = _trainable_arrays(params)
    names = list(arrays)
    if cfg.optimizer == "adam":
        opt = _Adam(arrays, cfg.learning_rate)
    else:
        opt = _Sgd(arrays, cfg.learning_rate)

    history: list[EpochStats] = []
    best_auc = -np.inf
    best_weights: dict[str, np.ndarray] | None = None
    since_best = 0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        batches = _make_batches(units, cfg.batch_size, rng)
        pred_acc = rel_acc = 0.0
        n_units = 0
        for b_idx, chunks in enumerate(batches):
            try:
                bg = _BatchGraph(params, chunks, graph, cfg.alpha)
                breakdown = bg.run()
                grads = bg.gradients()
            except NumericError as exc:
                raise NumericError(
                    f"epoch {epoch} batch {b_idx}: {exc}") from exc
            _clip_global_norm(grads, names, cfg.clip_norm)
            opt.step(grads)
            pred_acc += breakdown.prediction * len(chunks)
            rel_acc += breakdown.relation * len(chunks)
            n_units += len(chunks)
        pred = pred_acc / n_units
        rel = rel_acc / n_units
        loss = LossBreakdown(pred, rel, pred + cfg.alpha * rel)
        val_auc = None
        if val_seqs:
            val_auc = evaluate(params, val_seqs).auc
        history.append(EpochStats(epoch, loss, val_auc,
                                  time.perf_counter() - t0))
        if val_seqs and cfg.patience > 0:
            if val_auc > best_auc:
                best_auc = val_auc
                best_weights = {k: v.copy() for k, v in arrays.items()}
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    break
    if best_weights is not None:
        for name in names:
            arrays[name][:] = best_weights[name]
    return params, history


def tune_alpha(train_seqs, val_seqs, make_params, graph: QuestionGraph,
               cfg: TrainConfig, grid=(0.01, 0.1, 0.5, 1.0)):
    """Grid search of the relation weight on validation AUC.

    ``make_params`` builds a fresh ModelParams per candidate so runs are
    independent.  Returns (best alpha, {alpha: best val AUC}).
    """
    results: dict[float, float] = {}
    for alpha in grid:
        params, history = fit(train_seqs, make_params(), graph,
                              replace(cfg, alpha=float(alpha)), val_seqs)
        aucs = [h.val_auc for h in history if h.val_auc is not None]
        if not aucs:
            raise ValidationError("tune_alpha needs a validation set")
        results[float(alpha)] = max(aucs)
    best = max(results, key=lambda a: (results[a], -a))
    return best, results
