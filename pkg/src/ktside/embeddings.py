"""Question embeddings: Gaussian baseline and relation-preserving tables.

Three families, all deterministic under their seed:

* ``embed_gaussian`` - i.i.d. standard normal rows, the no-side-information
  baseline.
* ``embed_line`` - edge-sampling embedding; order 1 trains a single vector
  family on sampled edges, order 2 uses separate context vectors (plain
  skip-gram-with-negative-sampling semantics on an edge stream).
* ``embed_node2vec`` - second-order biased random walks, then skip-gram
  with negative sampling over the walk windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParseError, ValidationError
from .qgraph import QuestionGraph

# Floor on edge samples per training pass so tiny graphs still receive a
# meaningful optimization budget (per-node, matching walk-based effort).
_LINE_SAMPLES_PER_NODE = 200


@dataclass(frozen=True)
class SgnsConfig:
    """Hyperparameters shared by the LINE and Node2Vec trainers."""

    dim: int = 32
    epochs: int = 5
    learning_rate: float = 0.025
    negatives: int = 5
    window: int = 5          # walk-based training only
    noise_exponent: float = 0.75

    def __post_init__(self):
        if self.dim < 1 or self.negatives < 1 or self.window < 1:
            raise ValidationError("dim, negatives and window must be >= 1")


@dataclass(frozen=True)
class EmbeddingTable:
    """Q x d matrix of question vectors plus provenance metadata."""

    method: str
    dim: int
    values: np.ndarray
    seed: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[1] != self.dim:
            raise ValidationError(f"values must be Q x {self.dim}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("embedding values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def question_count(self) -> int:
        return self.values.shape[0]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{self.question_count} {self.dim} {self.method} {self.seed}\n")
            for qid, row in enumerate(self.values):
                fh.write(f"{qid} " + " ".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 4:
                raise ParseError(f"{path}:1: expected header 'Q d method seed'")
            q, d, method, seed = int(header[0]), int(header[1]), header[2], int(header[3])
            values = np.zeros((q, d))
            seen = np.zeros(q, dtype=bool)
            for lineno, line in enumerate(fh, start=2):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != d + 1:
                    raise ParseError(f"{path}:{lineno}: expected qid plus {d} values")
                qid = int(parts[0])
                if qid < 0 or qid >= q:
                    raise ParseError(f"{path}:{lineno}: question id {qid} out of range")
                values[qid] = [float(tok) for tok in parts[1:]]
                seen[qid] = True
        if not seen.all():
            raise ParseError(f"{path}: missing rows for {int((~seen).sum())} questions")
        return cls(method=method, dim=d, values=values, seed=seed)


@dataclass(frozen=True)
class WalkCorpus:
    """Random walks over question ids, one list entry per walk."""

    walks: list
    walk_len: int
    walks_per_node: int
    return_param: float
    inout_param: float

    def total_steps(self) -> int:
        return sum(max(0, len(w) - 1) for w in self.walks)


def embed_gaussian(question_count: int, dim: int, seed: int) -> EmbeddingTable:
    """I.i.d. standard normal table from a seeded generator."""
    if question_count < 1 or dim < 1:
        raise ValidationError("question_count and dim must be >= 1")
    rng = np.random.default_rng(seed)
    return EmbeddingTable("gaussian", dim, rng.standard_normal((question_count, dim)),
                          seed)


def random_walks(g: QuestionGraph, return_param: float, inout_param: float,
                 walk_len: int, walks_per_node: int, seed: int) -> WalkCorpus:
    """Second-order biased walks from every node.

    From previous node t at current node v, a neighbor x is drawn with
    unnormalised weight w(v,x)/p if x == t, w(v,x) if x neighbors t, and
    w(v,x)/q otherwise.  Each source node gets its own generator derived
    from (seed, node), so results do not depend on scheduling.  Nodes with
    no neighbors yield single-node walks.
    """
    if walk_len < 1:
        raise ValidationError("walk_len must be >= 1")
    nbr_sets = {v: set(map(int, g.neighbors(v)[0])) for v in range(g.question_count)}
    walks = []
    for node in range(g.question_count):
        rng = np.random.default_rng([seed, node])
        for _ in range(walks_per_node):
            walks.append(_one_walk(g, nbr_sets, node, return_param, inout_param,
                                   walk_len, rng))
    return WalkCorpus(walks, walk_len, walks_per_node, return_param, inout_param)


def _one_walk(g, nbr_sets, start, p, q, walk_len, rng):
    walk = [start]
    while len(walk) < walk_len:
        cur = walk[-1]
        ids, weights = g.neighbors(cur)
        if ids.size == 0:
            break
        if len(walk) == 1:
            probs = weights
        else:
            prev = walk[-2]
            prev_nbrs = nbr_sets[prev]
            bias = np.empty(ids.size)
            for k, x in enumerate(ids):
                if x == prev:
                    bias[k] = 1.0 / p
                elif int(x) in prev_nbrs:
                    bias[k] = 1.0
                else:
                    bias[k] = 1.0 / q
            probs = weights * bias
        cum = np.cumsum(probs)
        pick = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        walk.append(int(ids[min(pick, ids.size - 1)]))
    return np.array(walk, dtype=np.intp)


def walk_pairs(corpus: WalkCorpus, window: int) -> np.ndarray:
    """All ordered (center, context) pairs within the window, as an (N, 2) array."""
    centers, contexts = [], []
    for walk in corpus.walks:
        for off in range(1, min(window, len(walk) - 1) + 1):
            a, b = walk[:-off], walk[off:]
            centers.append(a)
            contexts.append(b)
            centers.append(b)
            contexts.append(a)
    if not centers:
        return np.zeros((0, 2), dtype=np.intp)
    return np.stack([np.concatenate(centers), np.concatenate(contexts)], axis=1)


def sgns_pair_loss(score: float) -> float:
    """Positive-pair term -log sigmoid(u.v) given the dot product."""
    # -log sigma(z) = log(1 + exp(-z)), computed stably
    return math.log1p(math.exp(-min(score, 30.0))) if score > -30.0 else -score


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-min(z, 700.0)))
    e = math.exp(max(z, -700.0))
    return e / (1.0 + e)


def _noise_cumulative(counts: np.ndarray, exponent: float) -> np.ndarray:
    weights = np.power(np.maximum(counts, 0.0), exponent)
    total = weights.sum()
    if total <= 0:
        raise ValidationError("noise distribution has no mass")
    return np.cumsum(weights / total)


def sgns_train(pairs: np.ndarray, question_count: int, cfg: SgnsConfig, seed,
               method: str = "sgns") -> EmbeddingTable:
    """Skip-gram with negative sampling over a (center, context) pair stream.

    Minimises -log sigmoid(u_c . v_x) - sum_k log sigmoid(-u_c . v_n) by
    sequential SGD with linearly decaying learning rate; negatives are drawn
    from the context-frequency distribution raised to the noise exponent.
    Returns the center vectors.
    """
    pairs = np.asarray(pairs, dtype=np.intp)
    if pairs.size == 0:
        raise ValidationError("empty pair stream")
    if pairs.min() < 0 or pairs.max() >= question_count:
        raise ValidationError("pair ids out of range")
    rng = np.random.default_rng(seed)
    d = cfg.dim
    center = (rng.random((question_count, d)) - 0.5) / d
    context = np.zeros((question_count, d))
    counts = np.bincount(pairs[:, 1], minlength=question_count).astype(np.float64)
    noise_cum = _noise_cumulative(counts, cfg.noise_exponent)

    n = pairs.shape[0]
    total = cfg.epochs * n
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        negs = np.searchsorted(noise_cum, rng.random((n, cfg.negatives)), side="right")
        for row, idx in enumerate(order):
            lr = cfg.learning_rate * max(1e-4, 1.0 - step / total)
            step += 1
            c, x = pairs[idx]
            u = center[c]
            v = context[x]
            neg_ids = negs[row]
            vn = context[neg_ids]
            pos_coef = _sigmoid(float(u @ v)) - 1.0
            neg_coef = 1.0 / (1.0 + np.exp(-(vn @ u)))
            neg_coef[neg_ids == x] = 0.0  # never push the true context away
            grad_u = pos_coef * v + neg_coef @ vn
            context[x] -= lr * pos_coef * u
            np.subtract.at(context, neg_ids, lr * neg_coef[:, None] * u[None, :])
            center[c] = u - lr * grad_u
    return EmbeddingTable(method, d, center, _seed_tag(seed))


def embed_line(g: QuestionGraph, order: int, cfg: SgnsConfig, seed: int) -> EmbeddingTable:
    """Edge-sampling embedding preserving first- or second-order proximity.

    Edges are drawn proportionally to weight, max(E, 200 Q) samples per
    epoch.  Order 1 shares one vector family across both endpoints; order 2
    keeps separate context vectors and reuses the skip-gram trainer on the
    sampled edge stream.
    """
    if order not in (1, 2):
        raise ValidationError("LINE order must be 1 or 2")
    if g.edge_count == 0:
        raise ValidationError("cannot embed an edgeless graph")
    n_samples = cfg.epochs * max(g.edge_count, _LINE_SAMPLES_PER_NODE * g.question_count)
    rng = np.random.default_rng([seed, order])
    edge_cum = np.cumsum(g.edge_w / g.edge_w.sum())
    picks = np.searchsorted(edge_cum, rng.random(n_samples), side="right")
    flip = rng.random(n_samples) < 0.5
    src = np.where(flip, g.edge_j[picks], g.edge_i[picks])
    dst = np.where(flip, g.edge_i[picks], g.edge_j[picks])

    if order == 2:
        table = sgns_train(np.stack([src, dst], axis=1), g.question_count,
                           replace(cfg, epochs=1), [seed, order, 1], method="line2")
        return EmbeddingTable("line2", cfg.dim, table.values, seed)

    d = cfg.dim
    vecs = (rng.random((g.question_count, d)) - 0.5) / d
    noise_cum = _noise_cumulative(g.degrees(), cfg.noise_exponent)
    negs = np.searchsorted(noise_cum, rng.random((n_samples, cfg.negatives)),
                           side="right")
    for t in range(n_samples):
        lr = cfg.learning_rate * max(1e-4, 1.0 - t / n_samples)
        c, x = int(src[t]), int(dst[t])
        u, v = vecs[c].copy(), vecs[x].copy()
        neg_ids = negs[t]
        vn = vecs[neg_ids]
        pos_coef = _sigmoid(float(u @ v)) - 1.0
        neg_coef = 1.0 / (1.0 + np.exp(-(vn @ u)))
        neg_coef[neg_ids == x] = 0.0
        vecs[c] -= lr * (pos_coef * v + neg_coef @ vn)
        vecs[x] -= lr * pos_coef * u
        np.subtract.at(vecs, neg_ids, lr * neg_coef[:, None] * u[None, :])
    return EmbeddingTable("line1", d, vecs, seed)


def embed_node2vec(g: QuestionGraph, return_param: float, inout_param: float,
                   cfg: SgnsConfig, walk_len: int = 20, walks_per_node: int = 10,
                   seed: int = 0) -> EmbeddingTable:
    """Biased-walk corpus, window pair extraction, then skip-gram training."""
    if g.edge_count == 0:
        raise ValidationError("cannot embed an edgeless graph")
    corpus = random_walks(g, return_param, inout_param, walk_len, walks_per_node,
                          seed)
    pairs = walk_pairs(corpus, cfg.window)
    table = sgns_train(pairs, g.question_count, cfg, [seed, 3], method="node2vec")
    return EmbeddingTable("node2vec", cfg.dim, table.values, seed)


def cosine_similarity_matrix(values: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(values, axis=1)
    norms = np.where(norms == 0, 1.0, norms)
    unit = values / norms[:, None]
    return unit @ unit.T


def _seed_tag(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return int(seed[0])
