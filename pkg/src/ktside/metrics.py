"""Next-answer prediction metrics: pooled rank-based AUC and friends.

AUC uses the rank formulation with midranks for ties, which equals the
probability that a uniformly drawn positive step outscores a uniformly
drawn negative one (ties counting one half).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import InteractionSequence
from .errors import MetricError, ValidationError
from .model import ModelParams, forward_sequence
from .qgraph import QuestionGraph, quad_form


class ScoredStep(NamedTuple):
    student: str
    step: int
    question: int
    score: float
    label: int


@dataclass(frozen=True)
class Metrics:
    auc: float
    accuracy: float
    mean_loss: float
    steps: int
    mean_relation: float | None = None

    def as_line(self) -> str:
        parts = [f"auc={self.auc:.6f}", f"accuracy={self.accuracy:.6f}",
                 f"mean_loss={self.mean_loss:.6f}", f"steps={self.steps}"]
        if self.mean_relation is not None:
            parts.append(f"mean_relation={self.mean_relation:.6f}")
        return " ".join(parts)


def midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing the average of their ranks."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: (sum of positive ranks - P(P+1)/2) / (P*N)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValidationError("scores and labels must be equal-length vectors")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC undefined: needs at least one positive and one "
                          "negative label")
    ranks = midranks(scores)
    return (float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def prediction_loss(score: float, label: int, eps: float = 1e-7) -> float:
    """Clamped binary cross-entropy of one scored step."""
    p = min(max(score, eps), 1.0 - eps)
    return -math.log(p) if label else -math.log(1.0 - p)


def score_sequences(seqs: list[InteractionSequence],
                    params: ModelParams) -> list[ScoredStep]:
    """One ScoredStep per predicted step, merged in (student, step) order."""
    out: list[ScoredStep] = []
    for seq in sorted(seqs, key=lambda s: s.student):
        preds = forward_sequence(seq, params)
        for t, p in enumerate(preds):
            nxt = seq.steps[t + 1]
            out.append(ScoredStep(seq.student, t, nxt.question,
                                  float(p[nxt.question]), nxt.correct))
    return out


def evaluate(params: ModelParams, seqs: list[InteractionSequence],
             graph: QuestionGraph | None = None,
             dump: list[ScoredStep] | None = None) -> Metrics:
    """Pooled metrics over all held-out steps of all students.

    When ``graph`` is given, also reports the mean Laplacian quadratic form
    of the per-step prediction vectors (the smoothness the regulariser
    targets).  ``dump``, if passed, collects the individual scored steps.
    """
    if not seqs:
        raise ValidationError("empty evaluation set")
    for seq in seqs:
        if len(seq) < 2:
            raise ValidationError(f"sequence for student {seq.student!r} is "
                                  "too short to score")
    relation_sum = 0.0
    steps: list[ScoredStep] = []
    for seq in sorted(seqs, key=lambda s: s.student):
        preds = forward_sequence(seq, params)
        for t, p in enumerate(preds):
            nxt = seq.steps[t + 1]
            steps.append(ScoredStep(seq.student, t, nxt.question,
                                    float(p[nxt.question]), nxt.correct))
            if graph is not None:
                relation_sum += quad_form(graph, p)
    if dump is not None:
        dump.extend(steps)
    scores = np.array([s.score for s in steps])
    labels = np.array([s.label for s in steps])
    acc = float(np.mean((scores >= 0.5) == (labels == 1)))
    mean_loss = float(np.mean([prediction_loss(s, l) for s, l in zip(scores, labels)]))
    mean_rel = relation_sum / len(steps) if graph is not None else None
    return Metrics(auc(scores, labels), acc, mean_loss, len(steps), mean_rel)


def write_step_dump(path, steps: list[ScoredStep]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("student\tstep\tquestion\tscore\tlabel\n")
        for s in steps:
            fh.write(f"{s.student}\t{s.step}\t{s.question}\t{s.score!r}\t{s.label}\n")
