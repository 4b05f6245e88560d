"""Question-question relation graph built from skill annotations.

Two questions are connected when their skill sets intersect; edge weights
are either binary or Jaccard overlap.  The graph exposes its adjacency,
(optionally normalised) Laplacian, and the Laplacian quadratic form
evaluated as a sparse edge sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParseError, ValidationError
from .sparse import SparseMatrix


class SkillMap:
    """Dense question id -> set of skill ids."""

    def __init__(self, skills: list[set[int]]):
        for qid, s in enumerate(skills):
            if not s:
                raise ValidationError(f"question {qid} has an empty skill set")
        self.skills = [frozenset(s) for s in skills]

    def __len__(self) -> int:
        return len(self.skills)

    def __getitem__(self, qid: int) -> frozenset[int]:
        return self.skills[qid]

    @property
    def question_count(self) -> int:
        return len(self.skills)

    @property
    def skill_count(self) -> int:
        return len({s for qs in self.skills for s in qs})

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for qid, qs in enumerate(self.skills):
                fh.write(f"{qid}\t{','.join(str(s) for s in sorted(qs))}\n")

    @classmethod
    def load(cls, path) -> "SkillMap":
        rows: dict[int, set[int]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ParseError(f"{path}:{lineno}: expected 'qid<TAB>skills'")
                try:
                    qid = int(parts[0])
                    skills = {int(tok) for tok in parts[1].split(",") if tok}
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: non-integer id") from None
                rows[qid] = skills
        if sorted(rows) != list(range(len(rows))):
            raise ParseError(f"{path}: question ids are not dense 0..Q-1")
        return cls([rows[q] for q in range(len(rows))])


@dataclass(frozen=True)
class QuestionGraph:
    """Symmetric weighted graph over question ids 0..Q-1.

    Edges are stored once with i < j; weights are positive and the diagonal
    is implicitly zero.  Instances are immutable and safe to share.
    """

    question_count: int
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_w: np.ndarray
    _neighbors: dict[int, tuple[np.ndarray, np.ndarray]] = field(
        default=None, repr=False, compare=False)

    def __post_init__(self):
        ei = np.asarray(self.edge_i, dtype=np.intp)
        ej = np.asarray(self.edge_j, dtype=np.intp)
        ew = np.asarray(self.edge_w, dtype=np.float64)
        if not (ei.shape == ej.shape == ew.shape):
            raise DimensionError("edge arrays must have equal length")
        if ei.size:
            if ei.min() < 0 or ej.max() >= self.question_count:
                raise ValidationError("edge endpoint out of range")
            if np.any(ei >= ej):
                raise ValidationError("edges must be stored once with i < j")
            if np.any(ew < 0):
                raise ValidationError("edge weights must be nonnegative")
        order = np.lexsort((ej, ei))
        object.__setattr__(self, "edge_i", ei[order])
        object.__setattr__(self, "edge_j", ej[order])
        object.__setattr__(self, "edge_w", ew[order])
        object.__setattr__(self, "_neighbors", None)

    @property
    def edge_count(self) -> int:
        return self.edge_i.size

    def adjacency(self) -> SparseMatrix:
        rows = np.concatenate([self.edge_i, self.edge_j])
        cols = np.concatenate([self.edge_j, self.edge_i])
        w = np.concatenate([self.edge_w, self.edge_w])
        return SparseMatrix(self.question_count, rows, cols, w, symmetric=True)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.question_count)
        np.add.at(deg, self.edge_i, self.edge_w)
        np.add.at(deg, self.edge_j, self.edge_w)
        return deg

    def neighbors(self, node: int) -> tuple[np.ndarray, np.ndarray]:
        """Neighbor ids and weights of ``node``, sorted by id."""
        if self._neighbors is None:
            nbrs: dict[int, list[tuple[int, float]]] = {
                q: [] for q in range(self.question_count)}
            for i, j, w in zip(self.edge_i, self.edge_j, self.edge_w):
                nbrs[int(i)].append((int(j), float(w)))
                nbrs[int(j)].append((int(i), float(w)))
            packed = {}
            for q, lst in nbrs.items():
                lst.sort()
                packed[q] = (np.array([n for n, _ in lst], dtype=np.intp),
                             np.array([w for _, w in lst]))
            object.__setattr__(self, "_neighbors", packed)
        return self._neighbors[node]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# questions {self.question_count}\n")
            for i, j, w in zip(self.edge_i, self.edge_j, self.edge_w):
                fh.write(f"{i}\t{j}\t{float(w)!r}\n")

    @classmethod
    def load(cls, path) -> "QuestionGraph":
        n = None
        ei, ej, ew = [], [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    tok = line[1:].split()
                    if len(tok) == 2 and tok[0] == "questions":
                        n = int(tok[1])
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ParseError(f"{path}:{lineno}: expected 'i<TAB>j<TAB>weight'")
                try:
                    i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: malformed edge") from None
                if i == j:
                    raise ParseError(f"{path}:{lineno}: self-loop not allowed")
                ei.append(min(i, j))
                ej.append(max(i, j))
                ew.append(w)
        if n is None:
            n = max(max(ej, default=-1) + 1, 0)
        return cls(n, np.array(ei, dtype=np.intp), np.array(ej, dtype=np.intp),
                   np.array(ew))


def build_graph(skills: SkillMap, weighting: str = "binary") -> QuestionGraph:
    """Connect questions whose skill sets intersect.

    ``binary`` gives every such pair weight 1; ``jaccard`` weights by
    |intersection| / |union| of the two skill sets.
    """
    if weighting not in ("binary", "jaccard"):
        raise ValidationError(f"unknown weighting {weighting!r}")
    by_skill: dict[int, list[int]] = {}
    for qid, qs in enumerate(skills.skills):
        for s in qs:
            by_skill.setdefault(s, []).append(qid)
    pairs: set[tuple[int, int]] = set()
    for members in by_skill.values():
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                pairs.add((members[a], members[b]))
    ei, ej, ew = [], [], []
    for i, j in sorted(pairs):
        if weighting == "binary":
            w = 1.0
        else:
            si, sj = skills[i], skills[j]
            w = len(si & sj) / len(si | sj)
        ei.append(i)
        ej.append(j)
        ew.append(w)
    return QuestionGraph(len(skills), np.array(ei, dtype=np.intp),
                         np.array(ej, dtype=np.intp), np.array(ew))


def laplacian(g: QuestionGraph, normalized: bool = False) -> SparseMatrix:
    """L = D - A, or the symmetric-normalised D^-1/2 L D^-1/2 variant."""
    n = g.question_count
    deg = g.degrees()
    if not normalized:
        rows = np.concatenate([np.arange(n), g.edge_i, g.edge_j])
        cols = np.concatenate([np.arange(n), g.edge_j, g.edge_i])
        w = np.concatenate([deg, -g.edge_w, -g.edge_w])
        return SparseMatrix(n, rows, cols, w, symmetric=True)
    with np.errstate(divide="ignore"):
        inv_sqrt = 1.0 / np.sqrt(deg)
    inv_sqrt[~np.isfinite(inv_sqrt)] = 0.0
    diag = np.where(deg > 0, 1.0, 0.0)
    off = -g.edge_w * inv_sqrt[g.edge_i] * inv_sqrt[g.edge_j]
    rows = np.concatenate([np.arange(n), g.edge_i, g.edge_j])
    cols = np.concatenate([np.arange(n), g.edge_j, g.edge_i])
    w = np.concatenate([diag, off, off])
    return SparseMatrix(n, rows, cols, w, symmetric=True)


def quad_form(g: QuestionGraph, p: np.ndarray) -> float:
    """(1/2) p^T L p evaluated as the edge sum (1/2) sum_e w_e (p_i - p_j)^2."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (g.question_count,):
        raise DimensionError(
            f"expected vector of length {g.question_count}, got {p.shape}")
    diff = p[g.edge_i] - p[g.edge_j]
    return 0.5 * float(g.edge_w @ (diff * diff))


def quad_form_grad(g: QuestionGraph, p: np.ndarray) -> np.ndarray:
    """Gradient L p of the quadratic form, via sparse accumulation."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (g.question_count,):
        raise DimensionError(
            f"expected vector of length {g.question_count}, got {p.shape}")
    diff = g.edge_w * (p[g.edge_i] - p[g.edge_j])
    out = np.zeros(g.question_count)
    np.add.at(out, g.edge_i, diff)
    np.add.at(out, g.edge_j, -diff)
    return out
