"""Interaction logs: parsing, filtering, splitting, and a seeded simulator.

The simulator produces guess/slip students over a shared skill assignment:
per-skill mastery starts from a uniform draw and grows with practice, and
the correct-answer probability is ``guess + (1 - guess - slip) * mean
mastery`` over the question's skills.  Because questions sharing a skill
have coupled dynamics, the induced question graph is informative by
construction, which is what the end-to-end comparison experiments rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParseError, ValidationError
from .qgraph import SkillMap

# Chance that a question exercises a second skill on top of its primary one.
SECOND_SKILL_PROB = 0.5


class Interaction(NamedTuple):
    question: int
    correct: int


@dataclass
class InteractionSequence:
    """One student's time-ordered answer events."""

    student: str
    steps: list[Interaction]

    def __len__(self) -> int:
        return len(self.steps)


class MasteryRecord(NamedTuple):
    student: str
    step: int
    skill: int
    mastery: float


def question_count(seqs: list[InteractionSequence]) -> int:
    return 1 + max((x.question for s in seqs for x in s.steps), default=-1)


# ----------------------------------------------------------------------
# log files


def parse_log(path):
    """Read an interaction log.

    Rows are ``student<TAB>timestamp<TAB>question<TAB>correct`` with an
    optional fifth comma-separated skills column.  Returns (sequences,
    skill map or None, original-question-id -> dense-id table).  Rows are
    grouped by student and sorted by timestamp, ties keeping input order.
    """
    rows = []
    skills_seen = False
    raw_skills: dict[int, set[int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (4, 5):
                raise ParseError(f"{path}:{lineno}: expected 4 or 5 tab-separated fields")
            try:
                ts = float(parts[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad timestamp {parts[1]!r}") from None
            if parts[3] not in ("0", "1"):
                raise ValidationError(
                    f"{path}:{lineno}: correctness must be 0 or 1, got {parts[3]!r}")
            rows.append((parts[0], ts, parts[2], int(parts[3]), lineno,
                         parts[4] if len(parts) == 5 else None))
            if len(parts) == 5:
                skills_seen = True

    qid_map: dict[str, int] = {}
    for _, _, raw_q, _, _, _ in rows:
        if raw_q not in qid_map:
            qid_map[raw_q] = len(qid_map)

    by_student: dict[str, list] = {}
    student_order = []
    for student, ts, raw_q, correct, lineno, skill_col in rows:
        if student not in by_student:
            by_student[student] = []
            student_order.append(student)
        qid = qid_map[raw_q]
        by_student[student].append((ts, lineno, Interaction(qid, correct)))
        if skill_col is not None:
            try:
                raw_skills.setdefault(qid, set()).update(
                    int(tok) for tok in skill_col.split(",") if tok)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad skill list {skill_col!r}") from None

    sequences = []
    for student in student_order:
        events = sorted(by_student[student], key=lambda e: (e[0], e[1]))
        sequences.append(InteractionSequence(student, [e[2] for e in events]))

    skill_map = None
    if skills_seen:
        missing = [q for q in range(len(qid_map)) if not raw_skills.get(q)]
        if missing:
            raise ValidationError(
                f"{path}: skill column present but questions {missing[:5]} have no skills")
        skill_map = SkillMap([raw_skills[q] for q in range(len(qid_map))])
    return sequences, skill_map, qid_map


def serialize_log(path, seqs: list[InteractionSequence],
                  skills: SkillMap | None = None) -> None:
    """Write sequences back to log format, using step index as timestamp."""
    with open(path, "w", encoding="utf-8") as fh:
        for seq in seqs:
            for t, x in enumerate(seq.steps):
                if skills is not None:
                    tail = "\t" + ",".join(str(s) for s in sorted(skills[x.question]))
                else:
                    tail = ""
                fh.write(f"{seq.student}\t{t}\t{x.question}\t{x.correct}{tail}\n")


def write_mastery_trace(path, traces: list[MasteryRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("student\tstep\tskill\tmastery\n")
        for rec in traces:
            fh.write(f"{rec.student}\t{rec.step}\t{rec.skill}\t{rec.mastery!r}\n")


# ----------------------------------------------------------------------
# filtering and splitting


def filter_sequences(seqs: list[InteractionSequence], min_len: int = 3,
                     max_len: int = 200) -> list[InteractionSequence]:
    """Drop sequences shorter than min_len, truncate longer than max_len."""
    if min_len < 2:
        raise ValidationError("min_len must be >= 2")
    out = []
    for seq in seqs:
        if len(seq) < min_len:
            continue
        steps = seq.steps[:max_len] if len(seq) > max_len else seq.steps
        out.append(InteractionSequence(seq.student, list(steps)))
    return out


def split(seqs: list[InteractionSequence], train_frac: float = 0.7,
          val_frac: float = 0.1, seed: int = 0):
    """Student-level split into (train, validation, test), seeded shuffle."""
    if not (0 < train_frac < 1 and 0 < val_frac < 1 and train_frac + val_frac < 1):
        raise ValidationError("fractions must lie in (0,1) and sum below 1")
    n = len(seqs)
    n_train = int(round(n * train_frac))
    n_val = int(round(n * val_frac))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValidationError(
            f"split of {n} students gives empty partition "
            f"({n_train}/{n_val}/{n_test})")
    order = np.random.default_rng(seed).permutation(n)
    train = [seqs[i] for i in order[:n_train]]
    val = [seqs[i] for i in order[n_train:n_train + n_val]]
    test = [seqs[i] for i in order[n_train + n_val:]]
    return train, val, test


# ----------------------------------------------------------------------
# simulator


@dataclass(frozen=True)
class SimulatorConfig:
    students: int = 500
    questions: int = 50
    skills: int = 5
    assignment_seed: int = 0
    guess: float = 0.2
    slip: float = 0.1
    mastery_low: float = 0.0    # initial per-skill mastery ~ U[low, high]
    mastery_high: float = 0.6
    gain: float = 0.08          # mastery added per practice, capped at 1
    min_len: int = 20
    max_len: int = 60
    seed: int = 0

    def validate(self) -> None:
        if self.students < 1 or self.questions < 1 or self.skills < 1:
            raise ValidationError("students, questions and skills must be >= 1")
        if not (0 <= self.guess and 0 <= self.slip and self.guess + self.slip < 1):
            raise ValidationError("need guess >= 0, slip >= 0 and guess + slip < 1")
        if not (0 <= self.mastery_low <= self.mastery_high <= 1):
            raise ValidationError("initial mastery range must satisfy 0 <= low <= high <= 1")
        if self.gain < 0:
            raise ValidationError("gain must be >= 0")
        if not (2 <= self.min_len <= self.max_len):
            raise ValidationError("need 2 <= min_len <= max_len")


def assign_skills(cfg: SimulatorConfig) -> SkillMap:
    """Balanced primary skill per question plus an occasional second skill."""
    rng = np.random.default_rng(cfg.assignment_seed)
    order = rng.permutation(cfg.questions)
    skills: list[set[int]] = [set() for _ in range(cfg.questions)]
    for rank, q in enumerate(order):
        skills[q].add(rank % cfg.skills)
    if cfg.skills > 1:
        for q in range(cfg.questions):
            if rng.random() < SECOND_SKILL_PROB:
                primary = next(iter(skills[q]))
                extra = int(rng.integers(cfg.skills - 1))
                skills[q].add(extra + 1 if extra >= primary else extra)
    return SkillMap(skills)


def simulate(cfg: SimulatorConfig):
    """Generate (sequences, skill map, mastery traces) under the config.

    Each student is driven by an independent generator derived from
    (seed, student index), so the population is reproducible and
    order-independent.  Traces record the post-practice mastery of every
    skill at every step.
    """
    cfg.validate()
    skill_map = assign_skills(cfg)
    q_skills = [np.array(sorted(skill_map[q]), dtype=np.intp)
                for q in range(cfg.questions)]
    signal = 1.0 - cfg.guess - cfg.slip
    width = len(str(cfg.students - 1))
    sequences = []
    traces: list[MasteryRecord] = []
    for i in range(cfg.students):
        rng = np.random.default_rng([cfg.seed, i])
        student = f"s{i:0{width}d}"
        length = int(rng.integers(cfg.min_len, cfg.max_len + 1))
        mastery = rng.uniform(cfg.mastery_low, cfg.mastery_high, size=cfg.skills)
        steps = []
        for t in range(length):
            q = int(rng.integers(cfg.questions))
            p = cfg.guess + signal * float(mastery[q_skills[q]].mean())
            correct = int(rng.random() < p)
            steps.append(Interaction(q, correct))
            mastery[q_skills[q]] = np.minimum(1.0, mastery[q_skills[q]] + cfg.gain)
            for s in range(cfg.skills):
                traces.append(MasteryRecord(student, t, s, float(mastery[s])))
        sequences.append(InteractionSequence(student, steps))
    return sequences, skill_map, traces
