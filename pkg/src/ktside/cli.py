"""Command line pipeline: simulate, build-graph, embed, train, eval, matrix.

Every tunable flag mirrors a config key of the same name; ``--config``
loads a flat ``key=value`` file whose entries act as defaults, with CLI
flags taking precedence.  Each run writes a JSON manifest sufficient to
reproduce it.  Exit codes: 0 success, 1 usage/validation problems,
2 runtime or numeric failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .data import (SimulatorConfig, filter_sequences, parse_log, question_count,
                   serialize_log, simulate, split, write_mastery_trace)
from .embeddings import (EmbeddingTable, SgnsConfig, embed_gaussian, embed_line,
                         embed_node2vec)
from .errors import KtError, NumericError, ParseError, ValidationError
from .metrics import evaluate, write_step_dump
from .model import CELL_TYPES, ModelParams, load_checkpoint, save_checkpoint
from .qgraph import QuestionGraph, SkillMap, build_graph
from .training import TrainConfig, fit

MATRIX_ROWS = ("rnn", "lstm", "gru", "dkts")
MATRIX_COLS = ("gaussian", "line", "node2vec")


def derive_seed(master: int, *tags) -> int:
    """Stable fan-out of one master seed to named sub-streams."""
    text = ":".join([str(int(master)), *map(str, tags)])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") % (2 ** 63)


def load_config(path) -> dict[str, str]:
    """Flat key=value file; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _coerce(text: str, typ):
    if typ is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"cannot read {text!r} as a boolean")
    return typ(text)


class _Options:
    """CLI flag > config-file entry > built-in default."""

    def __init__(self, args, file_cfg: dict[str, str]):
        self.args = args
        self.file = file_cfg
        self.resolved: dict[str, object] = {}

    def get(self, key: str, typ, default):
        value = getattr(self.args, key, None)
        if value is None:
            if key in self.file:
                value = _coerce(self.file[key], typ)
            else:
                value = default
        self.resolved[key] = value
        return value


def write_manifest(path, command: str, config: dict, inputs, outputs,
                   seed, t0: float) -> None:
    payload = {
        "command": command,
        "config": {k: v for k, v in sorted(config.items())},
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": seed,
        "version": __version__,
        "wall_time_s": round(time.time() - t0, 3),
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()[:16]


# ----------------------------------------------------------------------
# argument plumbing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_config_flag(p):
    p.add_argument("--config", help="key=value file with defaults for the flags")


def _add_train_flags(p):
    p.add_argument("--alpha", type=float, help="relation-regulariser weight")
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--optimizer", choices=["adam", "sgd"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-seq-len", type=int)
    p.add_argument("--clip-norm", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--finetune-embeddings", action="store_true", default=None)
    p.add_argument("--patience", type=int)
    p.add_argument("--cell", choices=list(CELL_TYPES))
    p.add_argument("--hidden-size", type=int)
    p.add_argument("--min-len", type=int, help="drop shorter sequences")
    p.add_argument("--max-len", type=int, help="truncate longer sequences")


def _add_sgns_flags(p):
    p.add_argument("--dim", type=int)
    p.add_argument("--sgns-epochs", type=int)
    p.add_argument("--sgns-learning-rate", type=float)
    p.add_argument("--negatives", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--noise-exponent", type=float)
    p.add_argument("--walk-len", type=int)
    p.add_argument("--walks-per-node", type=int)
    p.add_argument("--return-param", type=float)
    p.add_argument("--inout-param", type=float)


def build_parser() -> _Parser:
    parser = _Parser(prog="ktside",
                     description="knowledge tracing with question-relation side "
                                 "information")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic student dataset")
    _add_config_flag(p)
    p.add_argument("--out", required=True, help="output directory")
    for key in ("students", "questions", "skills", "assignment-seed", "min-len",
                "max-len", "seed"):
        p.add_argument(f"--{key}", type=int)
    for key in ("guess", "slip", "gain", "mastery-low", "mastery-high"):
        p.add_argument(f"--{key}", type=float)
    p.add_argument("--no-figures", action="store_true", default=None)

    p = sub.add_parser("build-graph", help="skill map -> question relation graph")
    _add_config_flag(p)
    p.add_argument("--skills", required=True)
    p.add_argument("--out", required=True, help="output edge-list file")
    p.add_argument("--weighting", choices=["binary", "jaccard"])

    p = sub.add_parser("embed", help="train a question embedding table")
    _add_config_flag(p)
    p.add_argument("--method", required=True,
                   choices=["gaussian", "line1", "line2", "node2vec"])
    p.add_argument("--graph", help="edge-list graph file")
    p.add_argument("--skills", help="skill-map file (binary graph is built)")
    p.add_argument("--questions", type=int, help="table size for gaussian "
                                                 "without a graph")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    _add_sgns_flags(p)

    p = sub.add_parser("train", help="train a knowledge-tracing model")
    _add_config_flag(p)
    p.add_argument("--data", required=True, help="interaction log")
    p.add_argument("--val-data", help="held-out log for early stopping")
    p.add_argument("--embedding", required=True, help="embedding table file")
    p.add_argument("--graph", help="edge-list graph (required when alpha > 0)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true", default=None)
    _add_train_flags(p)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    _add_config_flag(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--graph", help="also report mean relation loss")
    p.add_argument("--out", help="directory for metrics.txt and manifest")
    p.add_argument("--dump-steps", help="write per-step scores here")
    p.add_argument("--min-len", type=int)
    p.add_argument("--max-len", type=int)

    p = sub.add_parser("matrix", help="cells x embeddings comparison table")
    _add_config_flag(p)
    p.add_argument("--data", required=True, help="interaction log (skill column "
                                                 "used when present)")
    p.add_argument("--skills", help="skill-map file if the log has no skill column")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", type=int, help="number of repeated runs")
    p.add_argument("--dkts-cell", choices=list(CELL_TYPES))
    p.add_argument("--line-order", type=int, choices=[1, 2])
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--val-fraction", type=float)
    p.add_argument("--jobs", type=int, help="parallel training processes")
    p.add_argument("--no-figures", action="store_true", default=None)
    _add_train_flags(p)
    _add_sgns_flags(p)
    return parser


# ----------------------------------------------------------------------
# shared loaders


def _sim_config(opt: _Options) -> SimulatorConfig:
    base = SimulatorConfig()
    return SimulatorConfig(
        students=opt.get("students", int, base.students),
        questions=opt.get("questions", int, base.questions),
        skills=opt.get("skills", int, base.skills),
        assignment_seed=opt.get("assignment_seed", int, base.assignment_seed),
        guess=opt.get("guess", float, base.guess),
        slip=opt.get("slip", float, base.slip),
        mastery_low=opt.get("mastery_low", float, base.mastery_low),
        mastery_high=opt.get("mastery_high", float, base.mastery_high),
        gain=opt.get("gain", float, base.gain),
        min_len=opt.get("min_len", int, base.min_len),
        max_len=opt.get("max_len", int, base.max_len),
        seed=opt.get("seed", int, base.seed),
    )


def _train_config(opt: _Options, seed_default: int | None = None) -> TrainConfig:
    base = TrainConfig()
    return TrainConfig(
        alpha=opt.get("alpha", float, base.alpha),
        learning_rate=opt.get("learning_rate", float, base.learning_rate),
        optimizer=opt.get("optimizer", str, base.optimizer),
        epochs=opt.get("epochs", int, base.epochs),
        batch_size=opt.get("batch_size", int, base.batch_size),
        max_seq_len=opt.get("max_seq_len", int, base.max_seq_len),
        clip_norm=opt.get("clip_norm", float, base.clip_norm),
        seed=opt.get("seed", int, base.seed if seed_default is None else seed_default),
        finetune_embeddings=opt.get("finetune_embeddings", bool,
                                    base.finetune_embeddings),
        patience=opt.get("patience", int, base.patience),
    )


def _sgns_config(opt: _Options) -> SgnsConfig:
    base = SgnsConfig()
    return SgnsConfig(
        dim=opt.get("dim", int, base.dim),
        epochs=opt.get("sgns_epochs", int, base.epochs),
        learning_rate=opt.get("sgns_learning_rate", float, base.learning_rate),
        negatives=opt.get("negatives", int, base.negatives),
        window=opt.get("window", int, base.window),
        noise_exponent=opt.get("noise_exponent", float, base.noise_exponent),
    )


def _load_filtered(path, opt: _Options):
    seqs, skills, _ = parse_log(path)
    min_len = opt.get("min_len", int, 3)
    max_len = opt.get("max_len", int, 200)
    return filter_sequences(seqs, min_len, max_len), skills


def _check_question_counts(seqs, q_model: int, graph: QuestionGraph | None,
                           context: str) -> None:
    q_data = question_count(seqs)
    if q_data > q_model:
        raise ValidationError(
            f"{context}: data references question {q_data - 1} but the "
            f"embedding table has only {q_model} rows")
    if graph is not None and graph.question_count != q_model:
        raise ValidationError(
            f"{context}: graph has {graph.question_count} questions, "
            f"embedding table has {q_model}")


def _write_training_log(path, history) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch\tloss_prediction\tloss_relation\tloss_total\t"
                 "val_auc\twall_time_s\n")
        for h in history:
            val = f"{h.val_auc:.6f}" if h.val_auc is not None else "NA"
            fh.write(f"{h.epoch}\t{h.loss.prediction:.9f}\t{h.loss.relation:.9f}"
                     f"\t{h.loss.total:.9f}\t{val}\t{h.wall_time:.3f}\n")


# ----------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    t0 = time.time()
    opt = _Options(args, load_config(args.config) if args.config else {})
    cfg = _sim_config(opt)
    no_figures = opt.get("no_figures", bool, False)
    os.makedirs(args.out, exist_ok=True)
    seqs, skills, traces = simulate(cfg)
    log_path = os.path.join(args.out, "interactions.tsv")
    skills_path = os.path.join(args.out, "skills.tsv")
    trace_path = os.path.join(args.out, "mastery.tsv")
    serialize_log(log_path, seqs, skills)
    skills.save(skills_path)
    write_mastery_trace(trace_path, traces)
    outputs = [log_path, skills_path, trace_path]
    if not no_figures:
        from .report import save_mastery_figure
        fig_path = os.path.join(args.out, "mastery.png")
        save_mastery_figure(traces, cfg.skills, fig_path)
        outputs.append(fig_path)
    write_manifest(os.path.join(args.out, "manifest.json"), "simulate",
                   opt.resolved, [], outputs, cfg.seed, t0)
    rows = sum(len(s) for s in seqs)
    print(f"simulated {len(seqs)} students, {rows} interactions, "
          f"{cfg.questions} questions -> {args.out}")
    return 0


def cmd_build_graph(args) -> int:
    t0 = time.time()
    opt = _Options(args, load_config(args.config) if args.config else {})
    weighting = opt.get("weighting", str, "binary")
    skills = SkillMap.load(args.skills)
    graph = build_graph(skills, weighting)
    graph.save(args.out)
    write_manifest(f"{args.out}.manifest.json", "build-graph", opt.resolved,
                   [args.skills], [args.out], None, t0)
    print(f"graph over {graph.question_count} questions, "
          f"{graph.edge_count} edges -> {args.out}")
    return 0


def _load_graph_for_embed(args) -> QuestionGraph | None:
    if args.graph:
        return QuestionGraph.load(args.graph)
    if args.skills:
        return build_graph(SkillMap.load(args.skills), "binary")
    return None


def cmd_embed(args) -> int:
    t0 = time.time()
    opt = _Options(args, load_config(args.config) if args.config else {})
    seed = opt.get("seed", int, 0)
    cfg = _sgns_config(opt)
    graph = _load_graph_for_embed(args)
    if args.method == "gaussian":
        q = graph.question_count if graph is not None else \
            opt.get("questions", int, 0)
        if q < 1:
            raise ValidationError("gaussian embedding needs --graph, --skills "
                                  "or --questions")
        table = embed_gaussian(q, cfg.dim, seed)
    else:
        if graph is None:
            raise ValidationError(f"method {args.method} requires --graph or "
                                  "--skills")
        if args.method in ("line1", "line2"):
            table = embed_line(graph, int(args.method[-1]), cfg, seed)
        else:
            table = embed_node2vec(
                graph, opt.get("return_param", float, 1.0),
                opt.get("inout_param", float, 1.0), cfg,
                walk_len=opt.get("walk_len", int, 20),
                walks_per_node=opt.get("walks_per_node", int, 10), seed=seed)
    table.save(args.out)
    inputs = [p for p in (args.graph, args.skills) if p]
    write_manifest(f"{args.out}.manifest.json", "embed", opt.resolved, inputs,
                   [args.out], seed, t0)
    print(f"{table.method} table {table.question_count}x{table.dim} -> {args.out}")
    return 0


def cmd_train(args) -> int:
    t0 = time.time()
    opt = _Options(args, load_config(args.config) if args.config else {})
    cfg = _train_config(opt)
    cell = opt.get("cell", str, "gru")
    hidden = opt.get("hidden_size", int, 64)
    no_figures = opt.get("no_figures", bool, False)

    if cfg.alpha > 0 and not args.graph:
        raise ValidationError("alpha > 0 (relation regulariser on) requires "
                              "--graph; pass --alpha 0 for a baseline run")
    table = EmbeddingTable.load(args.embedding)
    graph = QuestionGraph.load(args.graph) if args.graph else None
    train_seqs, _ = _load_filtered(args.data, opt)
    if not train_seqs:
        raise ValidationError(f"{args.data}: no sequences left after filtering")
    val_seqs = None
    if args.val_data:
        val_seqs, _ = _load_filtered(args.val_data, opt)
    _check_question_counts(train_seqs, table.question_count, graph, args.data)

    params = ModelParams.init(cell, table, hidden, seed=derive_seed(cfg.seed, "init"),
                              trainable_embedding=cfg.finetune_embeddings)
    params, history = fit(train_seqs, params, graph, cfg, val_seqs=val_seqs)

    os.makedirs(args.out, exist_ok=True)
    ckpt_path = os.path.join(args.out, "model.npz")
    log_path = os.path.join(args.out, "training_log.tsv")
    save_checkpoint(ckpt_path, params,
                    meta={"config_hash": _config_hash(opt.resolved),
                          "cell": cell, "data": str(args.data)})
    _write_training_log(log_path, history)
    outputs = [ckpt_path, log_path]
    if not no_figures and history:
        from .report import save_training_figure
        fig_path = os.path.join(args.out, "training_curves.png")
        save_training_figure(history, fig_path)
        outputs.append(fig_path)
    write_manifest(os.path.join(args.out, "manifest.json"), "train",
                   opt.resolved, [args.data, args.embedding] +
                   ([args.graph] if args.graph else []), outputs, cfg.seed, t0)
    final = history[-1].loss.total if history else float("nan")
    print(f"trained {cell} ({len(history)} epochs, final loss {final:.4f}) "
          f"-> {ckpt_path}")
    return 0


def cmd_eval(args) -> int:
    t0 = time.time()
    opt = _Options(args, load_config(args.config) if args.config else {})
    params, _ = load_checkpoint(args.checkpoint)
    seqs, _ = _load_filtered(args.data, opt)
    if not seqs:
        raise ValidationError(f"{args.data}: no sequences left after filtering")
    graph = QuestionGraph.load(args.graph) if args.graph else None
    _check_question_counts(seqs, params.question_count, graph, args.data)
    dump: list = []
    metrics = evaluate(params, seqs, graph=graph,
                       dump=dump if args.dump_steps else None)
    print(metrics.as_line())
    outputs = []
    if args.dump_steps:
        write_step_dump(args.dump_steps, dump)
        outputs.append(args.dump_steps)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        metrics_path = os.path.join(args.out, "metrics.txt")
        with open(metrics_path, "w", encoding="utf-8") as fh:
            fh.write(metrics.as_line() + "\n")
        outputs.append(metrics_path)
        write_manifest(os.path.join(args.out, "manifest.json"), "eval",
                       opt.resolved, [args.checkpoint, args.data], outputs,
                       None, t0)
    return 0


# ----------------------------------------------------------------------
# the comparison matrix


def _matrix_run(payload):
    """One grid cell training run; executed possibly in a worker process."""
    (row, col, run_idx, cell, alpha, table, graph, train_seqs, val_seqs,
     test_seqs, cfg_dict, hidden, init_seed) = payload
    cfg = TrainConfig(**cfg_dict, alpha=alpha)
    params = ModelParams.init(cell, table, hidden, seed=init_seed,
                              trainable_embedding=cfg.finetune_embeddings)
    params, history = fit(train_seqs, params, graph if alpha > 0 else None,
                          cfg, val_seqs=val_seqs)
    auc = evaluate(params, test_seqs).auc
    return row, col, run_idx, auc, len(history)


def cmd_matrix(args) -> int:
    t0 = time.time()
    opt = _Options(args, load_config(args.config) if args.config else {})
    base = TrainConfig()
    seed = opt.get("seed", int, 0)
    n_seeds = opt.get("seeds", int, 5)
    alpha = opt.get("alpha", float, base.alpha)
    dkts_cell = opt.get("dkts_cell", str, "gru")
    line_order = opt.get("line_order", int, 1)
    hidden = opt.get("hidden_size", int, 64)
    jobs = opt.get("jobs", int, 1)
    train_frac = opt.get("train_fraction", float, 0.7)
    val_frac = opt.get("val_fraction", float, 0.1)
    no_figures = opt.get("no_figures", bool, False)
    patience = opt.get("patience", int, 5)
    sgns = _sgns_config(opt)

    seqs, skills = _load_filtered(args.data, opt)
    if skills is None:
        if not args.skills:
            raise ValidationError("the log has no skill column; pass --skills")
        skills = SkillMap.load(args.skills)
    graph = build_graph(skills, "binary")
    train_seqs, val_seqs, test_seqs = split(seqs, train_frac, val_frac,
                                            seed=derive_seed(seed, "split"))
    q = len(skills)
    _check_question_counts(seqs, q, graph, args.data)

    tables: dict[tuple[str, int], EmbeddingTable] = {}
    for r in range(n_seeds):
        e_seed = derive_seed(seed, "embed", r)
        tables[("gaussian", r)] = embed_gaussian(q, sgns.dim, e_seed)
        tables[("line", r)] = embed_line(graph, line_order, sgns, e_seed)
        tables[("node2vec", r)] = embed_node2vec(
            graph, opt.get("return_param", float, 1.0),
            opt.get("inout_param", float, 1.0), sgns,
            walk_len=opt.get("walk_len", int, 20),
            walks_per_node=opt.get("walks_per_node", int, 10), seed=e_seed)

    cfg_common = dict(
        learning_rate=opt.get("learning_rate", float, base.learning_rate),
        optimizer=opt.get("optimizer", str, base.optimizer),
        epochs=opt.get("epochs", int, base.epochs),
        batch_size=opt.get("batch_size", int, base.batch_size),
        max_seq_len=opt.get("max_seq_len", int, base.max_seq_len),
        clip_norm=opt.get("clip_norm", float, base.clip_norm),
        finetune_embeddings=opt.get("finetune_embeddings", bool, False),
        patience=patience,
    )

    cells_plan = [(row, col, 0.0, row) for row in ("rnn", "lstm", "gru")
                  for col in MATRIX_COLS]
    cells_plan += [("dkts", col, alpha, dkts_cell)
                   for col in ("line", "node2vec")]

    runs = []
    for row, col, cell_alpha, cell in cells_plan:
        for r in range(n_seeds):
            cfg_dict = dict(cfg_common,
                            seed=derive_seed(seed, "train", row, col, r))
            runs.append((row, col, r, cell, cell_alpha, tables[(col, r)],
                         graph, train_seqs, val_seqs, test_seqs, cfg_dict,
                         hidden, derive_seed(seed, "init", row, col, r)))

    results: dict[tuple[str, str], list[float]] = {}
    done = 0

    def record(row, col, run_idx, auc, epochs):
        nonlocal done
        done += 1
        results.setdefault((row, col), [None] * n_seeds)[run_idx] = auc
        print(f"[{done}/{len(runs)}] {row} x {col} run {run_idx}: "
              f"auc={auc:.4f} ({epochs} epochs, {time.time() - t0:.0f}s)",
              file=sys.stderr, flush=True)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for row, col, run_idx, auc, epochs in pool.map(_matrix_run, runs):
                record(row, col, run_idx, auc, epochs)
    else:
        for payload in runs:
            record(*_matrix_run(payload))

    means = {key: float(np.mean(vals)) for key, vals in results.items()}

    os.makedirs(args.out, exist_ok=True)
    table_path = os.path.join(args.out, "matrix.tsv")
    runs_path = os.path.join(args.out, "matrix_runs.tsv")
    lines = ["method\t" + "\t".join(MATRIX_COLS)]
    for row in MATRIX_ROWS:
        cells = [f"{means[(row, col)]:.4f}" if (row, col) in means else "NA"
                 for col in MATRIX_COLS]
        lines.append(row + "\t" + "\t".join(cells))
    text = "\n".join(lines) + "\n"
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(runs_path, "w", encoding="utf-8") as fh:
        fh.write("method\tembedding\trun\tauc\n")
        for (row, col), vals in sorted(results.items()):
            for run_idx, auc in enumerate(vals):
                fh.write(f"{row}\t{col}\t{run_idx}\t{auc:.6f}\n")
    outputs = [table_path, runs_path]
    if not no_figures:
        from .report import save_matrix_figure
        fig_path = os.path.join(args.out, "matrix.png")
        save_matrix_figure(MATRIX_ROWS, MATRIX_COLS,
                           {k: means.get(k) for k in
                            ((r, c) for r in MATRIX_ROWS for c in MATRIX_COLS)},
                           fig_path)
        outputs.append(fig_path)
    write_manifest(os.path.join(args.out, "manifest.json"), "matrix",
                   opt.resolved, [args.data] +
                   ([args.skills] if args.skills else []), outputs, seed, t0)
    print(text, end="")
    return 0


# ----------------------------------------------------------------------


_HANDLERS = {
    "simulate": cmd_simulate,
    "build-graph": cmd_build_graph,
    "embed": cmd_embed,
    "train": cmd_train,
    "eval": cmd_eval,
    "matrix": cmd_matrix,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ValidationError, ParseError) as exc:
        print(f"ktside {args.command}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"ktside {args.command}: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"ktside {args.command}: numeric failure: {exc}", file=sys.stderr)
        return 2
    except KtError as exc:
        print(f"ktside {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
