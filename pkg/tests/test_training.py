import math

import numpy as np
import pytest

from test_model import oracle_forward

from ktside.autodiff import grad_check
from ktside.data import Interaction, InteractionSequence
from ktside.embeddings import embed_gaussian
from ktside.errors import NumericError, ValidationError
from ktside.metrics import evaluate
from ktside.qgraph import QuestionGraph, laplacian
from ktside.training import (TrainConfig, _BatchGraph, fit, loss_prediction,
                             loss_relation, sequence_loss, tune_alpha)
from ktside.model import ModelParams


def rng_graph(rng, n, density=0.3):
    ei, ej = np.triu_indices(n, k=1)
    keep = rng.random(ei.size) < density
    return QuestionGraph(n, ei[keep], ej[keep], rng.uniform(0.2, 1.5, keep.sum()))


def rng_sequences(rng, students, q, lo, hi):
    out = []
    for i in range(students):
        n = int(rng.integers(lo, hi + 1))
        steps = [Interaction(int(rng.integers(q)), int(rng.integers(2)))
                 for _ in range(n)]
        out.append(InteractionSequence(f"s{i:03d}", steps))
    return out


def test_loss_prediction_values():
    p = np.array([0.5, 0.9, 0.1])
    assert loss_prediction(p, Interaction(0, 1)) == pytest.approx(math.log(2))
    assert loss_prediction(p, Interaction(0, 0)) == pytest.approx(math.log(2))
    assert loss_prediction(p, Interaction(1, 1)) == pytest.approx(0.105361, abs=1e-6)


def test_loss_relation_matches_quad_form():
    rng = np.random.default_rng(0)
    g = rng_graph(rng, 20)
    p = rng.random(20)
    dense = laplacian(g).dense()
    assert loss_relation(p, g) == pytest.approx(0.5 * p @ dense @ p, abs=1e-12)
    assert loss_relation(np.full(20, 0.3), g) == 0.0
    g2 = QuestionGraph(2, np.array([0]), np.array([1]), np.array([1.0]))
    assert loss_relation(np.array([1.0, 0.0]), g2) == 0.5


def test_sequence_loss_alpha_zero_is_prediction_only():
    rng = np.random.default_rng(1)
    params = ModelParams.init("gru", embed_gaussian(6, 3, 2), 4, seed=3)
    seq = rng_sequences(rng, 1, 6, 5, 8)[0]
    out = sequence_loss(seq, params, None, alpha=0.0)
    assert out.total == out.prediction
    assert out.relation == 0.0


def test_sequence_loss_zero_params_is_log_two():
    params = ModelParams.zeros("lstm", embed_gaussian(5, 3, 0), hidden_size=4)
    seq = InteractionSequence("a", [Interaction(0, 1), Interaction(3, 0),
                                    Interaction(2, 1), Interaction(4, 1)])
    out = sequence_loss(seq, params, None, alpha=0.0)
    assert out.prediction == pytest.approx(math.log(2), abs=1e-12)


def test_sequence_loss_matches_straight_line_recomputation():
    rng = np.random.default_rng(4)
    graph = rng_graph(rng, 6, density=0.5)
    params = ModelParams.init("gru", embed_gaussian(6, 3, 5), 4, seed=6)
    seq = rng_sequences(rng, 1, 6, 7, 7)[0]
    alpha = 0.3
    got = sequence_loss(seq, params, graph, alpha)

    preds = oracle_forward(seq.steps, params)
    dense = laplacian(graph).dense()
    pred_terms, rel_terms = [], []
    for t, p in enumerate(preds):
        nxt = seq.steps[t + 1]
        sel = min(max(p[nxt.question], 1e-7), 1 - 1e-7)
        pred_terms.append(-math.log(sel) if nxt.correct else -math.log(1 - sel))
        rel_terms.append(0.5 * p @ dense @ p)
    assert got.prediction == pytest.approx(np.mean(pred_terms), abs=1e-12)
    assert got.relation == pytest.approx(np.mean(rel_terms), abs=1e-12)
    assert got.total == pytest.approx(got.prediction + alpha * got.relation,
                                      abs=1e-12)


def test_sequence_loss_rejects_short():
    params = ModelParams.init("rnn", embed_gaussian(4, 2, 0), 3, seed=0)
    with pytest.raises(ValidationError):
        sequence_loss([Interaction(0, 1)], params, None, 0.0)


def test_alpha_requires_graph():
    params = ModelParams.init("rnn", embed_gaussian(4, 2, 0), 3, seed=0)
    seq = [Interaction(0, 1), Interaction(1, 0)]
    with pytest.raises(ValidationError):
        sequence_loss(seq, params, None, alpha=0.5)


def test_batched_loss_equals_mean_of_sequence_losses():
    # padding and masking must not change the value
    rng = np.random.default_rng(7)
    graph = rng_graph(rng, 8, density=0.4)
    params = ModelParams.init("lstm", embed_gaussian(8, 3, 8), 5, seed=9)
    seqs = rng_sequences(rng, 3, 8, 3, 9)  # mixed lengths force padding
    alpha = 0.2
    batch = _BatchGraph(params, [s.steps for s in seqs], graph, alpha).run()
    singles = [sequence_loss(s, params, graph, alpha) for s in seqs]
    assert batch.prediction == pytest.approx(
        np.mean([s.prediction for s in singles]), abs=1e-12)
    assert batch.relation == pytest.approx(
        np.mean([s.relation for s in singles]), abs=1e-12)


@pytest.mark.parametrize("cell", ["rnn", "lstm", "gru"])
def test_full_loss_gradient_matches_finite_differences(cell):
    # tiny model, trainable embedding so every parameter is covered
    rng = np.random.default_rng(10)
    graph = rng_graph(rng, 5, density=0.6)
    params = ModelParams.init(cell, embed_gaussian(5, 4, 11), hidden_size=6,
                              seed=12, trainable_embedding=True)
    seq = rng_sequences(rng, 1, 5, 7, 7)[0]
    bg = _BatchGraph(params, [seq.steps], graph, alpha=0.5)
    report = grad_check(bg.graph, bg.total_node)
    assert max(report.values()) < 1e-4


def test_fit_zero_epochs_keeps_params():
    rng = np.random.default_rng(13)
    params = ModelParams.init("gru", embed_gaussian(5, 3, 0), 4, seed=1)
    before = {k: v.copy() for k, v in params.weights.items()}
    seqs = rng_sequences(rng, 3, 5, 4, 8)
    _, history = fit(seqs, params, None, TrainConfig(alpha=0.0, epochs=0))
    assert history == []
    for name, arr in params.weights.items():
        assert np.array_equal(arr, before[name])


def test_fit_memorizes_single_sequence():
    rng = np.random.default_rng(14)
    params = ModelParams.init("gru", embed_gaussian(5, 3, 2), 8, seed=3)
    seqs = rng_sequences(rng, 1, 5, 6, 6)
    cfg = TrainConfig(alpha=0.0, learning_rate=0.02, epochs=200, batch_size=1)
    _, history = fit(seqs, params, None, cfg)
    assert history[-1].loss.total < 0.1


def test_fit_decreases_loss():
    rng = np.random.default_rng(15)
    params = ModelParams.init("gru", embed_gaussian(8, 4, 4), 8, seed=5)
    seqs = rng_sequences(rng, 10, 8, 5, 12)
    _, history = fit(seqs, params, None, TrainConfig(alpha=0.0, epochs=50))
    assert history[-1].loss.total < history[0].loss.total


def test_fit_deterministic_under_seed():
    rng = np.random.default_rng(16)
    seqs = rng_sequences(rng, 6, 5, 4, 9)
    graph = rng_graph(np.random.default_rng(1), 5, density=0.6)

    def run():
        params = ModelParams.init("rnn", embed_gaussian(5, 3, 6), 4, seed=7)
        _, history = fit(seqs, params, graph,
                         TrainConfig(alpha=0.1, epochs=5, seed=21))
        return params, history

    p1, h1 = run()
    p2, h2 = run()
    for a, b in zip(h1, h2):
        assert a.loss == b.loss
    for name in p1.weights:
        assert np.array_equal(p1.weights[name], p2.weights[name])


def test_alpha_zero_identical_to_graphless_build():
    rng = np.random.default_rng(17)
    seqs = rng_sequences(rng, 6, 5, 4, 9)
    graph = rng_graph(np.random.default_rng(2), 5, density=0.6)

    def run(g):
        params = ModelParams.init("gru", embed_gaussian(5, 3, 8), 4, seed=9)
        _, history = fit(seqs, params, g, TrainConfig(alpha=0.0, epochs=6, seed=3))
        return params, history

    p_with, h_with = run(graph)
    p_none, h_none = run(None)
    for a, b in zip(h_with, h_none):
        assert abs(a.loss.total - b.loss.total) <= 1e-12
        assert a.loss == b.loss
    for name in p_with.weights:
        assert np.array_equal(p_with.weights[name], p_none.weights[name])


def test_fit_reports_numeric_failure_with_batch():
    rng = np.random.default_rng(18)
    seqs = rng_sequences(rng, 2, 4, 4, 6)
    params = ModelParams.init("rnn", embed_gaussian(4, 2, 0), 3, seed=0)
    params.weights["in"][:] = np.inf  # 0*inf in the first matmul makes a NaN
    with pytest.raises(NumericError, match="batch"):
        fit(seqs, params, None, TrainConfig(alpha=0.0, epochs=1))


def test_early_stopping_restores_best_weights():
    rng = np.random.default_rng(19)
    train = rng_sequences(rng, 8, 6, 5, 10)
    val = rng_sequences(rng, 4, 6, 5, 10)
    params = ModelParams.init("gru", embed_gaussian(6, 3, 1), 6, seed=2)
    cfg = TrainConfig(alpha=0.0, epochs=60, patience=3, seed=4)
    _, history = fit(train, params, None, cfg, val_seqs=val)
    assert len(history) < 60  # random data: validation AUC stalls quickly
    best = max(h.val_auc for h in history)
    assert evaluate(params, val).auc == pytest.approx(best, abs=1e-12)


def test_fit_rejects_empty_training_set():
    params = ModelParams.init("rnn", embed_gaussian(4, 2, 0), 3, seed=0)
    with pytest.raises(ValidationError):
        fit([], params, None, TrainConfig())


def test_fit_truncation_windows():
    # a long sequence still trains when split into windows
    rng = np.random.default_rng(20)
    params = ModelParams.init("rnn", embed_gaussian(5, 3, 3), 4, seed=4)
    steps = [Interaction(int(rng.integers(5)), int(rng.integers(2)))
             for _ in range(37)]
    seqs = [InteractionSequence("long", steps)]
    cfg = TrainConfig(alpha=0.0, epochs=2, max_seq_len=10, batch_size=8)
    _, history = fit(seqs, params, None, cfg)
    assert len(history) == 2
    assert np.isfinite(history[-1].loss.total)


def test_fit_finetunes_embedding_when_asked():
    rng = np.random.default_rng(22)
    seqs = rng_sequences(rng, 5, 5, 5, 9)
    params = ModelParams.init("rnn", embed_gaussian(5, 3, 9), 4, seed=9)
    before = params.embedding.values.copy()
    cfg = TrainConfig(alpha=0.0, epochs=3, finetune_embeddings=True)
    fit(seqs, params, None, cfg)
    assert not np.array_equal(params.embedding.values, before)
    assert np.all(np.isfinite(params.embedding.values))


def test_frozen_embedding_untouched_by_fit():
    rng = np.random.default_rng(23)
    seqs = rng_sequences(rng, 5, 5, 5, 9)
    params = ModelParams.init("rnn", embed_gaussian(5, 3, 9), 4, seed=9)
    before = params.embedding.values.copy()
    fit(seqs, params, None, TrainConfig(alpha=0.0, epochs=3))
    assert np.array_equal(params.embedding.values, before)


def test_train_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(alpha=-0.1).validate()
    with pytest.raises(ValidationError):
        TrainConfig(learning_rate=0.0).validate()
    with pytest.raises(ValidationError):
        TrainConfig(optimizer="momentum").validate()
    with pytest.raises(ValidationError):
        TrainConfig(batch_size=0).validate()


def test_regularizer_smooths_held_out_predictions():
    # over 5 seeds, mean held-out relation loss is lower when trained with
    # alpha=1 than with alpha=0
    from ktside.data import SimulatorConfig, simulate, split
    from ktside.embeddings import SgnsConfig, embed_line
    from ktside.qgraph import build_graph

    sim = SimulatorConfig(students=80, questions=20, skills=3, min_len=10,
                          max_len=20, seed=5)
    seqs, skills, _ = simulate(sim)
    graph = build_graph(skills, "binary")
    train, _, test = split(seqs, 0.7, 0.1, seed=2)

    def mean_relation(alpha, seed):
        emb = embed_line(graph, 1, SgnsConfig(dim=8, epochs=2), seed=seed)
        params = ModelParams.init("gru", emb, 16, seed=seed + 1)
        cfg = TrainConfig(alpha=alpha, epochs=8, seed=seed + 2)
        fit(train, params, graph if alpha > 0 else None, cfg)
        return evaluate(params, test, graph=graph).mean_relation

    smooth = [mean_relation(1.0, s) for s in range(5)]
    rough = [mean_relation(0.0, s) for s in range(5)]
    assert np.mean(smooth) < np.mean(rough)


def test_tune_alpha_returns_grid_results():
    rng = np.random.default_rng(21)
    graph = rng_graph(np.random.default_rng(3), 5, density=0.8)
    train = rng_sequences(rng, 6, 5, 4, 8)
    val = rng_sequences(rng, 3, 5, 4, 8)

    def make_params():
        return ModelParams.init("rnn", embed_gaussian(5, 3, 4), 4, seed=5)

    cfg = TrainConfig(epochs=3, seed=6)
    best, results = tune_alpha(train, val, make_params, graph, cfg,
                               grid=(0.01, 0.5))
    assert set(results) == {0.01, 0.5}
    assert best in results
    assert results[best] == max(results.values())
