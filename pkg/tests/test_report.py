import numpy as np

from ktside.data import MasteryRecord
from ktside.report import (save_mastery_figure, save_matrix_figure,
                           save_training_figure)
from ktside.training import EpochStats, LossBreakdown


def test_training_figure(tmp_path):
    history = [EpochStats(e, LossBreakdown(0.7 - 0.05 * e, 0.01, 0.7 - 0.049 * e),
                          0.6 + 0.01 * e, 0.5) for e in range(6)]
    path = tmp_path / "curves.png"
    save_training_figure(history, path)
    assert path.stat().st_size > 1000


def test_training_figure_without_validation(tmp_path):
    history = [EpochStats(e, LossBreakdown(0.7, 0.0, 0.7), None, 0.5)
               for e in range(3)]
    path = tmp_path / "curves.png"
    save_training_figure(history, path)
    assert path.exists()


def test_matrix_figure_with_na_cell(tmp_path):
    rows = ("rnn", "lstm", "gru", "dkts")
    cols = ("gaussian", "line", "node2vec")
    means = {(r, c): 0.65 + 0.01 * i for i, (r, c) in
             enumerate((r, c) for r in rows for c in cols)}
    means[("dkts", "gaussian")] = None
    path = tmp_path / "matrix.png"
    save_matrix_figure(rows, cols, means, path)
    assert path.stat().st_size > 1000


def test_mastery_figure(tmp_path):
    rng = np.random.default_rng(0)
    traces = [MasteryRecord(f"s{i}", t, s, float(rng.random()))
              for i in range(4) for t in range(10) for s in range(3)]
    path = tmp_path / "mastery.png"
    save_mastery_figure(traces, 3, path)
    assert path.stat().st_size > 1000
