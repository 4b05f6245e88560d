import numpy as np
import pytest

from ktside.errors import DimensionError, ParseError, ValidationError
from ktside.qgraph import (QuestionGraph, SkillMap, build_graph, laplacian,
                           quad_form, quad_form_grad)


def random_graph(rng, n):
    ei, ej = np.triu_indices(n, k=1)
    keep = rng.random(ei.size) < 0.3
    ei, ej = ei[keep], ej[keep]
    w = rng.uniform(0.1, 2.0, ei.size)
    return QuestionGraph(n, ei, ej, w)


def test_skill_map_rejects_empty_set():
    with pytest.raises(ValidationError, match="question 1"):
        SkillMap([{1}, set(), {2}])


def test_build_graph_binary_single_shared_skill():
    g = build_graph(SkillMap([{1}, {1}, {2}]), "binary")
    assert g.edge_count == 1
    assert (int(g.edge_i[0]), int(g.edge_j[0])) == (0, 1)
    assert g.edge_w[0] == 1.0


def test_build_graph_jaccard_weight():
    g = build_graph(SkillMap([{1, 2}, {2, 3}]), "jaccard")
    assert g.edge_count == 1
    assert g.edge_w[0] == pytest.approx(1.0 / 3.0)


def test_build_graph_shared_skill_complete():
    g = build_graph(SkillMap([{9}] * 4), "binary")
    assert g.edge_count == 6  # C(4,2)


def test_laplacian_path_graph():
    g = QuestionGraph(3, np.array([0, 1]), np.array([1, 2]), np.array([1.0, 1.0]))
    dense = laplacian(g).dense()
    assert np.array_equal(dense, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])


def test_laplacian_edgeless():
    g = QuestionGraph(3, np.array([], dtype=int), np.array([], dtype=int), np.array([]))
    assert np.array_equal(laplacian(g).dense(), np.zeros((3, 3)))


def test_laplacian_two_nodes():
    g = QuestionGraph(2, np.array([0]), np.array([1]), np.array([1.0]))
    assert np.array_equal(laplacian(g).dense(), [[1, -1], [-1, 1]])


def test_laplacian_row_sums_zero():
    rng = np.random.default_rng(3)
    for _ in range(10):
        g = random_graph(rng, int(rng.integers(2, 40)))
        dense = laplacian(g).dense()
        assert np.max(np.abs(dense.sum(axis=1))) < 1e-12


def test_normalized_laplacian_unit_diagonal():
    g = QuestionGraph(3, np.array([0, 1]), np.array([1, 2]), np.array([2.0, 1.0]))
    dense = laplacian(g, normalized=True).dense()
    assert np.allclose(np.diag(dense), [1.0, 1.0, 1.0])
    x = np.random.default_rng(0).normal(size=3)
    assert x @ dense @ x >= -1e-12


def test_quad_form_single_edge():
    g = QuestionGraph(2, np.array([0]), np.array([1]), np.array([1.0]))
    assert quad_form(g, [1.0, 0.0]) == 0.5


def test_quad_form_constant_vector_is_zero():
    rng = np.random.default_rng(5)
    g = random_graph(rng, 15)
    assert quad_form(g, np.full(15, 0.37)) == 0.0


def test_quad_form_matches_dense_oracle():
    rng = np.random.default_rng(9)
    for _ in range(50):
        n = int(rng.integers(2, 51))
        g = random_graph(rng, n)
        p = rng.normal(size=n)
        dense = laplacian(g).dense()
        assert quad_form(g, p) == pytest.approx(0.5 * p @ dense @ p, abs=1e-12)


def test_quad_form_nonnegative():
    rng = np.random.default_rng(13)
    g = random_graph(rng, 25)
    for _ in range(100):
        assert quad_form(g, rng.normal(size=25)) >= 0.0


def test_quad_form_shift_invariant():
    rng = np.random.default_rng(17)
    g = random_graph(rng, 20)
    p = rng.normal(size=20)
    assert quad_form(g, p + 3.7) == pytest.approx(quad_form(g, p), abs=1e-10)


def test_quad_form_grad_single_edge():
    g = QuestionGraph(2, np.array([0]), np.array([1]), np.array([1.0]))
    assert np.array_equal(quad_form_grad(g, [1.0, 0.0]), [1.0, -1.0])


def test_quad_form_grad_constant_is_zero():
    rng = np.random.default_rng(19)
    g = random_graph(rng, 12)
    assert np.allclose(quad_form_grad(g, np.full(12, 2.5)), 0.0, atol=1e-14)


def test_quad_form_grad_is_laplacian_product():
    rng = np.random.default_rng(23)
    for _ in range(10):
        n = int(rng.integers(2, 40))
        g = random_graph(rng, n)
        p = rng.normal(size=n)
        assert np.allclose(quad_form_grad(g, p), laplacian(g).dense() @ p, atol=1e-10)


def test_quad_form_grad_matches_finite_differences():
    rng = np.random.default_rng(29)
    g = random_graph(rng, 20)
    p = rng.normal(size=20)
    h = 1e-6
    grad = quad_form_grad(g, p)
    for k in range(20):
        e = np.zeros(20)
        e[k] = h
        num = (quad_form(g, p + e) - quad_form(g, p - e)) / (2 * h)
        assert grad[k] == pytest.approx(num, abs=1e-6)


def test_quad_form_length_mismatch():
    g = QuestionGraph(3, np.array([0]), np.array([1]), np.array([1.0]))
    with pytest.raises(DimensionError):
        quad_form(g, [1.0, 2.0])
    with pytest.raises(DimensionError):
        quad_form_grad(g, [1.0, 2.0])


def test_graph_rejects_bad_edges():
    with pytest.raises(ValidationError):
        QuestionGraph(3, np.array([1]), np.array([1]), np.array([1.0]))  # i == j
    with pytest.raises(ValidationError):
        QuestionGraph(3, np.array([0]), np.array([1]), np.array([-1.0]))


def test_skill_map_file_round_trip(tmp_path):
    sm = SkillMap([{0, 3}, {1}, {1, 4}])
    path = tmp_path / "skills.tsv"
    sm.save(path)
    loaded = SkillMap.load(path)
    assert loaded.skills == sm.skills


def test_graph_file_round_trip(tmp_path):
    rng = np.random.default_rng(31)
    g = random_graph(rng, 12)
    path = tmp_path / "graph.tsv"
    g.save(path)
    loaded = QuestionGraph.load(path)
    assert loaded.question_count == g.question_count
    assert np.array_equal(loaded.edge_i, g.edge_i)
    assert np.array_equal(loaded.edge_j, g.edge_j)
    assert np.array_equal(loaded.edge_w, g.edge_w)


def test_graph_file_rejects_malformed(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("0\t1\n")
    with pytest.raises(ParseError, match=":1"):
        QuestionGraph.load(path)


def test_neighbors_sorted():
    g = QuestionGraph(4, np.array([0, 0, 1]), np.array([2, 3, 2]),
                      np.array([1.0, 2.0, 3.0]))
    ids, w = g.neighbors(2)
    assert list(ids) == [0, 1]
    assert list(w) == [1.0, 3.0]
    ids, w = g.neighbors(1)
    assert list(ids) == [2]
