"""Reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`CompGraph` is a dynamically recorded computation graph: builder
methods append operation nodes (construction order is a valid topological
order), ``forward`` evaluates and caches values, ``backward`` walks the
record in reverse and accumulates adjoints into the registered parameters.
Graphs are cheap and single-use by design; build a fresh one per sequence.

Values are plain ``np.ndarray`` of dtype float64.  Scalars are 0-d arrays.
Every operation checks its result for NaN/Inf and raises
:class:`~ktside.errors.NumericError` naming the offending node.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from .errors import DimensionError, GraphStateError, NumericError

Array = np.ndarray

# Ops whose output matrix must be kept for the backward rule.
_USES_OUTPUT = {"tanh", "sigmoid"}


class Node:
    """One operation record: id, op name, parent ids, op-specific payload."""

    __slots__ = ("idx", "op", "parents", "aux", "name")

    def __init__(self, idx: int, op: str, parents: tuple[int, ...], aux: Any = None,
                 name: str | None = None):
        self.idx = idx
        self.op = op
        self.parents = parents
        self.aux = aux
        self.name = name

    def __repr__(self) -> str:
        return f"Node({self.idx}, {self.op})"


def _as_f64(values) -> Array:
    arr = np.asarray(values, dtype=np.float64)
    return arr


class CompGraph:
    """Recorded computation graph with lazy evaluation and reverse-mode grads."""

    def __init__(self):
        self._nodes: list[Node] = []
        self._values: list[Array | None] = []
        self._params: dict[str, Array] = {}
        self._input_names: dict[str, int] = {}
        self._bound_inputs: dict[str, Array] = {}
        self._outputs: dict[str, Node] = {}
        self._forwarded = False

    # ------------------------------------------------------------------
    # leaves

    def _new(self, op: str, parents: tuple[Node, ...], aux: Any = None,
             name: str | None = None) -> Node:
        node = Node(len(self._nodes), op, tuple(p.idx for p in parents), aux, name)
        self._nodes.append(node)
        self._values.append(None)
        self._forwarded = False
        return node

    def param(self, name: str, values: Array) -> Node:
        """Register a named parameter tensor.  The array is held by reference,
        so in-place updates between forward passes are honoured."""
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = _as_f64(values)
        self._params[name] = arr
        return self._new("param", (), name=name)

    def input(self, name: str) -> Node:
        """Declare a named input slot, bound at forward time."""
        if name in self._input_names:
            raise ValueError(f"duplicate input name {name!r}")
        node = self._new("input", (), name=name)
        self._input_names[name] = node.idx
        return node

    def constant(self, values: Array) -> Node:
        return self._new("const", (), aux=_as_f64(values))

    # ------------------------------------------------------------------
    # primitives

    def matmul(self, a: Node, b: Node) -> Node:
        return self._new("matmul", (a, b))

    def add(self, a: Node, b: Node) -> Node:
        return self._new("add", (a, b))

    def sub(self, a: Node, b: Node) -> Node:
        return self._new("sub", (a, b))

    def mul(self, a: Node, b: Node) -> Node:
        return self._new("mul", (a, b))

    def smul(self, a: Node, scalar: float) -> Node:
        return self._new("smul", (a,), aux=float(scalar))

    def add_bias(self, m: Node, v: Node) -> Node:
        """Add a length-n vector to every row of a (B, n) matrix."""
        return self._new("add_bias", (m, v))

    def tanh(self, a: Node) -> Node:
        return self._new("tanh", (a,))

    def sigmoid(self, a: Node) -> Node:
        return self._new("sigmoid", (a,))

    def log(self, a: Node) -> Node:
        return self._new("log", (a,))

    def clamp(self, a: Node, lo: float, hi: float) -> Node:
        """Clip values into [lo, hi]; gradient is zero where the clip bites."""
        return self._new("clamp", (a,), aux=(float(lo), float(hi)))

    def concat(self, a: Node, b: Node) -> Node:
        """Concatenate along the last axis (vectors, or matrices row-wise)."""
        return self._new("concat", (a, b))

    def dot(self, a: Node, b: Node) -> Node:
        return self._new("dot", (a, b))

    def sum(self, a: Node) -> Node:
        """Sum of all elements, as a scalar node."""
        return self._new("sum", (a,))

    def rows(self, table: Node, indices) -> Node:
        """Gather rows of a (Q, d) table; backward scatter-adds into the table."""
        idx = np.asarray(indices, dtype=np.intp)
        return self._new("rows", (table,), aux=idx)

    def graph_quad(self, p: Node, edges: tuple[Array, Array, Array],
                   row_weights: Array) -> Node:
        """Weighted sum over rows of the Laplacian quadratic form.

        ``p`` is (B, Q); ``edges`` holds arrays (i, j, w) listing each
        undirected edge once.  Value is sum_b row_weights[b] * (1/2) *
        sum_e w_e * (p[b,i_e] - p[b,j_e])**2, never materialising the dense
        Laplacian.  Backward contributes row_weights[b] * (L p_b).
        """
        ei, ej, w = edges
        aux = (np.asarray(ei, dtype=np.intp), np.asarray(ej, dtype=np.intp),
               _as_f64(w), _as_f64(row_weights))
        return self._new("graph_quad", (p,), aux=aux)

    # ------------------------------------------------------------------
    # evaluation

    def mark_output(self, name: str, node: Node) -> None:
        self._outputs[name] = node

    def value(self, node: Node) -> Array:
        v = self._values[node.idx]
        if v is None:
            raise GraphStateError("graph has not been forwarded")
        return v

    def forward(self, inputs: dict[str, Array] | None = None) -> dict[str, Array]:
        """Evaluate all nodes in topological order; returns the marked outputs.

        ``inputs`` binds the declared input slots; omit it to reuse the
        bindings from the previous forward pass.
        """
        if inputs is not None:
            self._bound_inputs = {k: _as_f64(v) for k, v in inputs.items()}
        missing = set(self._input_names) - set(self._bound_inputs)
        if missing:
            raise GraphStateError(f"unbound inputs: {sorted(missing)}")
        with np.errstate(all="ignore"):  # non-finite results raise NumericError
            for node in self._nodes:
                self._values[node.idx] = self._eval(node)
        self._forwarded = True
        return {name: self._values[n.idx] for name, n in self._outputs.items()}

    def _eval(self, node: Node) -> Array:
        vals = self._values
        op = node.op
        try:
            if op == "param":
                v = self._params[node.name]
            elif op == "input":
                v = self._bound_inputs[node.name]
            elif op == "const":
                v = node.aux
            elif op == "matmul":
                a, b = vals[node.parents[0]], vals[node.parents[1]]
                if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
                    raise DimensionError(
                        f"matmul {a.shape} @ {b.shape} at node {node.idx}")
                v = a @ b
            elif op in ("add", "sub", "mul"):
                a, b = vals[node.parents[0]], vals[node.parents[1]]
                if a.shape != b.shape:
                    raise DimensionError(
                        f"{op} {a.shape} vs {b.shape} at node {node.idx}")
                v = a + b if op == "add" else (a - b if op == "sub" else a * b)
            elif op == "add_bias":
                m, b = vals[node.parents[0]], vals[node.parents[1]]
                if m.ndim != 2 or b.ndim != 1 or m.shape[1] != b.shape[0]:
                    raise DimensionError(
                        f"add_bias {m.shape} + {b.shape} at node {node.idx}")
                v = m + b[None, :]
            elif op == "smul":
                v = vals[node.parents[0]] * node.aux
            elif op == "tanh":
                v = np.tanh(vals[node.parents[0]])
            elif op == "sigmoid":
                x = np.clip(vals[node.parents[0]], -709.0, 709.0)
                v = 1.0 / (1.0 + np.exp(-x))
            elif op == "log":
                v = np.log(vals[node.parents[0]])
            elif op == "clamp":
                lo, hi = node.aux
                v = np.clip(vals[node.parents[0]], lo, hi)
            elif op == "concat":
                a, b = vals[node.parents[0]], vals[node.parents[1]]
                if a.ndim != b.ndim or (a.ndim == 2 and a.shape[0] != b.shape[0]):
                    raise DimensionError(
                        f"concat {a.shape} | {b.shape} at node {node.idx}")
                v = np.concatenate([a, b], axis=-1)
            elif op == "dot":
                a, b = vals[node.parents[0]], vals[node.parents[1]]
                if a.ndim != 1 or a.shape != b.shape:
                    raise DimensionError(
                        f"dot {a.shape} . {b.shape} at node {node.idx}")
                v = np.asarray(a @ b)
            elif op == "sum":
                v = np.asarray(vals[node.parents[0]].sum())
            elif op == "rows":
                table = vals[node.parents[0]]
                idx = node.aux
                if table.ndim != 2:
                    raise DimensionError(f"rows of {table.shape} at node {node.idx}")
                if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
                    raise DimensionError(
                        f"row index out of range for {table.shape} at node {node.idx}")
                v = table[idx]
            elif op == "graph_quad":
                p = vals[node.parents[0]]
                ei, ej, w, rw = node.aux
                if p.ndim != 2 or rw.shape != (p.shape[0],):
                    raise DimensionError(
                        f"graph_quad on {p.shape} with weights {rw.shape} "
                        f"at node {node.idx}")
                diff = p[:, ei] - p[:, ej]
                v = np.asarray(0.5 * float(rw @ ((diff * diff) @ w)))
            else:  # pragma: no cover
                raise ValueError(f"unknown op {op!r}")
        except FloatingPointError as exc:  # pragma: no cover
            raise NumericError(f"numeric failure at node {node.idx} ({op}): {exc}")
        if not np.all(np.isfinite(v)):
            raise NumericError(f"non-finite value at node {node.idx} ({op})")
        return v

    # ------------------------------------------------------------------
    # differentiation

    def backward(self, seed: Node) -> dict[str, Array]:
        """Gradient of the scalar ``seed`` node w.r.t. every parameter.

        Parameters never reached by the backward sweep get zero gradients.
        Accumulation order follows the fixed reverse topological order, so
        results are bit-reproducible.
        """
        if not self._forwarded:
            raise GraphStateError("backward called before forward")
        if self._values[seed.idx].ndim != 0:
            raise DimensionError("backward seed must be a scalar node")
        vals = self._values
        adj: list[Array | None] = [None] * len(self._nodes)
        adj[seed.idx] = np.asarray(1.0)

        def push(idx: int, g: Array) -> None:
            if adj[idx] is None:
                adj[idx] = np.array(g, dtype=np.float64)
            else:
                adj[idx] = adj[idx] + g

        for node in reversed(self._nodes[: seed.idx + 1]):
            g = adj[node.idx]
            if g is None or not node.parents:
                continue
            op = node.op
            pa = node.parents
            if op == "matmul":
                a, b = vals[pa[0]], vals[pa[1]]
                push(pa[0], g @ b.T)
                push(pa[1], a.T @ g)
            elif op == "add":
                push(pa[0], g)
                push(pa[1], g)
            elif op == "sub":
                push(pa[0], g)
                push(pa[1], -g)
            elif op == "mul":
                push(pa[0], g * vals[pa[1]])
                push(pa[1], g * vals[pa[0]])
            elif op == "add_bias":
                push(pa[0], g)
                push(pa[1], g.sum(axis=0))
            elif op == "smul":
                push(pa[0], g * node.aux)
            elif op == "tanh":
                y = vals[node.idx]
                push(pa[0], g * (1.0 - y * y))
            elif op == "sigmoid":
                y = vals[node.idx]
                push(pa[0], g * y * (1.0 - y))
            elif op == "log":
                push(pa[0], g / vals[pa[0]])
            elif op == "clamp":
                lo, hi = node.aux
                x = vals[pa[0]]
                push(pa[0], g * ((x > lo) & (x < hi)))
            elif op == "concat":
                k = vals[pa[0]].shape[-1]
                push(pa[0], g[..., :k])
                push(pa[1], g[..., k:])
            elif op == "dot":
                push(pa[0], g * vals[pa[1]])
                push(pa[1], g * vals[pa[0]])
            elif op == "sum":
                push(pa[0], np.full_like(vals[pa[0]], float(g)))
            elif op == "rows":
                table = vals[pa[0]]
                grad = np.zeros_like(table)
                np.add.at(grad, node.aux, g)
                push(pa[0], grad)
            elif op == "graph_quad":
                p = vals[pa[0]]
                ei, ej, w, rw = node.aux
                diff = p[:, ei] - p[:, ej]
                contrib = float(g) * (rw[:, None] * (diff * w[None, :]))
                grad_t = np.zeros((p.shape[1], p.shape[0]))
                np.add.at(grad_t, ei, contrib.T)
                np.add.at(grad_t, ej, -contrib.T)
                push(pa[0], grad_t.T)

        grads: dict[str, Array] = {}
        for node in self._nodes:
            if node.op == "param":
                g = adj[node.idx]
                grads[node.name] = (np.zeros_like(self._params[node.name])
                                    if g is None else g)
        return grads

    @property
    def params(self) -> dict[str, Array]:
        return self._params


def grad_check(graph: CompGraph, seed: Node, h: float = 1e-5) -> dict[str, float]:
    """Compare backward gradients against central finite differences.

    Perturbs every parameter entry in place by +-h, re-running the forward
    pass each time, and reports the max relative error per parameter:
    |g_a - g_n| / max(|g_a|, |g_n|, 1e-8).  Parameter values are restored
    exactly on return.
    """
    graph.forward()
    analytic = graph.backward(seed)

    def reval() -> float:
        graph.forward()
        return float(graph.value(seed))

    report: dict[str, float] = {}
    for name, arr in graph.params.items():
        worst = 0.0
        flat = arr.reshape(-1)
        g_flat = analytic[name].reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            f_plus = reval()
            flat[k] = orig - h
            f_minus = reval()
            flat[k] = orig
            g_num = (f_plus - f_minus) / (2.0 * h)
            g_ana = g_flat[k]
            err = abs(g_ana - g_num) / max(abs(g_ana), abs(g_num), 1e-8)
            worst = max(worst, err)
        report[name] = worst
    graph.forward()
    return report
