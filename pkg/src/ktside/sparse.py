"""Minimal square sparse matrix in coordinate form.

Just enough for adjacency and Laplacian matrices: matrix-vector products,
dense conversion for small instances, and a symmetry check.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ValidationError


class SparseMatrix:
    """Square n x n matrix stored as (row, col, weight) triples."""

    def __init__(self, n: int, rows, cols, weights, symmetric: bool = False):
        self.n = int(n)
        self.rows = np.asarray(rows, dtype=np.intp)
        self.cols = np.asarray(cols, dtype=np.intp)
        self.weights = np.asarray(weights, dtype=np.float64)
        if not (self.rows.shape == self.cols.shape == self.weights.shape):
            raise DimensionError("rows, cols and weights must have equal length")
        if self.rows.size and (
            self.rows.min() < 0 or self.rows.max() >= self.n
            or self.cols.min() < 0 or self.cols.max() >= self.n
        ):
            raise DimensionError(f"index out of range for {self.n}x{self.n} matrix")
        self.symmetric = bool(symmetric)
        if self.symmetric:
            self._check_symmetry()

    def _check_symmetry(self) -> None:
        entries: dict[tuple[int, int], float] = {}
        for i, j, w in zip(self.rows, self.cols, self.weights):
            entries[(int(i), int(j))] = entries.get((int(i), int(j)), 0.0) + float(w)
        for (i, j), w in entries.items():
            if abs(entries.get((j, i), 0.0) - w) > 1e-12:
                raise ValidationError(f"matrix flagged symmetric but ({i},{j}) != ({j},{i})")

    @property
    def nnz(self) -> int:
        return self.rows.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise DimensionError(f"matvec expects shape ({self.n},), got {x.shape}")
        out = np.zeros(self.n)
        np.add.at(out, self.rows, self.weights * x[self.cols])
        return out

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        np.add.at(out, (self.rows, self.cols), self.weights)
        return out

    def __repr__(self) -> str:
        return f"SparseMatrix(n={self.n}, nnz={self.nnz}, symmetric={self.symmetric})"
