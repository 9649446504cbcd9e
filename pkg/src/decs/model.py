"""Core value types for weighted graphs and datasets, exact acyclicity
checking, and skeleton extraction.

Edge convention used everywhere in this package: ``weights[i, j] != 0`` means
the directed edge i -> j (variable i is a parent of variable j), so the data
matrix model reads ``X = X W + H B^T + E`` with X (n, p), H (n, q), B (p, q).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .validation import check_data, check_weights


@dataclass(frozen=True)
class WeightedAdjacency:
    """A p x p matrix of edge weights with zero diagonal."""

    weights: np.ndarray

    def __post_init__(self):
        w = check_weights(self.weights, "weights")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def support(self, threshold: float = 0.0) -> np.ndarray:
        """Boolean mask of edges with |weight| strictly above the threshold."""
        return np.abs(self.weights) > threshold

    def edge_count(self, threshold: float = 0.0) -> int:
        return int(self.support(threshold).sum())


@dataclass(frozen=True)
class Dag:
    """A weighted adjacency together with a witnessing topological order."""

    adjacency: WeightedAdjacency
    order: tuple[int, ...]

    def __post_init__(self):
        p = self.adjacency.dim
        order = tuple(int(i) for i in self.order)
        if sorted(order) != list(range(p)):
            raise InvalidInputError("order must be a permutation of 0..p-1")
        position = {node: pos for pos, node in enumerate(order)}
        src, dst = np.nonzero(self.adjacency.support(0.0))
        for i, j in zip(src.tolist(), dst.tolist()):
            if position[i] >= position[j]:
                raise InvalidInputError(f"edge {i}->{j} violates the topological order")
        object.__setattr__(self, "order", order)

    @property
    def dim(self) -> int:
        return self.adjacency.dim


@dataclass(frozen=True)
class Skeleton:
    """An undirected edge set over ``dim`` nodes, pairs stored as (min, max)."""

    dim: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        canonical = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise InvalidInputError(f"skeleton may not contain the self-pair ({a},{a})")
            if not (0 <= a < self.dim and 0 <= b < self.dim):
                raise InvalidInputError(f"pair ({a},{b}) out of range for dim {self.dim}")
            canonical.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(canonical))

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Dataset:
    """An (n, p) observation matrix with optional unique variable names."""

    values: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        values = check_data(self.values, "values")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.names is not None:
            names = tuple(str(n) for n in self.names)
            if len(names) != values.shape[1]:
                raise InvalidInputError(
                    f"got {len(names)} names for {values.shape[1]} columns"
                )
            if len(set(names)) != len(names):
                raise InvalidInputError("variable names must be unique")
            object.__setattr__(self, "names", names)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def as_weight_matrix(w) -> np.ndarray:
    """Accept a WeightedAdjacency or a raw array; return the validated array."""
    if isinstance(w, WeightedAdjacency):
        return w.weights
    return check_weights(w, "w")


def is_acyclic(w, support_threshold: float = 0.0) -> tuple[int, ...] | None:
    """Topological order of the thresholded support, or None if it cycles.

    Edges are pairs (i, j) with ``|weights[i, j]| > support_threshold``.
    Kahn's algorithm with smallest-index tie-breaking, so the returned order
    is deterministic.
    """
    weights = as_weight_matrix(w)
    if support_threshold < 0:
        raise InvalidInputError("support_threshold must be >= 0")
    adj = np.abs(weights) > support_threshold
    p = adj.shape[0]
    indegree = adj.sum(axis=0)
    ready = [i for i in range(p) if indegree[i] == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for child in np.nonzero(adj[node])[0]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(ready, int(child))
    if len(order) != p:
        return None
    return tuple(order)


def skeleton_of(w, threshold: float = 0.0) -> Skeleton:
    """Undirected pairs {i, j} with either direction above the threshold."""
    weights = as_weight_matrix(w)
    if threshold < 0:
        raise InvalidInputError("threshold must be >= 0")
    strong = np.abs(weights) > threshold
    mask = np.triu(strong | strong.T, k=1)
    pairs = frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(mask)))
    return Skeleton(dim=weights.shape[0], edges=pairs)
