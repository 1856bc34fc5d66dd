"""Structure descriptions: groupings, graphs and the weight-class spec."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidInputError


class Variant(str, enum.Enum):
    """Weight class in force.

    The two ordered variants share the nondecreasing class and differ only in
    how a member is picked (step function vs. constrained likelihood).
    ``TV_SPARSE`` exists for the complexity bounds only; no estimator fits it.
    """

    ORDERED_STEP = "ordered-step"
    ORDERED_MLE = "ordered-mle"
    GROUPED = "grouped"
    TV_L1 = "tv-l1"
    TV_SPARSE = "tv-sparse"
    CONSTANT = "constant"
    SIGN_SPLIT = "sign-split"

    @property
    def family(self):
        if self in (Variant.ORDERED_STEP, Variant.ORDERED_MLE):
            return "ordered"
        if self in (Variant.GROUPED, Variant.CONSTANT, Variant.SIGN_SPLIT):
            return "grouped"
        return "tv"


@dataclass(frozen=True)
class Grouping:
    """Assignment of each hypothesis to a group.

    ``labels`` holds one integer group id per index; ids are names, not
    positions.  ``codes`` maps them to ``0..d-1`` in sorted-id order.
    """

    labels: np.ndarray
    group_ids: np.ndarray = field(init=False, repr=False)
    codes: np.ndarray = field(init=False, repr=False)
    sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size == 0:
            raise InvalidInputError("grouping needs one label per index (n >= 1)")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.isfinite(labels)) or np.any(labels != np.round(labels)):
                raise InvalidInputError("group labels must be integers")
            labels = labels.astype(np.int64)
        ids, codes, sizes = np.unique(labels, return_inverse=True, return_counts=True)
        object.__setattr__(self, "labels", labels.astype(np.int64))
        object.__setattr__(self, "group_ids", ids)
        object.__setattr__(self, "codes", codes.astype(np.int64).ravel())
        object.__setattr__(self, "sizes", sizes.astype(np.int64))

    @property
    def n(self):
        return self.labels.size

    @property
    def n_groups(self):
        return self.group_ids.size

    @classmethod
    def single(cls, n):
        return cls(np.ones(n, dtype=np.int64))

    def members(self, k):
        """Indices belonging to the ``k``-th group (by code)."""
        return np.flatnonzero(self.codes == k)


@dataclass(frozen=True)
class Graph:
    """Connected undirected graph on nodes ``0..n_nodes-1``."""

    n_nodes: int
    edges: np.ndarray

    def __post_init__(self):
        n = int(self.n_nodes)
        if n < 1:
            raise InvalidInputError("graph needs at least one node")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise InvalidInputError(f"edge endpoint outside 0..{n - 1}")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise InvalidInputError("graph has a self-loop")
        key = np.sort(edges, axis=1)
        if np.unique(key, axis=0).shape[0] != key.shape[0]:
            raise InvalidInputError("graph has a duplicate edge")
        adj = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
        n_comp, _ = connected_components(adj, directed=False)
        if n_comp != 1:
            raise InvalidInputError(f"graph is not connected ({n_comp} components)")
        object.__setattr__(self, "n_nodes", n)
        object.__setattr__(self, "edges", edges)

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def src(self):
        return np.ascontiguousarray(self.edges[:, 0])

    @property
    def dst(self):
        return np.ascontiguousarray(self.edges[:, 1])

    def incidence(self):
        """Dense edge-by-node incidence matrix, +1 at the first endpoint."""
        D = np.zeros((self.n_edges, self.n_nodes))
        rows = np.arange(self.n_edges)
        D[rows, self.edges[:, 0]] = 1.0
        D[rows, self.edges[:, 1]] = -1.0
        return D

    def total_variation(self, q):
        q = np.asarray(q, dtype=float)
        return float(np.abs(q[self.src] - q[self.dst]).sum())

    @classmethod
    def chain(cls, n):
        i = np.arange(n - 1)
        return cls(n, np.column_stack([i, i + 1]))

    @classmethod
    def grid(cls, rows, cols=None):
        """4-neighbour lattice, nodes numbered row-major."""
        cols = rows if cols is None else cols
        idx = np.arange(rows * cols).reshape(rows, cols)
        horiz = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
        vert = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
        return cls(rows * cols, np.vstack([horiz, vert]))

    @classmethod
    def complete(cls, n):
        i, j = np.triu_indices(n, k=1)
        return cls(n, np.column_stack([i, j]))

    @classmethod
    def star(cls, leaves):
        j = np.arange(1, leaves + 1)
        return cls(leaves + 1, np.column_stack([np.zeros_like(j), j]))


@dataclass(frozen=True)
class StructureSpec:
    variant: Variant
    epsilon: float = 0.1
    grouping: Optional[Grouping] = None
    graph: Optional[Graph] = None
    m: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 0.0 < self.epsilon <= 1.0:
            raise InvalidInputError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        v = self.variant
        if v in (Variant.GROUPED, Variant.SIGN_SPLIT) and self.grouping is None:
            raise InvalidInputError(f"{v.value} structure requires a grouping")
        if v in (Variant.TV_L1, Variant.TV_SPARSE):
            if self.graph is None:
                raise InvalidInputError(f"{v.value} structure requires a graph")
            if self.m is None or not np.isfinite(self.m) or self.m < 0:
                raise InvalidInputError(f"{v.value} structure requires m >= 0, got {self.m}")

    def check_size(self, n):
        if self.grouping is not None and self.grouping.n != n:
            raise InvalidInputError(f"grouping covers {self.grouping.n} indices, expected {n}")
        if self.graph is not None and self.graph.n_nodes != n:
            raise InvalidInputError(f"graph has {self.graph.n_nodes} nodes, expected {n}")
