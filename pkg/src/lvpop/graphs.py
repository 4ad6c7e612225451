"""Undirected interaction graphs stored as edge lists plus CSR adjacency."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidGraph


class Graph:
    """A connected, simple, undirected graph on nodes ``0..n_nodes-1``.

    ``require_connected=False`` admits disconnected graphs, for inspecting
    states (e.g. absorption) rather than simulating on them.

    The scheduler samples edges uniformly, so the edge list is the primary
    representation; ``indptr``/``indices`` give neighbour lookups.
    """

    def __init__(self, n_nodes: int, edges, *, name: str = "custom",
                 require_connected: bool = True):
        n_nodes = int(n_nodes)
        if n_nodes < 2:
            raise InvalidGraph(f"graph needs at least 2 nodes, got {n_nodes}")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.shape[0] == 0:
            raise InvalidGraph("graph has no edges")
        if e.min() < 0 or e.max() >= n_nodes:
            raise InvalidGraph("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise InvalidGraph("self-loops are not allowed")
        canon = np.sort(e, axis=1)
        if len(np.unique(canon, axis=0)) != len(canon):
            raise InvalidGraph("duplicate edges are not allowed")

        adj = csr_matrix(
            (np.ones(2 * len(e), dtype=np.int8),
             (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
            shape=(n_nodes, n_nodes),
        )
        n_comp, _ = connected_components(adj, directed=False)
        if require_connected and n_comp != 1:
            raise InvalidGraph(f"graph is not connected ({n_comp} components)")

        adj.sort_indices()
        self.n_nodes = n_nodes
        self.edges = e
        self.indptr = adj.indptr.astype(np.int64)
        self.indices = adj.indices.astype(np.int64)
        self.name = name
        for arr in (self.edges, self.indptr, self.indices):
            arr.setflags(write=False)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @classmethod
    def complete(cls, n: int) -> "Graph":
        iu, ju = np.triu_indices(n, k=1)
        return cls(n, np.column_stack([iu, ju]), name="complete")

    @classmethod
    def star(cls, n_leaves: int) -> "Graph":
        """K_{1,n}: node 0 is the hub, nodes 1..n are leaves."""
        leaves = np.arange(1, n_leaves + 1)
        return cls(n_leaves + 1, np.column_stack([np.zeros_like(leaves), leaves]), name="star")

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        try:
            n = d["n"]
            edges = d["edges"]
        except (KeyError, TypeError) as exc:
            raise InvalidGraph(f"graph JSON needs 'n' and 'edges': {exc}") from None
        return cls(n, edges, name=d.get("name", "custom"))

    def to_dict(self) -> dict:
        return {"n": self.n_nodes, "edges": self.edges.tolist()}

    @classmethod
    def load(cls, path: str | Path) -> "Graph":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def __repr__(self) -> str:
        return f"Graph({self.name}, n_nodes={self.n_nodes}, n_edges={self.n_edges})"
