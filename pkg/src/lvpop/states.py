"""System states: aggregate counts on K_n, per-agent graph states, star quadruples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyPopulation, InvalidGraph
from .graphs import Graph


def _as_counts(values) -> tuple[int, ...]:
    out = []
    for v in values:
        iv = int(v)
        if iv != v or iv < 0:
            raise ValueError(f"counts must be non-negative integers, got {v!r}")
        out.append(iv)
    return tuple(out)


@dataclass(frozen=True)
class AggregateState:
    """Species counts on the complete graph; ``step`` counts raw scheduler steps."""

    counts: tuple[int, ...]
    step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "counts", _as_counts(self.counts))
        object.__setattr__(self, "step", int(self.step))

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def k(self) -> int:
        return len(self.counts)

    @property
    def fractions(self) -> np.ndarray:
        n = self.n
        if n == 0:
            raise EmptyPopulation("population is empty")
        return np.asarray(self.counts, dtype=float) / n

    @property
    def alive(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.counts) if c > 0)

    @classmethod
    def from_fractions(cls, fractions, n: int) -> "AggregateState":
        """Round ``fractions * n`` to integers summing to ``n`` (largest remainder)."""
        f = np.asarray(fractions, dtype=float)
        if np.any(f < 0) or f.sum() <= 0:
            raise ValueError("fractions must be non-negative with positive sum")
        raw = f / f.sum() * n
        base = np.floor(raw).astype(np.int64)
        short = int(n - base.sum())
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
        return cls(tuple(int(c) for c in base))


@dataclass(frozen=True, eq=False)
class GraphState:
    """Per-agent species on an interaction graph."""

    graph: Graph
    species: np.ndarray
    k: int
    step: int = 0

    def __post_init__(self):
        s = np.array(self.species, dtype=np.int64)
        if s.shape != (self.graph.n_nodes,):
            raise InvalidGraph(
                f"species array has shape {s.shape}, graph has {self.graph.n_nodes} nodes")
        if s.min() < 0 or s.max() >= self.k:
            raise ValueError("species index out of range")
        s.setflags(write=False)
        object.__setattr__(self, "species", s)
        object.__setattr__(self, "step", int(self.step))

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(int(c) for c in np.bincount(self.species, minlength=self.k))

    @property
    def n(self) -> int:
        return self.graph.n_nodes

    @classmethod
    def from_counts(cls, graph: Graph, counts, rng=None, *, step: int = 0) -> "GraphState":
        """Assign species to nodes; shuffled when ``rng`` is given, else in blocks."""
        counts = _as_counts(counts)
        if sum(counts) != graph.n_nodes:
            raise ValueError(f"counts sum to {sum(counts)}, graph has {graph.n_nodes} nodes")
        species = np.repeat(np.arange(len(counts)), counts)
        if rng is not None:
            rng.shuffle(species)
        return cls(graph, species, len(counts), step)


@dataclass(frozen=True)
class StarState:
    """RPS on K_{1,n}: hub species plus leaf counts (the hub is not counted)."""

    center: int
    leaf_counts: tuple[int, ...]
    step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "leaf_counts", _as_counts(self.leaf_counts))
        object.__setattr__(self, "center", int(self.center))
        object.__setattr__(self, "step", int(self.step))
        if not 0 <= self.center < len(self.leaf_counts):
            raise ValueError("center species out of range")

    @property
    def n(self) -> int:
        return sum(self.leaf_counts)

    @property
    def k(self) -> int:
        return len(self.leaf_counts)

    @property
    def counts(self) -> tuple[int, ...]:
        """Counts over all n+1 vertices, hub included."""
        c = list(self.leaf_counts)
        c[self.center] += 1
        return tuple(c)

    def to_graph_state(self) -> GraphState:
        """Explicit K_{1,n} with node 0 as hub and leaves in species blocks."""
        g = Graph.star(self.n)
        species = np.concatenate([[self.center],
                                  np.repeat(np.arange(self.k), self.leaf_counts)])
        return GraphState(g, species, self.k, self.step)
