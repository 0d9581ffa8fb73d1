"""The circulant two-out graph behind the graph-based protocol.

Nodes are q_0 .. q_{2n-1}. Node i has a short edge to i+1 and a long edge to
i+2 (mod 2n). A uniformly random challenge moves the walker along either edge
with probability 1/2, so the one-step transition matrix is A/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .bitcore import BitString
from .errors import InvalidParameterError, LayoutError, ResourceLimitError

EXACT_MAX_N = 8
EXACT_MAX_STEPS = 32


@dataclass(frozen=True)
class GraphTopology:
    n: int

    @property
    def node_count(self) -> int:
        return 2 * self.n

    def short_edge(self, i: int) -> tuple[int, int]:
        return i, (i + 1) % self.node_count

    def long_edge(self, i: int) -> tuple[int, int]:
        return i, (i + 2) % self.node_count

    def edges(self) -> list[tuple[str, int, int]]:
        out = [("s", *self.short_edge(i)) for i in range(self.node_count)]
        out += [("l", *self.long_edge(i)) for i in range(self.node_count)]
        return out

    def adjacency(self) -> np.ndarray:
        """Integer adjacency matrix; the n=1 self-loops count once each."""
        size = self.node_count
        a = np.zeros((size, size), dtype=np.int64)
        for _, src, dst in self.edges():
            a[src, dst] += 1
        return a


@dataclass(frozen=True)
class LabeledGraph:
    topology: GraphTopology
    node_values: tuple[int, ...]
    short_labels: tuple[int, ...]

    @property
    def n(self) -> int:
        return self.topology.n

    @property
    def long_labels(self) -> tuple[int, ...]:
        return tuple(s ^ 1 for s in self.short_labels)

    def step(self, node: int, challenge: int) -> int:
        size = self.topology.node_count
        if self.short_labels[node] == challenge:
            return (node + 1) % size
        return (node + 2) % size


def build_topology(n: int) -> GraphTopology:
    if n < 1:
        raise InvalidParameterError(f"round count must be >= 1, got {n}")
    return GraphTopology(n)


def label_graph(topo: GraphTopology, material: BitString) -> LabeledGraph:
    size = topo.node_count
    if len(material) != 2 * size:
        raise LayoutError(f"graph with n={topo.n} needs {2 * size} bits, got {len(material)}")
    return LabeledGraph(topo, material.bits[:size], material.bits[size:])


def walk(g: LabeledGraph, challenges: Sequence[int]) -> list[int]:
    """Nodes visited after each challenge, starting from q_0 (not included)."""
    node, path = 0, []
    for c in challenges:
        node = g.step(node, c)
        path.append(node)
    return path


def head_node(g: LabeledGraph, challenges: Sequence[int]) -> tuple[int, int]:
    """Node reached after the challenge prefix and its bit value.

    The edge consulted at each step is the short edge leaving the current
    node: follow it when its label equals the challenge, otherwise take the
    long edge.
    """
    challenges = list(challenges)
    if not 1 <= len(challenges) <= g.n:
        raise InvalidParameterError(f"need between 1 and {g.n} challenges, got {len(challenges)}")
    node = walk(g, challenges)[-1]
    return node, g.node_values[node]


class WalkPowers:
    """Cache of M^0 .. M^n for M = A/2, built once and read-only afterwards."""

    def __init__(self, topo: GraphTopology):
        self.topology = topo
        m = topo.adjacency() / 2.0
        powers = [np.eye(topo.node_count)]
        for _ in range(topo.n):
            powers.append(powers[-1] @ m)
        for p in powers:
            p.setflags(write=False)
        m.setflags(write=False)
        self.matrix = m
        self._powers = tuple(powers)

    def __getitem__(self, steps: int) -> np.ndarray:
        if steps < 0:
            raise InvalidParameterError("steps must be >= 0")
        if steps < len(self._powers):
            return self._powers[steps]
        return np.linalg.matrix_power(self.matrix, steps)


@lru_cache(maxsize=512)
def walk_powers(n: int) -> WalkPowers:
    return WalkPowers(build_topology(n))


def walk_matrix(topo: GraphTopology) -> np.ndarray:
    return walk_powers(topo.n).matrix


def walk_probability(topo: GraphTopology, steps: int, src: int, dst: int) -> float:
    size = topo.node_count
    if not (0 <= src < size and 0 <= dst < size):
        raise InvalidParameterError(f"node index out of range for {size} nodes")
    if steps < 0:
        raise InvalidParameterError("steps must be >= 0")
    return float(walk_powers(topo.n)[steps][src, dst])


def walk_counts_exact(topo: GraphTopology, steps: int) -> list[list[int]]:
    """A^steps with Python integers; the reference for the float path."""
    if topo.n > EXACT_MAX_N or steps > EXACT_MAX_STEPS:
        raise ResourceLimitError(
            f"exact walk counts limited to n <= {EXACT_MAX_N}, steps <= {EXACT_MAX_STEPS}"
        )
    a = topo.adjacency().tolist()
    size = topo.node_count
    result = [[int(r == c) for c in range(size)] for r in range(size)]
    for _ in range(steps):
        result = [[sum(row[k] * a[k][c] for k in range(size)) for c in range(size)] for row in result]
    return result


def walk_probability_exact(topo: GraphTopology, steps: int, src: int, dst: int) -> Fraction:
    return Fraction(walk_counts_exact(topo, steps)[src][dst], 2**steps)


def rotation_check(topo: GraphTopology, y: int, x: int, k: int, z: int) -> bool:
    size = topo.node_count
    p = walk_powers(topo.n)[y]
    return bool(abs(p[x % size, k % size] - p[(x - z) % size, (k - z) % size]) <= 1e-12)
