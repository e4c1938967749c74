"""Diffusion network topology and its combination/adaptation weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

MAX_ATTEMPTS = 1000
ADAPTATION_MODES = ("uniform", "metropolis", "identity")


class TopologyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Topology:
    """Undirected graph with self-loops; ``adjacency[l, k]`` means l is in the neighborhood of k."""

    positions: np.ndarray
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        pos = np.asarray(self.positions, dtype=float)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if pos.shape != (adj.shape[0], 2):
            raise ValueError("positions must be an (N, 2) array")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if not adj.diagonal().all():
            raise ValueError("every node must be its own neighbor")
        adj.setflags(write=False)
        pos.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "positions", pos)

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """Neighbor counts excluding the node itself."""
        return self.adjacency.sum(axis=0) - 1

    def neighbors(self, k: int) -> np.ndarray:
        """Neighborhood of ``k`` (self included), ascending."""
        return np.flatnonzero(self.adjacency[:, k])

    def is_connected(self) -> bool:
        n_comp, _ = connected_components(self.adjacency, directed=False)
        return n_comp == 1

    def edges(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(rows.tolist(), cols.tolist()))

    def export_text(self) -> str:
        """Node coordinates followed by the edge list, as two comma-separated blocks."""
        lines = ["node, x, y"]
        lines += [f"{k}, {x:.6f}, {y:.6f}" for k, (x, y) in enumerate(self.positions)]
        lines += ["", "edge_from, edge_to"]
        lines += [f"{a}, {b}" for a, b in self.edges()]
        return "\n".join(lines) + "\n"


def random_geometric(node_count: int, radius: float, seed) -> Topology:
    """Connected random geometric graph on the unit square.

    Positions are redrawn from the same generator until the graph is connected.
    """
    if node_count < 2:
        raise ValueError("node_count must be at least 2")
    if not 0 < radius <= np.sqrt(2.0):
        raise ValueError("radius must be in (0, sqrt(2)]")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_ATTEMPTS):
        positions = rng.uniform(size=(node_count, 2))
        dist = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
        topology = Topology(positions, dist <= radius)
        if topology.is_connected():
            return topology
    raise TopologyError(
        f"no connected graph with {node_count} nodes and radius {radius} in "
        f"{MAX_ATTEMPTS} attempts; use a larger radius"
    )


def metropolis_weights(topology: Topology) -> np.ndarray:
    """Combination matrix ``A`` with ``a_lk = 1/max(n_k, n_l)`` off the diagonal.

    ``n_k`` is the neighborhood size including the node itself, which keeps
    every self-weight ``a_kk`` strictly positive.
    """
    adj = topology.adjacency
    size = adj.sum(axis=0)
    off = adj & ~np.eye(topology.node_count, dtype=bool)
    A = np.where(off, 1.0 / np.maximum(size[:, None], size[None, :]), 0.0)
    A[np.diag_indices_from(A)] = 1.0 - A.sum(axis=0)
    return A


def adaptation_weights(topology: Topology, mode: str = "uniform") -> np.ndarray:
    """Adaptation matrix ``C``; column k weights the data node k takes from each neighbor."""
    if mode == "uniform":
        adj = topology.adjacency.astype(float)
        return adj / adj.sum(axis=0, keepdims=True)
    if mode == "metropolis":
        return metropolis_weights(topology)
    if mode == "identity":
        return np.eye(topology.node_count)
    raise ValueError(f"unknown adaptation mode {mode!r}; expected one of {ADAPTATION_MODES}")


def ring(node_count: int) -> Topology:
    """Cycle graph with nodes evenly spaced on a circle (handy for tests)."""
    adj = np.eye(node_count, dtype=bool)
    for k in range(node_count):
        adj[k, (k + 1) % node_count] = adj[(k + 1) % node_count, k] = True
    angle = 2 * np.pi * np.arange(node_count) / node_count
    positions = 0.5 + 0.4 * np.column_stack([np.cos(angle), np.sin(angle)])
    return Topology(positions, adj)
