import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqarls.network import (
    Topology,
    TopologyError,
    adaptation_weights,
    metropolis_weights,
    random_geometric,
    ring,
)


def metropolis_by_hand(adj):
    n = adj.shape[0]
    size = [sum(adj[:, k]) for k in range(n)]
    A = np.zeros((n, n))
    for k in range(n):
        for l in range(n):
            if l != k and adj[l, k]:
                A[l, k] = 1.0 / max(size[k], size[l])
        A[k, k] = 1.0 - A[:, k].sum()
    return A


def test_two_nodes_at_max_radius():
    topo = random_geometric(2, math.sqrt(2), seed=0)
    assert topo.adjacency.all()
    np.testing.assert_allclose(metropolis_weights(topo), [[0.5, 0.5], [0.5, 0.5]])


def test_default_network_is_connected():
    topo = random_geometric(20, 0.35, seed=7)
    assert topo.is_connected()
    assert np.array_equal(topo.adjacency, topo.adjacency.T)
    assert topo.adjacency.diagonal().all()
    assert 1 <= topo.degrees.mean() < 19


def test_deterministic():
    a = random_geometric(20, 0.35, seed=7)
    b = random_geometric(20, 0.35, seed=7)
    np.testing.assert_array_equal(a.adjacency, b.adjacency)
    np.testing.assert_array_equal(a.positions, b.positions)


def test_unreachable_connectivity():
    with pytest.raises(TopologyError, match="larger radius"):
        random_geometric(50, 0.01, seed=0)
    with pytest.raises(ValueError):
        random_geometric(1, 0.5, seed=0)
    with pytest.raises(ValueError):
        random_geometric(5, 2.0, seed=0)


def test_topology_validation():
    with pytest.raises(ValueError):
        Topology(np.zeros((2, 2)), np.array([[True, True], [False, True]]))
    with pytest.raises(ValueError):
        Topology(np.zeros((2, 2)), np.array([[False, True], [True, True]]))


def test_ring_metropolis():
    A = metropolis_weights(ring(4))
    third = 1 / 3
    expected = np.array([[third, third, 0, third], [third, third, third, 0],
                         [0, third, third, third], [third, 0, third, third]])
    np.testing.assert_allclose(A, expected)
    np.testing.assert_allclose(A, A.T)
    np.testing.assert_allclose(A.sum(axis=1), 1)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 25), seed=st.integers(0, 10_000))
def test_weight_invariants(n, seed):
    topo = random_geometric(n, 0.6, seed)
    A = metropolis_weights(topo)
    np.testing.assert_allclose(A, metropolis_by_hand(topo.adjacency), atol=1e-15)
    np.testing.assert_allclose(A.sum(axis=0), 1.0, atol=1e-12)
    for mode in ("uniform", "metropolis", "identity"):
        C = adaptation_weights(topo, mode)
        assert np.all(C[~topo.adjacency] == 0)
        assert np.all(C >= 0)
        if mode != "identity":
            assert np.all(C[topo.adjacency] > 0)
    np.testing.assert_array_equal(A != 0, topo.adjacency)


def test_adaptation_modes():
    topo = ring(4)
    np.testing.assert_array_equal(adaptation_weights(topo, "identity"), np.eye(4))
    C = adaptation_weights(topo, "uniform")
    for k in range(4):
        col = C[:, k]
        np.testing.assert_allclose(np.sort(col[col > 0]), [1 / 3] * 3)
    np.testing.assert_array_equal(adaptation_weights(topo, "metropolis"), metropolis_weights(topo))
    with pytest.raises(ValueError):
        adaptation_weights(topo, "bogus")


def test_export_text():
    text = ring(3).export_text()
    head, edges = text.strip().split("\n\n")
    assert head.splitlines()[0] == "node, x, y"
    assert len(head.splitlines()) == 4
    assert edges.splitlines() == ["edge_from, edge_to", "0, 1", "0, 2", "1, 2"]
