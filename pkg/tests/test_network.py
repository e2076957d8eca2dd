"""Graph generation and Metropolis mixing matrix tests."""

import numpy as np
import pytest

from dgdtrack import (
    ParameterError,
    generate_rgg,
    graph_at_radius,
    graph_from_positions,
    graph_to_csv,
    max_stable_step,
    metropolis_mixing,
    mixing_to_csv,
)


def bfs_component_count(n, edges):
    """Independent connectivity oracle for the tests."""
    adj = {i: set() for i in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    seen, comps = set(), 0
    for s in range(n):
        if s in seen:
            continue
        comps += 1
        stack = [s]
        seen.add(s)
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
    return comps


class TestGraphGeneration:
    def test_single_agent_graph_is_connected_and_edgeless(self):
        g = generate_rgg(1, 0.3, 1.1, np.random.default_rng(0))
        assert g.n_agents == 1
        assert g.edges == ()
        assert g.is_connected

    def test_radius_growth_two_nodes(self):
        # distance 0.3, start 0.1, factor 2: smallest k with 0.1 * 2**k >= 0.3 is 2
        positions = np.array([[0.0, 0.0], [0.3, 0.0]])
        g = graph_from_positions(positions, 0.1, 2.0)
        assert g.radius_used == pytest.approx(0.4)
        assert g.edges == ((0, 1),)

    def test_rgg_connected_by_bfs_oracle(self):
        g = generate_rgg(30, 0.35, 1.1, np.random.default_rng(7))
        assert bfs_component_count(g.n_agents, g.edges) == 1

    def test_determinism(self):
        a = generate_rgg(12, 0.3, 1.1, np.random.default_rng(123))
        b = generate_rgg(12, 0.3, 1.1, np.random.default_rng(123))
        assert np.array_equal(a.positions, b.positions)
        assert a.edges == b.edges
        assert a.radius_used == b.radius_used

    def test_positions_inside_unit_disk(self):
        g = generate_rgg(200, 0.2, 1.1, np.random.default_rng(5))
        assert np.all(np.linalg.norm(g.positions, axis=1) <= 1.0 + 1e-12)

    def test_edges_match_distance_threshold(self):
        g = generate_rgg(25, 0.3, 1.1, np.random.default_rng(11))
        dist = np.linalg.norm(g.positions[:, None] - g.positions[None, :], axis=-1)
        edge_set = set(g.edges)
        for i in range(25):
            for j in range(i + 1, 25):
                assert ((i, j) in edge_set) == (dist[i, j] <= g.radius_used)

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
    def test_bad_radius_rejected(self, bad):
        with pytest.raises(ParameterError):
            generate_rgg(5, bad, 1.1, np.random.default_rng(0))

    def test_bad_growth_factor_rejected(self):
        with pytest.raises(ParameterError):
            graph_from_positions(np.zeros((2, 2)), 0.1, 1.0)


class TestMetropolisMixing:
    def test_two_node_complete_graph(self):
        # hand eigendecomposition: M = [[1/2, 1/2], [1/2, 1/2]] has spectrum {1, 0}
        g = graph_at_radius(np.array([[0.0, 0.0], [0.3, 0.0]]), 0.4)
        mix = metropolis_mixing(g)
        assert np.allclose(mix.entries, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
        assert mix.lambda2 == pytest.approx(0.0, abs=1e-12)
        assert mix.topology_factor == pytest.approx(1.0, abs=1e-12)

    def test_path_graph_three_nodes(self):
        # degrees (1, 2, 1): off-diagonals 1/3, diagonal (2/3, 1/3, 2/3)
        positions = np.array([[0.0, 0.0], [0.3, 0.0], [0.6, 0.0]])
        g = graph_at_radius(positions, 0.35)
        assert g.edges == ((0, 1), (1, 2))
        mix = metropolis_mixing(g)
        expected = np.array([
            [2 / 3, 1 / 3, 0.0],
            [1 / 3, 1 / 3, 1 / 3],
            [0.0, 1 / 3, 2 / 3],
        ])
        assert np.allclose(mix.entries, expected, atol=1e-15)
        assert np.allclose(mix.entries.sum(axis=1), 1.0, atol=1e-15)

    def test_single_node_identity(self):
        g = generate_rgg(1, 0.3, 1.1, np.random.default_rng(0))
        mix = metropolis_mixing(g)
        assert mix.entries.shape == (1, 1)
        assert mix.entries[0, 0] == 1.0
        assert mix.spectrum[0] == pytest.approx(1.0)
        assert mix.lambdaN == pytest.approx(1.0)
        assert np.isinf(mix.topology_factor)

    def test_disconnected_graph_rejected(self):
        g = graph_at_radius(np.array([[0.0, 0.0], [0.9, 0.0]]), 0.1)
        assert not g.is_connected
        with pytest.raises(ParameterError):
            metropolis_mixing(g)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_invariants_across_random_graphs(self, seed):
        g = generate_rgg(20, 0.3, 1.1, np.random.default_rng(seed))
        mix = metropolis_mixing(g)
        m = mix.entries
        assert np.max(np.abs(m - m.T)) <= 1e-12
        assert np.max(np.abs(m.sum(axis=1) - 1.0)) <= 1e-12
        assert np.max(np.abs(m.sum(axis=0) - 1.0)) <= 1e-12
        assert abs(mix.spectrum[0] - 1.0) <= 1e-10
        assert mix.lambda2 < 1.0
        assert mix.lambdaN > -1.0
        assert mix.topology_factor >= 1.0
        edge_set = set(g.edges)
        for i in range(20):
            for j in range(i + 1, 20):
                if (i, j) not in edge_set:
                    assert m[i, j] == 0.0

    def test_spectrum_matches_numpy_eigvalsh(self):
        g = generate_rgg(15, 0.35, 1.1, np.random.default_rng(9))
        mix = metropolis_mixing(g)
        expected = np.sort(np.linalg.eigvalsh(mix.entries))[::-1]
        assert np.allclose(mix.spectrum, expected, atol=1e-12)


class TestMaxStableStep:
    def test_single_node(self):
        g = generate_rgg(1, 0.3, 1.1, np.random.default_rng(0))
        mix = metropolis_mixing(g)
        assert max_stable_step(mix, 0.01, 0.1) == pytest.approx(2.0 / 0.11)

    def test_symmetric_arithmetic(self):
        # two-node complete graph has lambdaN = 0
        g = graph_at_radius(np.array([[0.0, 0.0], [0.3, 0.0]]), 0.4)
        mix = metropolis_mixing(g)
        assert max_stable_step(mix, 1.0, 1.0) == pytest.approx(0.5)

    def test_paper_step_admissible(self):
        # (1 + lambdaN) / 0.11 >= 0.05 whenever lambdaN > -0.9945
        for seed in range(5):
            g = generate_rgg(30, 0.35, 1.1, np.random.default_rng(seed))
            mix = metropolis_mixing(g)
            assert mix.lambdaN > -0.9945
            assert max_stable_step(mix, 0.01, 0.1) >= 0.05

    def test_bad_moduli_rejected(self):
        g = graph_at_radius(np.array([[0.0, 0.0], [0.3, 0.0]]), 0.4)
        mix = metropolis_mixing(g)
        with pytest.raises(ParameterError):
            max_stable_step(mix, 0.0, 1.0)
        with pytest.raises(ParameterError):
            max_stable_step(mix, 2.0, 1.0)


def test_csv_exports(tmp_path):
    g = generate_rgg(10, 0.4, 1.1, np.random.default_rng(3))
    mix = metropolis_mixing(g)
    graph_to_csv(g, tmp_path / "edges.csv")
    mixing_to_csv(mix, tmp_path / "mixing.csv")

    lines = (tmp_path / "edges.csv").read_text().strip().splitlines()
    assert lines[0] == "i,j"
    parsed = tuple(tuple(int(x) for x in ln.split(",")) for ln in lines[1:])
    assert parsed == g.edges

    rows = (tmp_path / "mixing.csv").read_text().strip().splitlines()
    loaded = np.array([[float(v) for v in row.split(",")] for row in rows])
    assert np.array_equal(loaded, mix.entries)  # 17 digits round-trips float64
