import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sangernet.errors import DisconnectedGraphError, InvalidGraphError
from sangernet.topology import (
    Graph,
    beta,
    complete,
    cycle,
    erdos_renyi,
    is_connected,
    load_edge_list,
    metropolis_weights,
    save_edge_list,
    star,
)


class TestGraph:
    def test_canonical_edges(self):
        g = Graph(3, frozenset({(2, 0), (0, 2), (1, 2)}))
        assert g.edges == frozenset({(0, 2), (1, 2)})

    def test_rejects_self_loop(self):
        with pytest.raises(InvalidGraphError):
            Graph(2, frozenset({(1, 1)}))

    def test_rejects_out_of_range(self):
        with pytest.raises(InvalidGraphError):
            Graph(2, frozenset({(0, 2)}))

    def test_neighbors_and_degree(self):
        g = star(4)
        assert g.neighbors(0) == [1, 2, 3]
        assert g.degree(0) == 3
        assert g.degree(2) == 1

    def test_generators(self):
        assert len(cycle(5).edges) == 5
        assert len(star(5).edges) == 4
        assert len(complete(5).edges) == 10
        with pytest.raises(InvalidGraphError):
            cycle(2)

    def test_is_connected(self):
        assert is_connected(cycle(4))
        assert not is_connected(Graph(3, frozenset({(0, 1)})))
        assert is_connected(Graph(1, frozenset()))


class TestErdosRenyi:
    def test_deterministic(self):
        a = erdos_renyi(8, 0.4, seed=3)
        b = erdos_renyi(8, 0.4, seed=3)
        assert a.edges == b.edges

    def test_always_connected(self):
        for seed in range(30):
            assert is_connected(erdos_renyi(6, 0.3, seed=seed))

    def test_p_one_is_complete(self):
        assert erdos_renyi(5, 1.0, seed=0).edges == complete(5).edges

    def test_bad_p(self):
        with pytest.raises(InvalidGraphError):
            erdos_renyi(5, 0.0, seed=0)


class TestMetropolis:
    def test_star3_by_hand(self):
        # hub degree 2, leaves degree 1: edge weight 1/(1+2) = 1/3,
        # leaf self weight 2/3, hub self weight 1/3
        W = metropolis_weights(star(3)).weights
        expected = np.array(
            [
                [1 / 3, 1 / 3, 1 / 3],
                [1 / 3, 2 / 3, 0.0],
                [1 / 3, 0.0, 2 / 3],
            ]
        )
        assert np.allclose(W, expected, atol=1e-15)

    def test_star3_beta_by_hand(self):
        # eigenvector (0, 1, -1) gives eigenvalue 2/3; remaining spectrum {1, 0}
        assert metropolis_weights(star(3)).beta == pytest.approx(2 / 3, abs=1e-12)

    def test_cycle4_beta(self):
        # circulant weights 1/3: eigenvalues 1/3 + (2/3) cos(pi k / 2)
        assert metropolis_weights(cycle(4)).beta == pytest.approx(1 / 3, abs=1e-10)

    def test_complete_beta_zero(self):
        m = metropolis_weights(complete(6))
        assert np.allclose(m.weights, np.full((6, 6), 1 / 6), atol=1e-15)
        assert m.beta <= 1e-10

    def test_disconnected_refused(self):
        with pytest.raises(DisconnectedGraphError):
            metropolis_weights(Graph(4, frozenset({(0, 1), (2, 3)})))

    def test_single_node(self):
        m = metropolis_weights(Graph(1, frozenset()))
        assert np.array_equal(m.weights, [[1.0]])
        assert m.beta == 0.0

    @settings(max_examples=40, deadline=None)
    @given(M=st.integers(3, 12), seed=st.integers(0, 10_000))
    def test_contract_random_graphs(self, M, seed):
        m = metropolis_weights(erdos_renyi(M, 0.5, seed=seed))
        W = m.weights
        assert np.allclose(W, W.T, atol=1e-15)
        assert np.allclose(W.sum(axis=0), 1.0, atol=1e-12)
        assert np.allclose(W.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.diag(W) > 0)
        assert m.beta < 1.0

    def test_beta_against_dense_eigensolve(self):
        W = metropolis_weights(erdos_renyi(9, 0.4, seed=11)).weights
        vals = np.sort(np.abs(np.linalg.eigvals(W)))[::-1]
        assert beta(W) == pytest.approx(vals[1], abs=1e-10)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        g = erdos_renyi(7, 0.5, seed=2)
        path = tmp_path / "g.txt"
        save_edge_list(path, g)
        g2 = load_edge_list(path)
        assert g2.n_nodes == g.n_nodes
        assert g2.edges == g.edges

    def test_format(self, tmp_path):
        path = tmp_path / "g.txt"
        save_edge_list(path, Graph(3, frozenset({(0, 1), (1, 2)})))
        assert path.read_text() == "3\n0 1\n1 2\n"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("")
        with pytest.raises(InvalidGraphError):
            load_edge_list(path)
