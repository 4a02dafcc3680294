import numpy as np
import pytest

from epinet_tools.data.types import Graph, NetworkOrder
from epinet_tools.network.generate import (
    censored_poisson_pmf,
    censored_poisson_logpmf,
    sample_new_edge_count,
    attachment_weights,
    sample_attachment_targets,
    generate_pa_network,
    sample_prior_network,
    generate_brg,
    degree_distribution,
)


@pytest.mark.parametrize('x, i, mu, expected', [
    (1, 5, 0.0, 1.0),
    (1, 100, 4.0, 0.0915782),
    (4, 5, 4.0, 0.5665299),
])
def test_censored_poisson_pmf_values(x, i, mu, expected):
    assert censored_poisson_pmf(x, i, mu) == pytest.approx(expected, abs=1e-7)


@pytest.mark.parametrize('i', range(3, 9))
@pytest.mark.parametrize('mu', [0.5, 4.0, 10.0])
def test_censored_poisson_normalization(i, mu):
    total = sum(censored_poisson_pmf(x, i, mu) for x in range(1, i))
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize('x, i, mu', [(0, 5, 1.0), (5, 5, 1.0), (1, 2, 1.0), (1, 5, -0.1)])
def test_censored_poisson_pmf_errors(x, i, mu):
    with pytest.raises(ValueError):
        censored_poisson_pmf(x, i, mu)


def test_censored_poisson_logpmf_outside_support():
    values = censored_poisson_logpmf(np.array([0, 1, 4, 5]), 5, 2.0)
    assert values[0] == -np.inf and values[3] == -np.inf
    assert np.all(np.isfinite(values[1:3]))


def test_new_edge_count_support(rng):
    assert all(sample_new_edge_count(7, 0.0, rng) == 1 for _ in range(50))
    assert {sample_new_edge_count(3, 5.0, rng) for _ in range(200)} <= {1, 2}
    with pytest.raises(ValueError):
        sample_new_edge_count(2, 1.0, rng)


def test_new_edge_count_frequencies(rng):
    i, mu, n = 6, 4.0, 100_000
    draws = np.array([sample_new_edge_count(i, mu, rng) for _ in range(n)])
    empirical = np.bincount(draws, minlength=i)[1:] / n
    exact = np.array([censored_poisson_pmf(x, i, mu) for x in range(1, i)])
    assert 0.5 * np.abs(empirical - exact).sum() < 0.01


def test_attachment_weights_examples():
    one_edge = Graph.from_edges(2, [(0, 1)]).adj
    np.testing.assert_allclose(attachment_weights(one_edge, 3, 0.0), [0.5, 0.5])

    star = Graph.from_edges(3, [(0, 1), (0, 2)]).adj
    np.testing.assert_allclose(attachment_weights(star, 4, 0.0), [0.5, 0.25, 0.25])
    np.testing.assert_allclose(attachment_weights(star, 4, 1.0), [1 / 6, 2 / 6, 3 / 6])


@pytest.mark.parametrize('gamma', [0.0, 0.3, 1.0])
def test_attachment_weights_sum_to_one(gamma, rng):
    g, _ = generate_pa_network(12, 2.0, 0.5, NetworkOrder.identity(12), rng)
    for i in range(3, 13):
        assert attachment_weights(g.adj, i, gamma).sum() == pytest.approx(1.0, abs=1e-12)


def test_attachment_weights_need_edges():
    empty = np.zeros((3, 3), dtype=bool)
    with pytest.raises(ValueError):
        attachment_weights(empty, 4, 0.5)
    np.testing.assert_allclose(attachment_weights(empty, 4, 1.0), [1 / 6, 2 / 6, 3 / 6])


def test_sample_attachment_targets(rng):
    selected = sample_attachment_targets(np.array([0.2, 0.3, 0.5]), 3, rng)
    assert sorted(selected) == [0, 1, 2]
    assert all(sample_attachment_targets(np.array([1.0, 0.0, 0.0]), 1, rng)[0] == 0 for _ in range(20))
    with pytest.raises(ValueError):
        sample_attachment_targets(np.array([1.0, 0.0, 0.0]), 2, rng)


def test_sample_attachment_targets_inclusion(rng):
    w = np.array([0.1, 0.2, 0.3, 0.4])
    n = 50_000
    counts = np.zeros(4)
    for _ in range(n):
        counts[sample_attachment_targets(w, 2, rng)] += 1

    # Inclusion probability of j: w_j + sum_{k != j} w_k w_j / (1 - w_k)
    exact = np.array([w[j] + sum(w[k] * w[j] / (1 - w[k]) for k in range(4) if k != j) for j in range(4)])
    np.testing.assert_allclose(counts / n, exact, atol=0.01)


def test_generate_pa_minimal(rng):
    g, records = generate_pa_network(2, 3.0, 0.5, NetworkOrder.identity(2), rng)
    assert g.edge_count == 1 and records == []


def test_generate_pa_tree_when_mu_zero(rng):
    g, _ = generate_pa_network(20, 0.0, 0.4, NetworkOrder(rng.permutation(20)), rng)
    assert g.edge_count == 19
    assert g.is_connected()


def test_generate_pa_records_match_graph(rng):
    m = 15
    sigma = NetworkOrder(rng.permutation(m))
    g, records = generate_pa_network(m, 4.0, 0.3, sigma, rng)
    assert g.edge_count == 1 + sum(r.x for r in records)
    assert g.has_edge(sigma.sigma[0], sigma.sigma[1])
    for r in records:
        node = sigma.sigma[r.step - 1]
        assert len(r.selected) == r.x
        for position in r.selected:
            assert g.has_edge(node, sigma.sigma[position])


def test_generate_pa_connected(rng):
    for _ in range(50):
        g, _ = sample_prior_network(60, rng.uniform(0.5, 8), rng.uniform(), rng)
        assert g.is_connected()


def test_generate_pa_order_size_mismatch(rng):
    with pytest.raises(ValueError):
        generate_pa_network(5, 1.0, 0.0, NetworkOrder.identity(4), rng)


def test_generate_pa_reproducible():
    a, _ = sample_prior_network(25, 3.0, 0.2, np.random.default_rng(3))
    b, _ = sample_prior_network(25, 3.0, 0.2, np.random.default_rng(3))
    assert a == b


def test_generate_brg_extremes(rng):
    assert generate_brg(6, 0.0, rng).edge_count == 0
    assert generate_brg(6, 1.0, rng).edge_count == 15
    with pytest.raises(ValueError):
        generate_brg(6, 1.2, rng)


def test_generate_brg_mean_edges(rng):
    counts = [generate_brg(50, 0.1, rng).edge_count for _ in range(2000)]
    assert np.mean(counts) == pytest.approx(122.5, abs=1.0)


def test_degree_distribution():
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    np.testing.assert_array_equal(degree_distribution(star), [0, 3, 0, 1])


def test_recency_weight_reduces_hubs():
    def mean_max_degree(gamma: float) -> float:
        rng = np.random.default_rng(11)
        return np.mean([
            generate_pa_network(150, 0.0, gamma, NetworkOrder.identity(150), rng)[0].degrees().max()
            for _ in range(100)
        ])
    assert mean_max_degree(0.0) > mean_max_degree(1.0)
