"""
Network generators: the modified preferential attachment (PA) model and the Bernoulli random graph (BRG) baseline.

In the PA model nodes join one at a time in the network order sigma. The node joining at step i (1-based, i >= 3)
connects to X_i existing nodes, where X_i follows a Poisson(mu) distribution censored to {1, ..., i-1}. Targets are
drawn without replacement with weights mixing current degree (weight 1-gamma) and recency of entry (weight gamma).
"""

import numpy as np
from typing import List, Tuple, Union
from scipy.stats import poisson

from epinet_tools.data.types import Graph, NetworkOrder, GenerationRecord


def censored_poisson_logpmf(x: Union[int, np.ndarray], i: Union[int, np.ndarray], mu: float) -> np.ndarray:
    """
    Log-probability of X_i = x under the censored Poisson distribution with support {1, ..., i-1}.
    The lower branch absorbs P(0) and the upper branch absorbs the whole tail beyond i-2.
    Values outside the support map to -inf (use censored_poisson_pmf for a checked scalar version).
    """
    x = np.asarray(x)
    i = np.asarray(i)
    with np.errstate(divide='ignore'):
        lower = -mu + np.log1p(mu)
        middle = poisson.logpmf(x, mu)
        upper = poisson.logsf(i - 2, mu)  # log P(Z >= i-1)
    out = np.where(x == 1, lower, np.where(x == i - 1, upper, middle))
    return np.where((x < 1) | (x > i - 1), -np.inf, out)


def censored_poisson_pmf(x: int, i: int, mu: float) -> float:
    """
    Probability of X_i = x under the censored Poisson distribution.
    :param x: Number of new edges, 1 <= x <= i-1.
    :param i: The (1-based) step at which the node joins, i >= 3.
    :param mu: Poisson parameter (mu = 0 is admitted as the degenerate limit).
    """
    if i < 3:
        raise ValueError(f"Steps start at i=3 (received i={i}).")
    if not 1 <= x <= i - 1:
        raise ValueError(f"x={x} lies outside the support {{1, ..., {i - 1}}}.")
    if mu < 0:
        raise ValueError(f"mu must be non-negative (received {mu}).")
    return float(np.exp(censored_poisson_logpmf(x, i, mu)))


def sample_new_edge_count(i: int, mu: float, rng: np.random.Generator) -> int:
    """Draw X_i. Censoring a Poisson draw to [1, i-1] is exactly the censored Poisson distribution."""
    if i < 3:
        raise ValueError(f"Steps start at i=3 (received i={i}).")
    return int(np.clip(rng.poisson(mu), 1, i - 1))


def attachment_weights(partial_adj: np.ndarray, i: int, gamma: float) -> np.ndarray:
    """
    Attachment weights over the i-1 nodes already in the network.
    :param partial_adj: Adjacency matrix in network-entry order; only the leading (i-1)x(i-1) block is used.
    :param i: The (1-based) step at which the new node joins.
    :param gamma: Weight of the recency component, in [0, 1].
    :return: Weight vector of length i-1 that sums to 1.
    """
    n = i - 1
    degree = np.asarray(partial_adj[:n, :n], dtype=float).sum(axis=0)
    total_degree = degree.sum()
    recency = np.arange(1, n + 1) / (n * (n + 1) / 2)

    if total_degree == 0:
        if gamma < 1:
            raise ValueError("The partial network has no edges, so degree weights are undefined.")
        return recency
    return (1 - gamma) * degree / total_degree + gamma * recency


def sample_attachment_targets(w: np.ndarray, x: int, rng: np.random.Generator) -> np.ndarray:
    """
    Weighted sample without replacement: sequential draws proportional to the remaining weights.
    :return: The x selected positions in draw order.
    """
    w = np.asarray(w, dtype=float)
    if np.count_nonzero(w > 0) < x:
        raise ValueError(f"Only {np.count_nonzero(w > 0)} positions have positive weight; cannot draw {x}.")

    remaining = w.copy()
    selected = np.empty(x, dtype=int)
    for k in range(x):
        j = rng.choice(remaining.shape[0], p=remaining / remaining.sum())
        selected[k] = j
        remaining[j] = 0
    return selected


def generate_pa_network(
        m: int,
        mu: float,
        gamma: float,
        sigma: NetworkOrder,
        rng: np.random.Generator,
) -> Tuple[Graph, List[GenerationRecord]]:
    """
    Grow a network with the modified PA model.
    :param m: Number of nodes.
    :param mu: Censored Poisson parameter for the number of new edges.
    :param gamma: Recency weight in the attachment rule.
    :param sigma: Network order; sigma[k] is the label of the (k+1)-th entrant.
    :param rng: Random generator.
    :return: The graph (in node labels) and one record per step i = 3..m.
    """
    if m < 2:
        raise ValueError(f"A network needs at least two nodes (received m={m}).")
    if sigma.m != m:
        raise ValueError(f"Network order covers {sigma.m} nodes; expected {m}.")

    adj = np.zeros((m, m), dtype=bool)  # Entry-position order
    adj[0, 1] = adj[1, 0] = True
    records = []
    for i in range(3, m + 1):
        x = sample_new_edge_count(i, mu, rng)
        w = attachment_weights(adj, i, gamma)
        selected = sample_attachment_targets(w, x, rng)
        adj[i - 1, selected] = True
        adj[selected, i - 1] = True
        records.append(GenerationRecord(step=i, x=x, selected=selected, weights=w))

    pos = sigma.positions()
    return Graph(m, adj[np.ix_(pos, pos)]), records


def sample_prior_network(
        m: int,
        mu: float,
        gamma: float,
        rng: np.random.Generator,
) -> Tuple[Graph, NetworkOrder]:
    """Forward simulation from the network prior: uniform network order, then PA growth."""
    sigma = NetworkOrder(sigma=rng.permutation(m))
    g, _ = generate_pa_network(m, mu, gamma, sigma, rng)
    return g, sigma


def generate_brg(m: int, p: float, rng: np.random.Generator) -> Graph:
    """Bernoulli random graph: every pair is present independently with probability p. No connectivity repair."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1] (received {p}).")
    upper = np.triu(rng.random((m, m)) < p, k=1)
    return Graph(m, upper | upper.T)


def degree_distribution(g: Graph) -> np.ndarray:
    """Count of nodes with each degree 0..max degree."""
    return np.bincount(g.degrees())
