import itertools
import time
from collections import Counter

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import gamma as gamma_dist, norm

from epinet_tools.analysis.summary import alpha, credible_interval, mu_star, summarize_trace
from epinet_tools.data.dataset import with_known_edges
from epinet_tools.data.types import Graph, NetworkOrder, TransmissionTree, EpidemicData, ParamState, Priors
from epinet_tools.inference.likelihood import (
    log_L1_positions, log_tree_given_graph, log_integrated_beta_kernel, log_network_given_params,
    si_edge_time_sum, permuted_adjacency, EXACT,
)
from epinet_tools.inference.mcmc import (
    ChainState, McmcConfig, SamplerException, metropolis_accept, beta_full_conditional, gibbs_beta, rwm_mu,
    rwm_gamma, insertion_move, propose_sigma_insertion, update_sigma, edge_branch_kernels, gibbs_edge, free_pairs,
    sweep_edges, initial_graph, run_chain, SweepCache, BRG,
)
from epinet_tools.epidemic.simulate import simulate_si
from epinet_tools.network.generate import sample_prior_network


def build_state(data: EpidemicData, g: Graph, beta=0.4, mu=2.0, gamma=0.0, sigma=None, mode='approx'):
    sigma = NetworkOrder.identity(data.m) if sigma is None else sigma
    return ChainState.build(ParamState(beta, mu, gamma), sigma, g, data, mode)


@pytest.fixture
def path_data() -> EpidemicData:
    return EpidemicData(times=np.array([0.0, 1.0, 2.0]), tree=TransmissionTree.from_infectors([-1, 0, 1]))


@pytest.fixture
def one_free_pair(small_data) -> EpidemicData:
    # Tree 0->1, 0->2, 1->3; only {2, 3} is left unclamped
    return with_known_edges(small_data, {(0, 3): False, (1, 2): True})


def assert_cache_coherent(state: ChainState, data: EpidemicData, mode='approx'):
    fresh = state.recompute(data, mode)
    for name in fresh._fields:
        assert getattr(state.cache, name) == pytest.approx(getattr(fresh, name), abs=1e-8), name
    np.testing.assert_array_equal(state.adj_pos, state.g.adj[np.ix_(state.sigma.sigma, state.sigma.sigma)])


# ----------------------------------------------------------------------------------------------------------------------
# Parameter moves
# ----------------------------------------------------------------------------------------------------------------------
def test_beta_full_conditional(path_data, priors):
    shape, rate = beta_full_conditional(4.0, 3, priors)
    assert shape / rate == pytest.approx(0.74981, abs=1e-5)
    assert beta_full_conditional(4.0, 3, priors, prior_only=True) == (priors.a_beta, priors.b_beta)


def test_gibbs_beta_moments(path_data, priors, rng):
    state = build_state(path_data, Graph.complete(3))
    draws = np.array([gibbs_beta(state, path_data, priors, rng) for _ in range(20_000)])
    assert draws.mean() == pytest.approx(3 / 4.001, rel=0.02)
    assert draws.var() == pytest.approx(3 / 4.001 ** 2, rel=0.05)
    assert state.cache.log_times == pytest.approx(2 * np.log(draws[-1]) - draws[-1] * 4.0)


def test_metropolis_accept(rng):
    assert all(metropolis_accept(0.0, rng) for _ in range(100))
    assert not any(metropolis_accept(-np.inf, rng) for _ in range(100))
    assert not metropolis_accept(float('nan'), rng)


def test_rwm_mu_stays_positive(path_data, priors, rng):
    state = build_state(path_data, Graph.from_edges(3, [(0, 1), (1, 2)]), mu=0.05)
    for _ in range(500):
        mu, _ = rwm_mu(state, path_data, priors, 5.0, rng)
        assert mu > 0
    assert state.cache.log_L1 == pytest.approx(log_L1_positions(state.adj_pos, state.params.mu))


def test_rwm_gamma_stays_in_unit_interval(small_data, priors, rng):
    state = build_state(small_data, Graph.complete(4), gamma=0.95)
    for _ in range(500):
        gamma, _ = rwm_gamma(state, small_data, priors, 2.0, rng)
        assert 0 <= gamma <= 1
    assert_cache_coherent(state, small_data)


def test_rwm_gamma_ratio_uses_weight_mixture(priors):
    # Entrants 3 and 4 attach to entrant 1 only, so L2 depends on gamma through the weight of entrant 1
    data = EpidemicData(times=np.arange(4.0), tree=TransmissionTree.from_infectors([-1, 0, 0, 0]))
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    sigma = NetworkOrder.identity(4)
    ratio = log_network_given_params(g, sigma, 2.0, 0.8) - log_network_given_params(g, sigma, 2.0, 0.2)

    def star_weights(gamma):
        return (0.5 * (1 - gamma) + gamma / 3) * (2 / 4 * (1 - gamma) + gamma / 6)

    assert ratio == pytest.approx(np.log(star_weights(0.8)) - np.log(star_weights(0.2)))


# ----------------------------------------------------------------------------------------------------------------------
# Network order
# ----------------------------------------------------------------------------------------------------------------------
def test_insertion_move():
    sigma = NetworkOrder.identity(5)
    np.testing.assert_array_equal(insertion_move(sigma, 1, 3).sigma, [0, 2, 3, 1, 4])
    np.testing.assert_array_equal(insertion_move(sigma, 3, 1).sigma, [0, 3, 1, 2, 4])
    np.testing.assert_array_equal(insertion_move(sigma, 2, 2).sigma, sigma.sigma)


def test_insertion_proposal_is_symmetric():
    m = 4
    counts = Counter()
    for start in itertools.permutations(range(m)):
        for i, j in itertools.product(range(m), repeat=2):
            counts[(start, tuple(insertion_move(NetworkOrder(np.array(start)), i, j).sigma))] += 1
    for (a, b), n in counts.items():
        assert counts[(b, a)] == n


def test_propose_sigma_insertion_returns_permutation(rng):
    sigma = NetworkOrder.identity(6)
    for _ in range(100):
        proposal = propose_sigma_insertion(sigma, rng)
        assert sorted(proposal.sigma.tolist()) == list(range(6))
    with pytest.raises(ValueError):
        propose_sigma_insertion(NetworkOrder.identity(1), rng)


def test_update_sigma_two_nodes_always_accepts(priors, rng):
    data = EpidemicData(times=np.array([0.0, 1.0]), tree=TransmissionTree.from_infectors([-1, 0]))
    state = build_state(data, Graph.from_edges(2, [(0, 1)]))
    _, accepted = update_sigma(state, data, rng, n_moves=50)
    assert accepted == 50


def test_update_sigma_keeps_cache(simulated_10, rng):
    data = simulated_10.to_data()
    state = build_state(data, simulated_10.graph.copy(), mu=3.0, gamma=0.3)
    update_sigma(state, data, rng, n_moves=200)
    assert state.sigma.is_valid()
    assert_cache_coherent(state, data)


# ----------------------------------------------------------------------------------------------------------------------
# Edge updates
# ----------------------------------------------------------------------------------------------------------------------
def test_free_pairs(one_free_pair, small_data):
    np.testing.assert_array_equal(free_pairs(one_free_pair), [[2, 3]])
    assert free_pairs(small_data).shape == (3, 2)
    assert free_pairs(small_data, prior_only=True).shape == (6, 2)


def test_tree_edge_without_alternative_is_forced(small_data, priors, rng):
    g = Graph.from_edges(4, [(0, 1), (0, 2), (1, 3)])
    state = build_state(small_data, g)
    kernels, _ = edge_branch_kernels(state, small_data, priors, (0, 1))
    assert kernels[0] == -np.inf
    assert np.isfinite(kernels[1])
    assert all(gibbs_edge(state, small_data, priors, (0, 1), rng) for _ in range(20))
    with pytest.raises(ValueError):
        edge_branch_kernels(state, small_data, priors, (1, 0))


def direct_edge_conditional(data, priors, g, params, sigma):
    """P(G_23 = 1 | rest) from full evaluations of both graphs."""
    logs = []
    for present in (False, True):
        h = g.copy()
        h.set_edge(2, 3, present)
        logs.append(
            log_tree_given_graph(data.tree, h)
            + log_integrated_beta_kernel(h, data, priors)
            + log_network_given_params(h, sigma, params.mu, params.gamma)
        )
    return np.exp(logs[1] - np.logaddexp(*logs))


def test_edge_conditional_matches_direct_evaluation(one_free_pair, priors, rng):
    g = initial_graph(one_free_pair)
    state = build_state(one_free_pair, g, mu=1.5, gamma=0.3)
    expected = direct_edge_conditional(one_free_pair, priors, g, state.params, state.sigma)
    kernels, _ = edge_branch_kernels(state, one_free_pair, priors, (2, 3))
    assert np.exp(kernels[1] - np.logaddexp(*kernels)) == pytest.approx(expected)

    n = 40_000
    hits = sum(gibbs_edge(state, one_free_pair, priors, (2, 3), rng) for _ in range(n))
    assert hits / n == pytest.approx(expected, abs=0.01)
    assert_cache_coherent(state, one_free_pair)


@pytest.mark.parametrize('prior_only', [False, True])
def test_sweep_cache_kernels_match_full_evaluation(simulated_10, priors, prior_only):
    data = simulated_10.to_data()
    g = initial_graph(data)
    for s, t in [(0, 5), (2, 7), (3, 9)]:
        g.set_edge(s, t, True)
    state = build_state(data, g, mu=2.5, gamma=0.3)
    sweep = SweepCache.build(state)
    assert sweep.network is not None
    for s, t in free_pairs(data, prior_only).tolist():
        cached, _ = edge_branch_kernels(state, data, priors, (s, t), prior_only=prior_only, sweep=sweep)
        full, _ = edge_branch_kernels(state, data, priors, (s, t), prior_only=prior_only)
        np.testing.assert_allclose(cached, full)


def test_sweeps_keep_clamped_pairs_and_cache(simulated_10, priors, rng):
    data = simulated_10.to_data()
    tree_pairs = {(int(i), int(j)) for i, j in data.tree.edges()}
    absent = next(p for p in itertools.combinations(range(data.m), 2) if p not in tree_pairs)
    present = next(p for p in itertools.combinations(range(data.m), 2) if p not in tree_pairs and p != absent)
    data = with_known_edges(data, {absent: False, present: True})
    state = build_state(data, initial_graph(data), mu=3.0, gamma=0.2)
    for _ in range(30):
        sweep_edges(state, data, priors, rng, random_scan=True)
        for infector, infectee in data.tree.edges():
            assert state.g.has_edge(infector, infectee)
        assert not state.g.has_edge(*absent)
        assert state.g.has_edge(*present)
    assert state.g.is_connected()
    assert_cache_coherent(state, data)


def test_full_iteration_keeps_cache(simulated_10, priors, rng):
    data = simulated_10.to_data()
    state = build_state(data, initial_graph(data), mu=3.0, gamma=0.5)
    for _ in range(10):
        gibbs_beta(state, data, priors, rng)
        rwm_mu(state, data, priors, 1.0, rng)
        rwm_gamma(state, data, priors, 0.1, rng)
        update_sigma(state, data, rng)
        sweep_edges(state, data, priors, rng)
    assert_cache_coherent(state, data)


# ----------------------------------------------------------------------------------------------------------------------
# Chain
# ----------------------------------------------------------------------------------------------------------------------
def test_config_validation():
    with pytest.raises(SamplerException):
        McmcConfig(iterations=100, burnin=100).validate()
    with pytest.raises(SamplerException):
        McmcConfig(fix_gamma=1.5).validate()
    with pytest.raises(SamplerException):
        McmcConfig(network_likelihood='other').validate()
    assert McmcConfig().sigma_moves(12) == 12
    assert McmcConfig(sigma_moves_per_iter=3).sigma_moves(12) == 3


def test_run_chain_rejects_bad_inputs(small_data, simulated_10, priors):
    with pytest.raises(SamplerException):
        run_chain(small_data, priors, McmcConfig(iterations=10, burnin=10))
    with pytest.raises(SamplerException):
        run_chain(small_data, priors, McmcConfig(iterations=10, burnin=5, model=BRG))
    with pytest.raises(SamplerException):
        run_chain(simulated_10.to_data(), priors, McmcConfig(iterations=10, burnin=5, network_likelihood=EXACT))


def test_run_chain_output(simulated_10, priors):
    data = simulated_10.to_data()
    config = McmcConfig(iterations=300, burnin=100, thin=2, fix_gamma=None, seed=4, record_sigma=True)
    trace = run_chain(data, priors, config)

    assert trace.kept_n == 100
    assert list(trace.samples.columns) == ['iter', 'beta', 'mu', 'gamma', 'log_joint']
    assert trace.samples['iter'].iloc[0] == 101
    assert np.all(trace.samples['beta'] > 0) and np.all(trace.samples['mu'] > 0)
    assert trace.samples['gamma'].between(0, 1).all()
    assert np.isfinite(trace.samples['log_joint']).all()
    assert trace.sigma_samples.shape == (100, 10)
    assert set(trace.proposal_sd) == {'mu', 'gamma'}

    np.testing.assert_array_equal(trace.edge_tally, trace.edge_tally.T)
    for infector, infectee in data.tree.edges():
        assert trace.edge_tally[infector, infectee] == trace.kept_n


def test_run_chain_reproducible(small_data, priors):
    config = McmcConfig(iterations=200, burnin=50, fix_gamma=None)
    a = run_chain(small_data, priors, config, np.random.default_rng(3))
    b = run_chain(small_data, priors, config, np.random.default_rng(3))
    assert a.samples.equals(b.samples)
    np.testing.assert_array_equal(a.edge_tally, b.edge_tally)


def test_fixed_gamma_column(small_data, priors):
    trace = run_chain(small_data, priors, McmcConfig(iterations=200, burnin=50, fix_gamma=0.25, seed=1))
    assert (trace.samples['gamma'] == 0.25).all()
    assert 'gamma' not in trace.proposal_sd


def test_fully_clamped_graph_gives_conjugate_beta(small_data, priors):
    known = {(0, 3): True, (1, 2): False, (2, 3): True}
    data = with_known_edges(small_data, known)
    trace = run_chain(data, priors, McmcConfig(iterations=4000, burnin=1000, seed=9))

    si_sum = si_edge_time_sum(initial_graph(data), data.times)
    shape, rate = priors.a_beta + data.m - 1, priors.b_beta + si_sum
    beta = trace.samples['beta']
    assert beta.mean() == pytest.approx(shape / rate, rel=0.05)
    assert beta.var() == pytest.approx(shape / rate ** 2, rel=0.15)
    assert (trace.edge_tally[2, 3] == trace.kept_n) and trace.edge_tally[1, 2] == 0


@pytest.mark.slow
def test_sigma_chain_matches_enumeration(rng):
    m = 5
    g = Graph.from_edges(m, [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2)])
    data = EpidemicData(times=np.arange(float(m)), tree=TransmissionTree.from_infectors([-1, 0, 0, 0, 0]))
    mu, gamma = 1.5, 0.2

    target = {}
    for perm in itertools.permutations(range(m)):
        value = log_network_given_params(g, NetworkOrder(np.array(perm)), mu, gamma)
        if value > -np.inf:
            target[perm] = np.exp(value)
    norm = sum(target.values())

    state = build_state(data, g, mu=mu, gamma=gamma)
    counts = Counter()
    n = 1_000_000
    for _ in range(n):
        update_sigma(state, data, rng, n_moves=1)
        counts[tuple(state.sigma.sigma)] += 1
    tv = 0.5 * sum(abs(target.get(k, 0) / norm - counts.get(k, 0) / n) for k in set(target) | set(counts))
    assert tv < 0.02


@pytest.mark.slow
def test_mu_chain_matches_quadrature(rng):
    priors = Priors(a_mu=2.0, b_mu=0.5)
    g = Graph.from_edges(8, [(0, 1), (0, 2), (1, 3), (2, 4), (0, 5), (3, 6), (0, 7), (2, 7)])
    data = EpidemicData(times=np.arange(8.0), tree=TransmissionTree.from_infectors([-1, 0, 0, 1, 2, 0, 3, 0]))
    state = build_state(data, g, mu=1.0)

    def density(mu):
        return np.exp(log_L1_positions(state.adj_pos, mu) + gamma_dist.logpdf(mu, 2.0, scale=2.0))

    norm, _ = integrate.quad(density, 0, np.inf)
    mean, _ = integrate.quad(lambda mu: mu * density(mu), 0, np.inf)
    mean /= norm
    second, _ = integrate.quad(lambda mu: mu ** 2 * density(mu), 0, np.inf)
    sd = np.sqrt(second / norm - mean ** 2)

    draws = np.array([rwm_mu(state, data, priors, 1.0, rng)[0] for _ in range(100_000)])
    assert draws.mean() == pytest.approx(mean, abs=0.05 * sd)
    assert draws.std() == pytest.approx(sd, rel=0.05)


def prior_statistics(params: ParamState, adj_pos: np.ndarray) -> np.ndarray:
    """Twenty functions of the parameters and of the graph in network-entry order (8 nodes)."""
    degree = adj_pos.sum(axis=0)
    edges = degree.sum() / 2
    return np.concatenate((
        [params.beta, params.beta ** 2, params.mu, params.mu ** 2, params.gamma, params.gamma ** 2],
        [edges, edges ** 2, np.mean(degree ** 2), degree.max()],
        np.tril(adj_pos, k=-1).sum(axis=1)[2:],  # New edges of entrants 3..8
        adj_pos[0, 2:6],  # Attachment of entrants 3..6 to the first entrant
    )).astype(float)


def batch_means_z(chain: np.ndarray, forward: np.ndarray, n_batches: int = 50) -> np.ndarray:
    """z-scores of the difference in means, with the chain variance estimated from batch means."""
    usable = chain.shape[0] - chain.shape[0] % n_batches
    chain = chain[:usable]
    batches = chain.reshape(n_batches, -1, chain.shape[1]).mean(axis=1)
    variance = batches.var(axis=0, ddof=1) / n_batches + forward.var(axis=0, ddof=1) / forward.shape[0]
    return (chain.mean(axis=0) - forward.mean(axis=0)) / np.sqrt(variance)


def test_prior_only_run_chain(small_data):
    priors = Priors(a_beta=2.0, b_beta=1.0, a_mu=2.0, b_mu=1.0)
    config = McmcConfig(iterations=50, burnin=10, fix_gamma=None, prior_only=True, network_likelihood=EXACT, seed=4)
    trace = run_chain(small_data, priors, config)
    assert trace.kept_n == 40
    assert np.all(np.isfinite(trace.samples['log_joint']))


@pytest.mark.slow
def test_prior_only_sampler_matches_forward_simulation():
    m, n_forward, n_iterations, burnin = 8, 30_000, 31_000, 1_000
    priors = Priors(a_beta=2.0, b_beta=1.0, a_mu=2.0, b_mu=2.0)
    rng = np.random.default_rng(6)

    def draw_prior():
        params = ParamState(rng.gamma(2.0, 1.0), rng.gamma(2.0, 0.5), rng.uniform())
        g, sigma = sample_prior_network(m, params.mu, params.gamma, rng)
        return params, g, sigma

    forward = []
    for _ in range(n_forward):
        params, g, sigma = draw_prior()
        forward.append(prior_statistics(params, permuted_adjacency(g, sigma)))

    # Any data set: in prior-only mode the tree and times do not enter the target
    data = EpidemicData(times=np.arange(float(m)), tree=TransmissionTree.from_infectors([-1] + list(range(m - 1))))
    params, g, sigma = draw_prior()
    state = ChainState.build(params, sigma, g, data, EXACT)
    pairs = free_pairs(data, prior_only=True)
    chain = []
    for it in range(n_iterations):
        gibbs_beta(state, data, priors, rng, prior_only=True)
        rwm_mu(state, data, priors, 0.8, rng)
        rwm_gamma(state, data, priors, 0.3, rng, EXACT)
        update_sigma(state, data, rng, n_moves=2, mode=EXACT)
        sweep_edges(state, data, priors, rng, pairs, mode=EXACT, prior_only=True)
        if it >= burnin:
            chain.append(prior_statistics(state.params, state.adj_pos))

    z = batch_means_z(np.array(chain), np.array(forward))
    assert z.shape == (20,)
    assert np.all(np.abs(z) < norm.ppf(1 - 0.001 / 2)), z


# ----------------------------------------------------------------------------------------------------------------------
# Recovery at study scale
# ----------------------------------------------------------------------------------------------------------------------
@pytest.fixture
def pa_70():
    rng = np.random.default_rng(70)
    g, _ = sample_prior_network(70, 6.0, 0.0, rng)
    return simulate_si(g, 0.4, rng).to_data()


@pytest.mark.slow
def test_iteration_time_at_seventy_nodes(pa_70, priors):
    config = McmcConfig(iterations=60, burnin=20, fix_gamma=None, seed=71)
    start = time.perf_counter()
    run_chain(pa_70, priors, config)
    per_iteration = (time.perf_counter() - start) / config.iterations
    assert per_iteration * 20_000 <= 30 * 60


@pytest.mark.slow
def test_alpha_is_identified_when_gamma_is_free(pa_70, priors):
    trace = run_chain(pa_70, priors, McmcConfig(iterations=20_000, burnin=10_000, fix_gamma=None, seed=72))
    beta, mu, gamma = (trace.samples[name].to_numpy() for name in ('beta', 'mu', 'gamma'))
    truth = alpha(0.4, 6.0)
    assert truth == pytest.approx(2.401, abs=1e-3)

    lower, upper = credible_interval(beta * mu_star(mu))
    assert lower <= truth <= upper
    assert summarize_trace(trace).corr_beta_mustar < 0
    gamma_lower, gamma_upper = credible_interval(gamma)
    assert gamma_upper - gamma_lower > 0.5
