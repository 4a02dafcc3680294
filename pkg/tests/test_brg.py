import numpy as np
import pytest

from epinet_tools.analysis.summary import credible_interval, summarize_brg_trace
from epinet_tools.data.dataset import with_known_edges
from epinet_tools.data.types import BRGParams, Graph
from epinet_tools.epidemic.simulate import simulate_si
from epinet_tools.inference.brg import (
    BRGState, brg_edge_kernels, gibbs_edge_brg, p_full_conditional, run_brg_chain,
)
from epinet_tools.inference.likelihood import log_tree_given_graph, log_integrated_beta_kernel
from epinet_tools.inference.mcmc import McmcConfig, SamplerException, initial_graph, BRG
from epinet_tools.network.generate import generate_brg


@pytest.fixture
def one_free_pair(small_data):
    return with_known_edges(small_data, {(0, 3): False, (1, 2): True})


def test_p_full_conditional():
    g = Graph.from_edges(4, [(0, 1), (1, 2)])
    assert p_full_conditional(g, BRGParams(p=0.5, a_p=1, b_p=1)) == (3, 5)


def test_edge_conditional_matches_direct_evaluation(one_free_pair, priors):
    g = initial_graph(one_free_pair)
    state = BRGState.build(beta=0.4, p=0.3, g=g, data=one_free_pair)

    logs = []
    for present in (False, True):
        h = g.copy()
        h.set_edge(2, 3, present)
        logs.append(
            (np.log(0.3) if present else np.log(0.7))
            + log_tree_given_graph(one_free_pair.tree, h)
            + log_integrated_beta_kernel(h, one_free_pair, priors)
        )
    kernels = brg_edge_kernels(state, one_free_pair, priors, (2, 3))
    assert kernels[1] - kernels[0] == pytest.approx(logs[1] - logs[0])


def test_edge_updates_keep_state(one_free_pair, priors, rng):
    state = BRGState.build(beta=0.4, p=0.6, g=initial_graph(one_free_pair), data=one_free_pair)
    for _ in range(200):
        gibbs_edge_brg(state, one_free_pair, priors, (2, 3), rng)
        fresh = BRGState.build(state.beta, state.p, state.g, one_free_pair)
        assert state.si_sum == pytest.approx(fresh.si_sum)
        assert state.log_tree == pytest.approx(fresh.log_tree)


def test_clamped_graph_gives_conjugate_p(small_data, priors):
    data = with_known_edges(small_data, {(0, 3): True, (1, 2): False, (2, 3): True})
    trace = run_brg_chain(data, priors, McmcConfig(iterations=4000, burnin=1000, model=BRG, seed=2),
                          brg_priors=BRGParams(p=0.5, a_p=1, b_p=1))
    assert list(trace.samples.columns) == ['iter', 'beta', 'p', 'log_joint']
    assert trace.model == BRG
    assert trace.samples['p'].mean() == pytest.approx(6 / 8, abs=0.015)
    assert np.isfinite(trace.samples['log_joint']).all()


def test_wrong_configuration(small_data, priors):
    with pytest.raises(SamplerException):
        run_brg_chain(small_data, priors, McmcConfig(iterations=10, burnin=5))
    with pytest.raises(SamplerException):
        run_brg_chain(small_data, priors, McmcConfig(iterations=10, burnin=5, model=BRG, prior_only=True))


@pytest.mark.slow
def test_brg_recovers_parameters(priors):
    rng = np.random.default_rng(31)
    g = generate_brg(50, 0.1, rng)
    while not g.is_connected():
        g = generate_brg(50, 0.1, rng)
    data = simulate_si(g, 0.4, rng).to_data()

    trace = run_brg_chain(data, priors, McmcConfig(iterations=6000, burnin=2000, model=BRG), rng)
    for name, truth in (('beta', 0.4), ('p', 0.1)):
        lower, upper = credible_interval(trace.samples[name])
        assert lower <= truth <= upper, name
    assert abs(summarize_brg_trace(trace, data.m).corr_beta_p) < 0.3
