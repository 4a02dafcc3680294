"""
Baseline sampler with a Bernoulli random graph prior on the latent network: every pair is an edge independently with
probability p, p ~ Beta(a_p, b_p). beta and p have conjugate full conditionals and each unclamped pair gets a Gibbs
update with beta integrated out. There is no network order and no mu or gamma.
"""

import logging
from typing import Optional, List, Tuple

import numpy as np
import pandas as pd
from scipy.special import comb
from scipy.stats import beta as beta_dist, gamma as gamma_dist
from tqdm.auto import tqdm

from epinet_tools.data.types import EpidemicData, Graph, Priors, BRGParams
from epinet_tools.inference.likelihood import (
    log_integrated_beta_from_sum,
    log_tree_given_graph,
    si_edge_time_sum,
)
from epinet_tools.inference.mcmc import (
    BRG,
    McmcConfig,
    SamplerException,
    Trace,
    beta_full_conditional,
    check_run_inputs,
    free_pairs,
    initial_graph,
    is_kept,
)


logger = logging.getLogger(__name__)


class BRGState:
    def __init__(self, beta: float, p: float, g: Graph, si_sum: float, log_tree: float):
        self.beta = beta
        self.p = p
        self.g = g
        self.si_sum = si_sum
        self.log_tree = log_tree

    @classmethod
    def build(cls, beta: float, p: float, g: Graph, data: EpidemicData) -> 'BRGState':
        return cls(beta, p, g, si_edge_time_sum(g, data.times), log_tree_given_graph(data.tree, g))

    def log_joint(self, data: EpidemicData, priors: Priors, brg_priors: BRGParams) -> float:
        m = data.m
        n_pairs = comb(m, 2, exact=True)
        n_edges = self.g.edge_count
        value = self.log_tree + (m - 1) * np.log(self.beta) - self.beta * self.si_sum
        value += n_edges * np.log(self.p) + (n_pairs - n_edges) * np.log1p(-self.p)
        value += gamma_dist.logpdf(self.beta, priors.a_beta, scale=1 / priors.b_beta)
        value += beta_dist.logpdf(self.p, brg_priors.a_p, brg_priors.b_p)
        return float(value)


def gibbs_beta_brg(state: BRGState, data: EpidemicData, priors: Priors, rng: np.random.Generator) -> float:
    shape, rate = beta_full_conditional(state.si_sum, data.m, priors)
    state.beta = float(rng.gamma(shape, 1 / rate))
    return state.beta


def p_full_conditional(g: Graph, brg_priors: BRGParams) -> Tuple[float, float]:
    """Beta(a_p + |G|, b_p + C(m,2) - |G|)."""
    n_pairs = comb(g.m, 2, exact=True)
    return brg_priors.a_p + g.edge_count, brg_priors.b_p + n_pairs - g.edge_count


def gibbs_p(state: BRGState, brg_priors: BRGParams, rng: np.random.Generator) -> float:
    a, b = p_full_conditional(state.g, brg_priors)
    state.p = float(rng.beta(a, b))
    return state.p


def brg_edge_kernels(state: BRGState, data: EpidemicData, priors: Priors, pair: Tuple[int, int]) -> np.ndarray:
    """Unnormalised log conditional of G_st = 0 and G_st = 1 given everything else, beta integrated out."""
    s, t = pair
    if not s < t:
        raise ValueError(f"Pairs must be ordered by infection time (received ({s}, {t})).")
    current = state.g.has_edge(s, t)
    others = int(state.g.adj[:t, t].sum()) - int(current)
    gap = float(data.times[t] - data.times[s])
    si_without = state.si_sum - (gap if current else 0.0)

    with np.errstate(divide='ignore'):
        kernels = np.array([
            np.log1p(-state.p) - np.log(others),
            np.log(state.p) - np.log(others + 1),
        ])
    kernels[0] += log_integrated_beta_from_sum(si_without, data.m, priors)
    kernels[1] += log_integrated_beta_from_sum(si_without + gap, data.m, priors)
    return kernels


def gibbs_edge_brg(
        state: BRGState,
        data: EpidemicData,
        priors: Priors,
        pair: Tuple[int, int],
        rng: np.random.Generator,
) -> bool:
    s, t = pair
    kernels = brg_edge_kernels(state, data, priors, pair)
    current = state.g.has_edge(s, t)
    new = bool(rng.random() < np.exp(kernels[1] - np.logaddexp(kernels[0], kernels[1])))
    if new == current:
        return current

    state.g.set_edge(s, t, new)
    gap = float(data.times[t] - data.times[s])
    state.si_sum += gap if new else -gap
    others = int(state.g.adj[:t, t].sum()) - int(new)
    state.log_tree += np.log(others + int(current)) - np.log(others + int(new))
    return new


def run_brg_chain(
        data: EpidemicData,
        priors: Priors,
        config: McmcConfig,
        rng: Optional[np.random.Generator] = None,
        brg_priors: BRGParams = BRGParams(p=0.5),
        progress_bar: bool = False,
) -> Trace:
    """
    Run the Bernoulli random graph sampler. Only iterations, burnin, thin, seed and random_scan of config apply.
    :return: Trace with columns iter, beta, p, log_joint.
    """
    check_run_inputs(data, priors, config)
    if config.model != BRG:
        raise SamplerException("run_brg_chain fits the Bernoulli random graph model; set model to 'brg'.")
    if config.prior_only:
        raise SamplerException("Prior-only sampling is not available for the Bernoulli random graph model.")
    brg_priors.validate()
    rng = np.random.default_rng(config.seed) if rng is None else rng

    m = data.m
    g = initial_graph(data)
    a, b = p_full_conditional(g, brg_priors)
    state = BRGState.build(beta=1.0, p=a / (a + b), g=g, data=data)
    gibbs_beta_brg(state, data, priors, rng)
    pairs = free_pairs(data)
    logger.info("Running %d BRG iterations (burn-in %d) on m=%d.", config.iterations, config.burnin, m)

    rows: List[Tuple] = []
    tally = np.zeros((m, m), dtype=np.int64)
    iterator = range(config.iterations)
    if progress_bar:
        iterator = tqdm(iterator, unit='iter', desc='BRG MCMC')
    for it in iterator:
        gibbs_beta_brg(state, data, priors, rng)
        gibbs_p(state, brg_priors, rng)
        order = rng.permutation(pairs.shape[0]) if config.random_scan else range(pairs.shape[0])
        for k in order:
            gibbs_edge_brg(state, data, priors, (int(pairs[k, 0]), int(pairs[k, 1])), rng)

        if is_kept(it, config):
            rows.append((it + 1, state.beta, state.p, state.log_joint(data, priors, brg_priors)))
            tally += state.g.adj

    return Trace(
        samples=pd.DataFrame(rows, columns=['iter', 'beta', 'p', 'log_joint']),
        edge_tally=tally,
        acceptance={},
        proposal_sd={},
        model=BRG,
    )
