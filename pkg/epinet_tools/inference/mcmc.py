"""
Metropolis-within-Gibbs sampler for the latent network, its parameters and the network order, given a transmission
tree and infection times.

One iteration updates, in turn:
    beta   exact Gibbs draw from its Gamma full conditional
    mu     random walk Metropolis (only L1 depends on mu)
    gamma  random walk Metropolis (only L2 depends on gamma), skipped when gamma is pinned
    sigma  sigma_moves_per_iter insertion moves, each accepted or rejected individually
    G      one Gibbs update per unclamped pair with beta integrated out

The state keeps a cache of the likelihood components and the adjacency matrix in network-entry order so every move
only re-evaluates the terms it changes.
"""

import math
import logging
from typing import NamedTuple, Optional, Dict, Tuple, List

import numpy as np
import pandas as pd
from scipy.stats import gamma as gamma_dist
from tqdm.auto import tqdm

from epinet_tools.data.types import (
    DataException,
    DatasetException,
    EpidemicData,
    Graph,
    NetworkOrder,
    ParamState,
    Priors,
)
from epinet_tools.data.dataset import validate_dataset
from epinet_tools.inference.adapt import ProposalTuner
from epinet_tools.inference.likelihood import (
    APPROX,
    EXACT,
    EXACT_L2_MAX_EDGES,
    EdgeSwitch,
    LogLikComponents,
    NetworkTermCache,
    compute_components,
    earlier_neighbour_counts,
    log_integrated_beta_from_sum,
    log_joint_from_components,
    log_L1_positions,
    log_L2_positions,
    log_prior,
    log_tree_given_graph,
    permuted_adjacency,
)


logger = logging.getLogger(__name__)

PA = 'pa'
BRG = 'brg'

# Edge switches scored together ahead of their Gibbs updates
SCORE_BATCH = 32


class SamplerException(DataException):
    """Invalid sampler configuration or state."""
    pass


class McmcConfig(NamedTuple):
    iterations: int = 20000
    burnin: int = 10000
    fix_gamma: Optional[float] = 0.0  # None lets gamma be sampled
    target_accept: float = 0.44
    init_mu: Optional[float] = None  # None: derived from the tree degrees
    init_gamma: float = 0.5
    proposal_sd_mu: float = 1.0
    proposal_sd_gamma: float = 0.1
    sigma_moves_per_iter: Optional[int] = None  # None: m moves
    seed: Optional[int] = None
    model: str = PA
    thin: int = 1
    random_scan: bool = False
    prior_only: bool = False
    network_likelihood: str = APPROX
    record_sigma: bool = False

    def validate(self) -> None:
        if self.iterations < 1:
            raise SamplerException(f"iterations must be positive (received {self.iterations}).")
        if not 0 <= self.burnin < self.iterations:
            raise SamplerException(
                f"burnin ({self.burnin}) must be smaller than iterations ({self.iterations}); "
                "otherwise no iterations are kept."
            )
        if not 0 < self.target_accept < 1:
            raise SamplerException(f"target_accept must lie in (0, 1) (received {self.target_accept}).")
        if self.fix_gamma is not None and not 0 <= self.fix_gamma <= 1:
            raise SamplerException(f"fix_gamma must lie in [0, 1] (received {self.fix_gamma}).")
        if not 0 <= self.init_gamma <= 1:
            raise SamplerException(f"init_gamma must lie in [0, 1] (received {self.init_gamma}).")
        if self.init_mu is not None and not self.init_mu > 0:
            raise SamplerException(f"init_mu must be positive (received {self.init_mu}).")
        if not (self.proposal_sd_mu > 0 and self.proposal_sd_gamma > 0):
            raise SamplerException("Proposal standard deviations must be positive.")
        if self.sigma_moves_per_iter is not None and self.sigma_moves_per_iter < 0:
            raise SamplerException("sigma_moves_per_iter cannot be negative.")
        if self.thin < 1:
            raise SamplerException(f"thin must be at least 1 (received {self.thin}).")
        if self.model not in (PA, BRG):
            raise SamplerException(f"Unknown model: {self.model}")
        if self.network_likelihood not in (APPROX, EXACT):
            raise SamplerException(f"Unknown network likelihood: {self.network_likelihood}")

    @property
    def gamma_is_free(self) -> bool:
        return self.fix_gamma is None

    def sigma_moves(self, m: int) -> int:
        return m if self.sigma_moves_per_iter is None else self.sigma_moves_per_iter


class AcceptanceCount(NamedTuple):
    accepted: int = 0
    proposed: int = 0

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float('nan')

    def add(self, accepted: int, proposed: int = 1) -> 'AcceptanceCount':
        return AcceptanceCount(self.accepted + int(accepted), self.proposed + proposed)


class Trace(NamedTuple):
    """
    Output of a chain.
    :param samples: One row per kept iteration (columns iter, the scalar parameters and log_joint).
    :param edge_tally: Number of kept iterations in which each pair was an edge (symmetric, epidemic labels).
    :param acceptance: Acceptance counts per move type over the whole run.
    :param proposal_sd: Random walk standard deviations at the end of burn-in.
    :param sigma_samples: Optional kept network orders, one row per kept iteration.
    :param model: 'pa' or 'brg'.
    """
    samples: pd.DataFrame
    edge_tally: np.ndarray
    acceptance: Dict[str, AcceptanceCount]
    proposal_sd: Dict[str, float]
    sigma_samples: Optional[np.ndarray] = None
    model: str = PA

    @property
    def kept_n(self) -> int:
        return self.samples.shape[0]

    @property
    def m(self) -> int:
        return self.edge_tally.shape[0]


class ChainState:
    """
    Mutable sampler state. adj_pos mirrors g in network-entry order (adj_pos[a, b] = g[sigma[a], sigma[b]]) and cache
    holds the likelihood components of the current state.
    """

    def __init__(
            self,
            params: ParamState,
            sigma: NetworkOrder,
            g: Graph,
            adj_pos: np.ndarray,
            cache: LogLikComponents,
    ):
        self.params = params
        self.sigma = sigma
        self.g = g
        self.adj_pos = adj_pos
        self.cache = cache

    @classmethod
    def build(
            cls,
            params: ParamState,
            sigma: NetworkOrder,
            g: Graph,
            data: EpidemicData,
            mode: str = APPROX,
    ) -> 'ChainState':
        return cls(
            params=params,
            sigma=sigma,
            g=g,
            adj_pos=permuted_adjacency(g, sigma),
            cache=compute_components(params, sigma, g, data, mode),
        )

    @property
    def si_sum(self) -> float:
        return self.cache.si_sum

    def recompute(self, data: EpidemicData, mode: str = APPROX) -> LogLikComponents:
        """Likelihood components evaluated from scratch (the cache should always agree)."""
        return compute_components(self.params, self.sigma, self.g, data, mode)

    def log_target(self, priors: Priors, m: int, prior_only: bool = False) -> float:
        """Log of the density the chain targets: the joint posterior, or the joint prior in prior-only mode."""
        if prior_only:
            return self.cache.log_network + log_prior(self.params, priors, m)
        return log_joint_from_components(self.cache, self.params, priors, m)

    def copy(self) -> 'ChainState':
        return ChainState(self.params, self.sigma, self.g.copy(), self.adj_pos.copy(), self.cache)


# ----------------------------------------------------------------------------------------------------------------------
# Individual kernels
# ----------------------------------------------------------------------------------------------------------------------
def metropolis_accept(log_ratio: float, rng: np.random.Generator) -> bool:
    """Accept with probability min(1, exp(log_ratio)). NaN ratios are rejected."""
    return bool(np.log(rng.random()) < log_ratio)


def beta_full_conditional(si_sum: float, m: int, priors: Priors, prior_only: bool = False) -> Tuple[float, float]:
    """(shape, rate) of the Gamma full conditional of beta."""
    if prior_only:
        return priors.a_beta, priors.b_beta
    return priors.a_beta + m - 1, priors.b_beta + si_sum


def _log_times(m: int, beta: float, si_sum: float) -> float:
    return float((m - 1) * np.log(beta) - beta * si_sum)


def gibbs_beta(
        state: ChainState,
        data: EpidemicData,
        priors: Priors,
        rng: np.random.Generator,
        prior_only: bool = False,
) -> float:
    shape, rate = beta_full_conditional(state.si_sum, data.m, priors, prior_only)
    beta = float(rng.gamma(shape, 1 / rate))
    state.params = state.params._replace(beta=beta)
    state.cache = state.cache._replace(log_times=_log_times(data.m, beta, state.si_sum))
    return beta


def rwm_mu(
        state: ChainState,
        data: EpidemicData,
        priors: Priors,
        proposal_sd: float,
        rng: np.random.Generator,
) -> Tuple[float, bool]:
    """Random walk Metropolis step for mu. Only log L1 and the prior of mu enter the ratio."""
    if not proposal_sd > 0:
        raise ValueError(f"Proposal standard deviation must be positive (received {proposal_sd}).")

    mu = state.params.mu
    proposed = mu + rng.normal(0, proposal_sd)
    if proposed <= 0:
        return mu, False

    log_l1 = log_L1_positions(state.adj_pos, proposed)
    scale = 1 / priors.b_mu
    with np.errstate(invalid='ignore'):
        log_ratio = (
            log_l1 - state.cache.log_L1
            + gamma_dist.logpdf(proposed, priors.a_mu, scale=scale)
            - gamma_dist.logpdf(mu, priors.a_mu, scale=scale)
        )
    if not metropolis_accept(log_ratio, rng):
        return mu, False

    state.params = state.params._replace(mu=float(proposed))
    state.cache = state.cache._replace(log_L1=log_l1)
    return float(proposed), True


def rwm_gamma(
        state: ChainState,
        data: EpidemicData,
        priors: Priors,
        proposal_sd: float,
        rng: np.random.Generator,
        mode: str = APPROX,
) -> Tuple[float, bool]:
    """Random walk Metropolis step for gamma under its U[0, 1] prior. Only log L2 enters the ratio."""
    if not proposal_sd > 0:
        raise ValueError(f"Proposal standard deviation must be positive (received {proposal_sd}).")

    gamma = state.params.gamma
    proposed = gamma + rng.normal(0, proposal_sd)
    if not 0 <= proposed <= 1:
        return gamma, False

    log_l2 = log_L2_positions(state.adj_pos, proposed, mode)
    with np.errstate(invalid='ignore'):
        log_ratio = log_l2 - state.cache.log_L2
    if not metropolis_accept(log_ratio, rng):
        return gamma, False

    state.params = state.params._replace(gamma=float(proposed))
    state.cache = state.cache._replace(log_L2=log_l2)
    return float(proposed), True


def insertion_move(sigma: NetworkOrder, i: int, j: int) -> NetworkOrder:
    """Take out the element at position i and insert it at position j (0-based)."""
    s = sigma.sigma
    return NetworkOrder(sigma=np.insert(np.delete(s, i), j, s[i]))


def propose_sigma_insertion(sigma: NetworkOrder, rng: np.random.Generator) -> NetworkOrder:
    """Symmetric insertion proposal with positions drawn uniformly with replacement."""
    m = sigma.m
    if m < 2:
        raise ValueError("A network order needs at least two nodes.")
    i, j = rng.integers(0, m, size=2)
    return insertion_move(sigma, int(i), int(j))


def update_sigma(
        state: ChainState,
        data: EpidemicData,
        rng: np.random.Generator,
        n_moves: Optional[int] = None,
        mode: str = APPROX,
) -> Tuple[NetworkOrder, int]:
    """
    Independent Metropolis steps on the network order, each targeting pi(G | mu, gamma, sigma) under the uniform
    prior on sigma.
    :return: The new network order and the number of accepted moves.
    """
    n_moves = data.m if n_moves is None else n_moves
    mu, gamma = state.params.mu, state.params.gamma
    current = state.cache.log_L1 + state.cache.log_L2

    accepted = 0
    for _ in range(n_moves):
        proposed = propose_sigma_insertion(state.sigma, rng)
        if np.array_equal(proposed.sigma, state.sigma.sigma):
            accepted += 1
            continue

        adj_pos = permuted_adjacency(state.g, proposed)
        log_l1 = log_L1_positions(adj_pos, mu)
        if log_l1 == -np.inf:
            rng.random()  # Keep one uniform per move
            continue
        log_l2 = log_L2_positions(adj_pos, gamma, mode)
        with np.errstate(invalid='ignore'):
            log_ratio = log_l1 + log_l2 - current
        if metropolis_accept(log_ratio, rng):
            state.sigma = proposed
            state.adj_pos = adj_pos
            state.cache = state.cache._replace(log_L1=log_l1, log_L2=log_l2)
            current = log_l1 + log_l2
            accepted += 1
    return state.sigma, accepted


class SweepCache(NamedTuple):
    """Quantities shared by the edge updates of one sweep, during which the network order and parameters are fixed."""
    positions: np.ndarray
    earlier: np.ndarray  # Earlier-infected neighbours of each node
    network: Optional[NetworkTermCache]  # None scores every switch on the whole matrix

    @classmethod
    def build(cls, state: ChainState, mode: str = APPROX) -> 'SweepCache':
        network = None
        cache = state.cache
        if mode == APPROX and np.isfinite(cache.log_L1 + cache.log_L2):
            network = NetworkTermCache(state.adj_pos, state.params.mu, state.params.gamma)
        return cls(state.sigma.positions(), earlier_neighbour_counts(state.g.adj), network)


class EdgeBranch(NamedTuple):
    """Network terms of the branch that differs from the current state."""
    log_L1: float
    log_L2: float
    switch: Optional[EdgeSwitch] = None


def _neg_log_count(count: int) -> float:
    return -math.log(count) if count > 0 else -np.inf


def _edge_probability(kernels: np.ndarray) -> float:
    """exp(k1) / (exp(k0) + exp(k1)), or NaN when both kernels are -inf."""
    k0, k1 = float(kernels[0]), float(kernels[1])
    if k0 == k1 == -np.inf:
        return float('nan')
    if k1 >= k0:
        return 1 / (1 + math.exp(k0 - k1))
    ratio = math.exp(k1 - k0)
    return ratio / (1 + ratio)


def edge_branch_kernels(
        state: ChainState,
        data: EpidemicData,
        priors: Priors,
        pair: Tuple[int, int],
        mode: str = APPROX,
        prior_only: bool = False,
        sweep: Optional[SweepCache] = None,
) -> Tuple[np.ndarray, EdgeBranch]:
    """
    Unnormalised log conditional of G_st = 0 and G_st = 1 given everything else, with beta integrated out.
    Leaves the state unchanged.
    :return: The two log kernels and the network terms of the branch that differs from the current state.
    """
    s, t = pair
    if not s < t:
        raise ValueError(f"Pairs must be ordered by infection time (received ({s}, {t})).")

    current = state.g.has_edge(s, t)
    pos = state.sigma.positions() if sweep is None else sweep.positions
    a, b = int(pos[s]), int(pos[t])
    lo, hi = min(a, b), max(a, b)
    cache = state.cache

    # The edge between the first two entrants is scored on the whole matrix; removing it is never accepted
    if sweep is not None and sweep.network is not None and hi >= 2:
        switch = sweep.network.score_switch(lo, hi)
        alt_l1 = cache.log_L1 + switch.delta_L1
        alt_l2 = cache.log_L2 + switch.delta_L2 if alt_l1 > -np.inf else -np.inf
        branch = EdgeBranch(alt_l1, alt_l2, switch)
    else:
        adj_pos = state.adj_pos
        adj_pos[a, b] = adj_pos[b, a] = not current
        try:
            alt_l1 = log_L1_positions(adj_pos, state.params.mu)
            alt_l2 = log_L2_positions(adj_pos, state.params.gamma, mode) if alt_l1 > -np.inf else -np.inf
        finally:
            adj_pos[a, b] = adj_pos[b, a] = current
        branch = EdgeBranch(alt_l1, alt_l2)

    network = [0.0, 0.0]
    network[int(current)] = cache.log_L1 + cache.log_L2
    network[int(not current)] = branch.log_L1 + branch.log_L2
    if prior_only:
        return np.array(network), branch

    # Earlier-infected neighbours of t other than s
    earlier = int(state.g.adj[:t, t].sum()) if sweep is None else int(sweep.earlier[t])
    others = earlier - int(current)
    gap = float(data.times[t] - data.times[s])
    si_without = cache.si_sum - (gap if current else 0.0)

    kernels = np.array([
        network[0] + _neg_log_count(others) + log_integrated_beta_from_sum(si_without, data.m, priors),
        network[1] + _neg_log_count(others + 1) + log_integrated_beta_from_sum(si_without + gap, data.m, priors),
    ])
    return kernels, branch


def gibbs_edge(
        state: ChainState,
        data: EpidemicData,
        priors: Priors,
        pair: Tuple[int, int],
        rng: np.random.Generator,
        mode: str = APPROX,
        prior_only: bool = False,
        sweep: Optional[SweepCache] = None,
) -> bool:
    """
    Gibbs update of a single unclamped pair (s, t) with s infected before t.
    :return: The new value of the edge.
    """
    s, t = pair
    kernels, branch = edge_branch_kernels(state, data, priors, pair, mode, prior_only, sweep)
    current = state.g.has_edge(s, t)

    p_edge = _edge_probability(kernels)
    u = rng.random()
    if np.isnan(p_edge):
        return current
    new = bool(u < p_edge)
    if new == current:
        return current

    pos = state.sigma.positions() if sweep is None else sweep.positions
    a, b = pos[s], pos[t]
    if branch.switch is not None:
        sweep.network.commit(branch.switch)
    state.g.set_edge(s, t, new)
    state.adj_pos[a, b] = state.adj_pos[b, a] = new

    if sweep is not None:
        sweep.earlier[t] += 1 if new else -1
    gap = float(data.times[t] - data.times[s])
    si_sum = state.si_sum + (gap if new else -gap)
    cache = state.cache
    others = int(state.g.adj[:t, t].sum()) - int(new) if sweep is None else int(sweep.earlier[t]) - int(new)
    if prior_only or cache.log_tree == -np.inf or others + int(new) == 0:
        log_tree = log_tree_given_graph(data.tree, state.g)
    else:
        log_tree = cache.log_tree - _neg_log_count(others + int(current)) + _neg_log_count(others + int(new))

    state.cache = cache._replace(
        log_tree=float(log_tree),
        log_times=_log_times(data.m, state.params.beta, si_sum),
        log_L1=branch.log_L1,
        log_L2=branch.log_L2,
        si_sum=si_sum,
    )
    return new


def clamped_pairs(data: EpidemicData, prior_only: bool = False) -> Dict[Tuple[int, int], bool]:
    """Pairs whose value is fixed during sampling: tree edges (present) and known edges."""
    clamped = dict(data.known())
    if not prior_only:
        for infector, infectee in data.tree.edges():
            clamped[(int(infector), int(infectee))] = True
    return clamped


def free_pairs(data: EpidemicData, prior_only: bool = False) -> np.ndarray:
    """Unclamped pairs (s, t), s < t, in lexicographic order."""
    clamped = clamped_pairs(data, prior_only)
    s, t = np.triu_indices(data.m, k=1)
    keep = np.array([(int(i), int(j)) not in clamped for i, j in zip(s, t)], dtype=bool)
    return np.column_stack((s[keep], t[keep]))


def sweep_edges(
        state: ChainState,
        data: EpidemicData,
        priors: Priors,
        rng: np.random.Generator,
        pairs: Optional[np.ndarray] = None,
        random_scan: bool = False,
        mode: str = APPROX,
        prior_only: bool = False,
) -> ChainState:
    """One Gibbs update of every unclamped pair, in lexicographic order unless random_scan is set."""
    pairs = free_pairs(data, prior_only) if pairs is None else pairs
    if random_scan:
        pairs = pairs[rng.permutation(pairs.shape[0])]

    sweep = SweepCache.build(state, mode)
    network = sweep.network
    if network is not None:
        # Restart the running sums of the network terms from the cache
        state.cache = state.cache._replace(
            log_L1=log_L1_positions(state.adj_pos, state.params.mu),
            log_L2=network.log_L2(),
        )
    pairs = pairs.tolist()
    scored_until = 0
    for k, (s, t) in enumerate(pairs):
        if network is not None and k >= scored_until:
            scored_until = k + SCORE_BATCH
            ends = sweep.positions[np.array(pairs[k:scored_until])]
            network.prefetch(ends.min(axis=1), ends.max(axis=1))
        current = state.g.has_edge(s, t)
        if gibbs_edge(state, data, priors, (s, t), rng, mode, prior_only, sweep) != current:
            scored_until = k + 1
    return state


# ----------------------------------------------------------------------------------------------------------------------
# Chain
# ----------------------------------------------------------------------------------------------------------------------
def initial_graph(data: EpidemicData) -> Graph:
    """Transmission tree plus every edge known to be present."""
    g = data.tree.as_graph()
    for (i, j), present in data.known().items():
        if present:
            g.set_edge(i, j, True)
    return g


def initialize_state(
        data: EpidemicData,
        priors: Priors,
        config: McmcConfig,
        rng: np.random.Generator,
) -> ChainState:
    """Start from the minimal graph consistent with the data and the epidemic order as network order."""
    g = initial_graph(data)
    sigma = NetworkOrder.identity(data.m)
    mu = config.init_mu
    if mu is None:
        mu = max(0.5, float(data.tree.degrees().mean()) - 1)
    gamma = config.init_gamma if config.gamma_is_free else config.fix_gamma

    params = ParamState(beta=1.0, mu=mu, gamma=gamma)
    state = ChainState.build(params, sigma, g, data, config.network_likelihood)
    gibbs_beta(state, data, priors, rng, config.prior_only)
    return state


def check_run_inputs(data: EpidemicData, priors: Priors, config: McmcConfig) -> None:
    config.validate()
    priors.validate()
    report = validate_dataset(data)
    if not report.passed:
        raise DatasetException('The epidemic data set is invalid.', report.violations)
    if config.network_likelihood == EXACT and data.m - 1 > EXACT_L2_MAX_EDGES:
        raise SamplerException(
            f"The exact network likelihood is limited to {EXACT_L2_MAX_EDGES + 1} nodes (m={data.m})."
        )


def is_kept(iteration: int, config: McmcConfig) -> bool:
    return iteration >= config.burnin and (iteration - config.burnin) % config.thin == 0


def run_chain(
        data: EpidemicData,
        priors: Priors,
        config: McmcConfig,
        rng: Optional[np.random.Generator] = None,
        progress_bar: bool = False,
) -> Trace:
    """
    Run the preferential attachment sampler.
    :param data: Validated epidemic data (tree, times and optional known edges).
    :param priors: Gamma priors for beta and mu.
    :param config: Sampler configuration.
    :param rng: Random generator; created from config.seed when omitted.
    :param progress_bar: Whether to display a tqdm progress bar over iterations.
    :return: The kept trace.
    """
    check_run_inputs(data, priors, config)
    if config.model != PA:
        raise SamplerException("run_chain fits the preferential attachment model; use run_brg_chain for 'brg'.")
    rng = np.random.default_rng(config.seed) if rng is None else rng

    m = data.m
    mode = config.network_likelihood
    state = initialize_state(data, priors, config, rng)
    pairs = free_pairs(data, config.prior_only)
    n_sigma = config.sigma_moves(m)
    logger.info(
        "Running %d iterations (burn-in %d) on m=%d with %d free pairs; gamma %s.",
        config.iterations, config.burnin, m, pairs.shape[0],
        'sampled' if config.gamma_is_free else f'fixed at {config.fix_gamma}',
    )

    tuners = {'mu': ProposalTuner(config.proposal_sd_mu, config.target_accept)}
    if config.gamma_is_free:
        tuners['gamma'] = ProposalTuner(config.proposal_sd_gamma, config.target_accept)
    acceptance = {name: AcceptanceCount() for name in ('mu', 'gamma', 'sigma')}

    rows: List[Tuple] = []
    sigmas: List[np.ndarray] = []
    tally = np.zeros((m, m), dtype=np.int64)

    iterator = range(config.iterations)
    if progress_bar:
        iterator = tqdm(iterator, unit='iter', desc='MCMC')
    for it in iterator:
        gibbs_beta(state, data, priors, rng, config.prior_only)

        _, accepted = rwm_mu(state, data, priors, tuners['mu'].sd, rng)
        tuners['mu'].record(accepted)
        acceptance['mu'] = acceptance['mu'].add(accepted)

        if config.gamma_is_free:
            _, accepted = rwm_gamma(state, data, priors, tuners['gamma'].sd, rng, mode)
            tuners['gamma'].record(accepted)
            acceptance['gamma'] = acceptance['gamma'].add(accepted)

        _, n_accepted = update_sigma(state, data, rng, n_sigma, mode)
        acceptance['sigma'] = acceptance['sigma'].add(n_accepted, n_sigma)

        sweep_edges(state, data, priors, rng, pairs, config.random_scan, mode, config.prior_only)

        for tuner in tuners.values():
            tuner.end_iteration(it, config.burnin)

        if is_kept(it, config):
            p = state.params
            rows.append((it + 1, p.beta, p.mu, p.gamma, state.log_target(priors, m, config.prior_only)))
            tally += state.g.adj
            if config.record_sigma:
                sigmas.append(state.sigma.sigma.copy())

    for name, count in acceptance.items():
        if count.proposed:
            logger.info("Acceptance rate for %s: %.3f", name, count.rate)

    return Trace(
        samples=pd.DataFrame(rows, columns=['iter', 'beta', 'mu', 'gamma', 'log_joint']),
        edge_tally=tally,
        acceptance=acceptance,
        proposal_sd={name: tuner.sd for name, tuner in tuners.items()},
        sigma_samples=np.array(sigmas) if config.record_sigma else None,
        model=PA,
    )
