"""
Log-likelihood components of the latent network SI epidemic model.

The complete-data likelihood factorises into
    pi(P | G) * pi(I | G, beta) * pi(G | mu, gamma, sigma),
and pi(G | mu, gamma, sigma) = L1 * L2, where L1 scores the sequence of new-edge counts and L2 scores which earlier
entrants received the new edges. All values are natural logs; -inf marks zero-probability configurations.

The network terms are evaluated on the adjacency matrix permuted into network-entry order
(A[a, b] = G[sigma[a], sigma[b]]), which lets every step of the growth process be scored with whole-array operations.
"""

import itertools
import math
from functools import lru_cache
from typing import Dict, NamedTuple, Tuple, TYPE_CHECKING

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson, gamma as gamma_dist

from epinet_tools.data.types import Graph, NetworkOrder, TransmissionTree, EpidemicData, ParamState, Priors
from epinet_tools.network.generate import attachment_weights

if TYPE_CHECKING:
    from epinet_tools.inference.mcmc import ChainState


# Largest number of new edges at a single step for which the exact L2 enumerates orderings
EXACT_L2_MAX_EDGES: int = 8

APPROX = 'approx'
EXACT = 'exact'


class LogLikComponents(NamedTuple):
    log_tree: float
    log_times: float
    log_L1: float
    log_L2: float
    si_sum: float  # Sum over present edges {i<j} of (I_j - I_i), in days

    @property
    def log_network(self) -> float:
        return self.log_L1 + self.log_L2

    @property
    def total(self) -> float:
        return self.log_tree + self.log_times + self.log_L1 + self.log_L2


# ----------------------------------------------------------------------------------------------------------------------
# Transmission tree and infection times
# ----------------------------------------------------------------------------------------------------------------------
def earlier_neighbour_counts(adj: np.ndarray) -> np.ndarray:
    """counts[j] = number of neighbours of j with a smaller label (i.e., infected earlier)."""
    return np.triu(adj, k=1).sum(axis=0)


def log_tree_given_graph(p: TransmissionTree, g: Graph) -> float:
    """
    Uniform distribution over infection pathways: each non-root node picks its infector uniformly among its
    earlier-infected neighbours.
    """
    infector = p.infector
    m = p.m
    if infector[0] != -1 or np.any(infector[1:] < 0) or np.any(infector[1:] >= np.arange(1, m)):
        return -np.inf

    adj = g.adj
    if not np.all(adj[infector[1:], np.arange(1, m)]):
        return -np.inf

    counts = earlier_neighbour_counts(adj)[1:]
    if np.any(counts == 0):
        return -np.inf
    return float(-np.log(counts).sum())


def si_edge_time_sum(g: Graph, times: np.ndarray) -> float:
    """Total time each present edge spent with one end infected and the other susceptible."""
    gaps = times[np.newaxis, :] - times[:, np.newaxis]
    return float(np.sum(np.triu(g.adj, k=1) * gaps))


def si_sum_delta(times: np.ndarray, s: int, t: int, present: bool) -> float:
    """Change in si_edge_time_sum when the edge {s, t} is switched on (present=True) or off."""
    gap = abs(times[t] - times[s])
    return gap if present else -gap


def log_times_given_graph(times: np.ndarray, g: Graph, beta: float) -> float:
    m = times.shape[0]
    return float((m - 1) * np.log(beta) - beta * si_edge_time_sum(g, times))


def log_integrated_beta_kernel(g: Graph, data: EpidemicData, priors: Priors) -> float:
    """The infection-time factor with beta integrated out against its Gamma prior (up to a constant)."""
    return log_integrated_beta_from_sum(si_edge_time_sum(g, data.times), data.m, priors)


def log_integrated_beta_from_sum(si_sum: float, m: int, priors: Priors) -> float:
    return -(priors.a_beta + m - 1) * math.log(priors.b_beta + si_sum)


# ----------------------------------------------------------------------------------------------------------------------
# Network likelihood
# ----------------------------------------------------------------------------------------------------------------------
def permuted_adjacency(g: Graph, sigma: NetworkOrder) -> np.ndarray:
    """Adjacency matrix in network-entry order: A[a, b] = G[sigma[a], sigma[b]]."""
    return g.adj[np.ix_(sigma.sigma, sigma.sigma)]


def new_edge_counts(adj_pos: np.ndarray) -> np.ndarray:
    """x[a] = number of edges from entrant a to earlier entrants (meaningful for a >= 2)."""
    return np.tril(adj_pos, k=-1).sum(axis=1)


@lru_cache(maxsize=32)
def _step_constants(m: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Strictly-lower mask, recency weights and 1-based step numbers for an m-node network."""
    rows = np.arange(m)[:, np.newaxis]
    cols = np.arange(m)[np.newaxis, :]
    lower = cols < rows
    with np.errstate(divide='ignore', invalid='ignore'):
        recency = np.where(lower, (cols + 1) / (rows * (rows + 1) / 2), 0.0)
    steps = np.arange(1, m + 1)
    for a in (lower, recency, steps):
        a.flags.writeable = False
    return lower, recency, steps


def log_L1_positions(adj_pos: np.ndarray, mu: float) -> float:
    """log L1 from an adjacency matrix in network-entry order. See log_L1."""
    m = adj_pos.shape[0]
    if not adj_pos[0, 1]:
        return -np.inf
    if m == 2:
        return 0.0

    x = new_edge_counts(adj_pos)[2:]
    if np.any(x == 0):
        return -np.inf
    i = np.arange(3, m + 1)

    log_mu = np.log(mu)
    value = -(m - 2) * mu + x.sum() * log_mu  # x.sum() == |G| - 1
    value += np.count_nonzero(x == 1) * (np.log1p(mu) - log_mu)
    full = x == i - 1
    if np.any(full):
        value += _log_tail_ratio(float(mu), m)[full].sum()
    value -= gammaln(x + 1).sum()
    return float(value)


@lru_cache(maxsize=16)
def _log_tail_ratio(mu: float, m: int) -> np.ndarray:
    """log(sum_{z >= i-1} mu^z / z!) - log(mu^(i-1) / (i-1)!) for steps i = 3..m."""
    i = np.arange(3, m + 1)
    ratio = poisson.logsf(i - 2, mu) + mu - (i - 1) * np.log(mu) + gammaln(i)
    ratio.flags.writeable = False
    return ratio


def log_L1(g: Graph, sigma: NetworkOrder, mu: float) -> float:
    """
    Log-likelihood of the sequence of new-edge counts, x_i = number of edges from entrant i to earlier entrants.
    Equal to the sum of censored Poisson log-probabilities of the x_i, written in the factored form
    -(m-2)mu + (|G|-1)log(mu) + #{x_i=1}log((1+mu)/mu) + sum_{x_i=i-1} log(tail_i / (mu^(i-1)/(i-1)!)) - sum log(x_i!).
    """
    return log_L1_positions(permuted_adjacency(g, sigma), mu)


def _attachment_weight_matrix(adj_pos: np.ndarray, gamma: float) -> np.ndarray:
    """Row a holds the attachment weights seen by entrant a over entrants 0..a-1 (rows 0 and 1 unused)."""
    m = adj_pos.shape[0]
    lower, recency, _ = _step_constants(m)

    adj_f = adj_pos.astype(float)
    degree = np.zeros((m, m))
    degree[1:] = np.cumsum(adj_f, axis=0)[:-1]  # degree[a, c] = degree of c among entrants 0..a-1
    degree *= lower
    total = degree.sum(axis=1, keepdims=True)

    weights = gamma * recency
    if gamma < 1:
        with np.errstate(divide='ignore', invalid='ignore'):
            weights = weights + (1 - gamma) * np.where(total > 0, degree / total, 0.0)
    return weights


def log_L2_approx_positions(adj_pos: np.ndarray, gamma: float) -> float:
    """log L2 (single-permutation approximation) from an adjacency matrix in network-entry order."""
    m = adj_pos.shape[0]
    if not adj_pos[0, 1]:
        return -np.inf
    if m == 2:
        return 0.0

    lower, _, _ = _step_constants(m)
    selected = (adj_pos & lower)[2:]
    w = _attachment_weight_matrix(adj_pos, gamma)[2:]
    if np.any(selected & (w <= 0)):
        return -np.inf

    # 1 - sum_{k<j} w_k, evaluated as the remaining tail sum for accuracy
    remaining = np.cumsum(w[:, ::-1], axis=1)[:, ::-1]
    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.log(w) - np.log(remaining)
    x = selected.sum(axis=1)
    return float(gammaln(x + 1).sum() + np.where(selected, terms, 0.0).sum())


def log_L2_approx(g: Graph, sigma: NetworkOrder, gamma: float) -> float:
    """
    Log-likelihood of the attachment choices, approximated with the single ordering in which the selected
    entrants appear in entry order. The factor for choosing entrant j divides w_j by 1 - (sum of the weights of ALL
    earlier entrants, selected or not), as printed in the model derivation. The x_i! factors are included.
    """
    return log_L2_approx_positions(permuted_adjacency(g, sigma), gamma)


def log_L2_exact_positions(adj_pos: np.ndarray, gamma: float) -> float:
    m = adj_pos.shape[0]
    if not adj_pos[0, 1]:
        return -np.inf

    value = 0.0
    for a in range(2, m):
        chosen = np.nonzero(adj_pos[a, :a])[0]
        if chosen.shape[0] > EXACT_L2_MAX_EDGES:
            raise ValueError(
                f"Exact L2 enumerates {chosen.shape[0]}! orderings at entry position {a + 1}; "
                f"the limit is {EXACT_L2_MAX_EDGES} new edges per step."
            )
        w = attachment_weights(adj_pos, a + 1, gamma)
        if np.any(w[chosen] <= 0):
            return -np.inf

        prob = 0.0
        for ordering in itertools.permutations(chosen):
            p, used = 1.0, 0.0
            for j in ordering:
                p *= w[j] / (1 - used)
                used += w[j]
            prob += p
        value += np.log(prob)
    return float(value)


def log_L2_exact(g: Graph, sigma: NetworkOrder, gamma: float) -> float:
    """
    Exact log-probability of the attachment choices: for each step, the sum over every ordering of the selected set
    of the sequential without-replacement probability (only previously selected weights are removed).
    Equivalent to x_i! times the average over orderings. Only feasible for small graphs.
    """
    return log_L2_exact_positions(permuted_adjacency(g, sigma), gamma)


def log_network_positions(adj_pos: np.ndarray, mu: float, gamma: float, mode: str = APPROX) -> float:
    l1 = log_L1_positions(adj_pos, mu)
    if l1 == -np.inf:
        return -np.inf
    return l1 + log_L2_positions(adj_pos, gamma, mode)


def log_L2_positions(adj_pos: np.ndarray, gamma: float, mode: str = APPROX) -> float:
    if mode == APPROX:
        return log_L2_approx_positions(adj_pos, gamma)
    elif mode == EXACT:
        return log_L2_exact_positions(adj_pos, gamma)
    else:
        raise ValueError(f"Unknown network likelihood mode: {mode}")


def log_network_given_params(
        g: Graph,
        sigma: NetworkOrder,
        mu: float,
        gamma: float,
        mode: str = APPROX,
) -> float:
    """log pi(G | mu, gamma, sigma) = log L1 + log L2. The x_i! factors of the two components cancel."""
    return log_network_positions(permuted_adjacency(g, sigma), mu, gamma, mode)


# ----------------------------------------------------------------------------------------------------------------------
# Single-edge updates of the network likelihood
# ----------------------------------------------------------------------------------------------------------------------
def _log_ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.log(numerator / denominator)


class EdgeSwitch(NamedTuple):
    """Change of the network terms when the edge between entry positions lo < hi is switched."""
    lo: int
    hi: int
    step: int  # +1 adds the edge, -1 removes it
    delta_L1: float
    delta_L2: float


_CHOICE_FIELDS = ('keys', 'cols', 'numerator', 'denominator', 'recency', 'tail_recency', 'terms')


class NetworkTermCache:
    """
    Per-choice pieces of log L1 and the approximate log L2 of a graph in network-entry order, kept so that switching a
    single edge is scored from the choices it affects instead of the whole matrix.

    Choice e is the attachment of the later entrant keys[e] // m to cols[e] (entrants 2 and up), in row-major order.
    It contributes log(numerator[e] / denominator[e]): the weight of the chosen entrant and the summed weight of it and
    every later candidate, both multiplied by the total degree of the row. recency and tail_recency hold the matching
    recency weights times gamma, which grow with the total degree.

    Switching the edge between positions lo < hi changes the new-edge count of hi, adds or removes the choice (hi, lo)
    and, for every entrant after hi, shifts the degrees of lo and hi and the total degree by two. Scores computed
    ahead of time with prefetch hold until the next commit. The cache keeps a reference to adj_pos, which the caller
    updates after committing a switch. mu and gamma are fixed for the lifetime of the cache.
    """

    def __init__(self, adj_pos: np.ndarray, mu: float, gamma: float):
        m = adj_pos.shape[0]
        self.adj_pos = adj_pos
        self.m = m
        self.mu = float(mu)
        self.gamma = float(gamma)
        lower, _, _ = _step_constants(m)

        degree = np.zeros((m, m))
        degree[1:] = np.cumsum(adj_pos, axis=0)[:-1]
        degree *= lower
        tail_degree = np.cumsum(degree[:, ::-1], axis=1)[:, ::-1]
        self.row_total = degree.sum(axis=1)
        self.x = np.tril(adj_pos, k=-1).sum(axis=1)

        chosen = adj_pos & lower
        chosen[:2] = False
        rows, cols = np.nonzero(chosen)
        total = self.row_total[rows]
        self.keys = rows * m + cols
        self.cols = cols
        self.recency, self.tail_recency = self._recency_weights(rows, cols)
        self.numerator = (1 - self.gamma) * degree[rows, cols] + self.recency * total
        self.denominator = (1 - self.gamma) * tail_degree[rows, cols] + self.tail_recency * total
        self.terms = _log_ratio(self.numerator, self.denominator)

        self.log_mu = np.log(self.mu)
        self.log1p_mu = np.log1p(self.mu)
        self.tail_ratio = _log_tail_ratio(self.mu, m)
        self.log_factorial = gammaln(np.arange(m + 1))
        self._scores: Dict[Tuple[int, int], EdgeSwitch] = {}

    def _recency_weights(self, rows: np.ndarray, cols: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        steps = rows * (rows + 1) / 2
        return self.gamma * (cols + 1) / steps, self.gamma * (steps - cols * (cols + 1) / 2) / steps

    def log_L1_steps(self, x: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Censored Poisson log-probabilities of x[k] new edges for the entrants at positions a[k] >= 2."""
        clipped = np.clip(x, 0, self.m)
        value = -self.mu + clipped * self.log_mu - self.log_factorial[clipped]
        value += np.where(clipped == 1, self.log1p_mu - self.log_mu, 0.0)
        value += np.where(clipped == a, self.tail_ratio[np.clip(a - 2, 0, self.tail_ratio.shape[0] - 1)], 0.0)
        return np.where((x >= 1) & (x <= a), value, -np.inf)

    def log_L1(self) -> float:
        if not self.adj_pos[0, 1]:
            return -np.inf
        return float(self.log_L1_steps(self.x[2:], np.arange(2, self.m)).sum())

    def log_L2(self) -> float:
        if not self.adj_pos[0, 1]:
            return -np.inf
        value = self.log_factorial[self.x[2:]].sum() + self.terms.sum()
        return -np.inf if np.isnan(value) else float(value)

    def _choice_fields(self, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, ...]:
        """numerator, denominator, recency and tail_recency of the choice of lo[k] by hi[k] on the current graph."""
        before = np.cumsum(self.adj_pos, axis=0)[hi - 1]  # Degrees among the first hi[k] entrants
        cumulative = np.cumsum(before, axis=1)
        k = np.arange(lo.shape[0])
        degree = before[k, lo]
        tail_degree = cumulative[k, hi - 1] - cumulative[k, lo] + degree
        total = self.row_total[hi]
        recency, tail_recency = self._recency_weights(hi, lo)
        numerator = (1 - self.gamma) * degree + recency * total
        denominator = (1 - self.gamma) * tail_degree + tail_recency * total
        return numerator, denominator, recency, tail_recency

    def score_switches(self, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Changes of log L1 and log L2 for switching each edge between positions lo[k] < hi[k] (hi[k] >= 2), every one
        scored against the current graph. Requires the current graph to have a finite network likelihood.
        :return: The steps (+1 adds the edge, -1 removes it) and the two changes.
        """
        step = np.where(self.adj_pos[hi, lo], -1, 1)
        x = self.x[hi]
        delta_l1 = self.log_L1_steps(x + step, hi) - self.log_L1_steps(x, hi)

        # Choices of the entrants after hi
        later = self.keys >= ((hi + 1) * self.m)[:, np.newaxis]
        lo_, hi_, step_ = lo[:, np.newaxis], hi[:, np.newaxis], step[:, np.newaxis]
        hit = (self.cols == lo_) | (self.cols == hi_)
        covered = np.add(self.cols <= lo_, self.cols <= hi_, dtype=float)
        numerator = self.numerator + step_ * ((1 - self.gamma) * hit + 2 * self.recency)
        denominator = self.denominator + step_ * ((1 - self.gamma) * covered + 2 * self.tail_recency)
        with np.errstate(invalid='ignore'):
            shifted = np.where(later, _log_ratio(numerator, denominator) - self.terms, 0.0).sum(axis=1)

        # The choice (hi, lo) itself
        own = -np.append(self.terms, 0.0)[np.searchsorted(self.keys, hi * self.m + lo)]
        added = step > 0
        if added.any():
            numerator, denominator, _, _ = self._choice_fields(lo[added], hi[added])
            own[added] = _log_ratio(numerator, denominator)

        factorial = self.log_factorial[np.clip(x + step, 0, self.m)] - self.log_factorial[x]
        delta_l2 = np.where(delta_l1 > -np.inf, shifted + own + factorial, -np.inf)
        return step, delta_l1, delta_l2

    def prefetch(self, lo: np.ndarray, hi: np.ndarray) -> None:
        """Score a batch of switches ahead of their use. Pairs among the first two entrants are skipped."""
        keep = hi >= 2
        lo, hi = lo[keep], hi[keep]
        if lo.shape[0] == 0:
            self._scores = {}
            return
        step, delta_l1, delta_l2 = self.score_switches(lo, hi)
        self._scores = {
            (a, b): EdgeSwitch(a, b, s, d1, d2)
            for a, b, s, d1, d2 in zip(lo.tolist(), hi.tolist(), step.tolist(), delta_l1.tolist(), delta_l2.tolist())
        }

    def score_switch(self, lo: int, hi: int) -> EdgeSwitch:
        switch = self._scores.get((lo, hi))
        if switch is None:
            step, delta_l1, delta_l2 = self.score_switches(np.array([lo]), np.array([hi]))
            switch = EdgeSwitch(lo, hi, int(step[0]), float(delta_l1[0]), float(delta_l2[0]))
        return switch

    def commit(self, switch: EdgeSwitch) -> None:
        """Apply a scored switch and drop the pending scores. adj_pos is left to the caller."""
        lo, hi, step, m = switch.lo, switch.hi, switch.step, self.m
        start = int(np.searchsorted(self.keys, (hi + 1) * m))
        cols = self.cols[start:]
        hit = (cols == lo) | (cols == hi)
        covered = np.add(cols <= lo, cols <= hi, dtype=float)
        self.numerator[start:] += step * ((1 - self.gamma) * hit + 2 * self.recency[start:])
        self.denominator[start:] += step * ((1 - self.gamma) * covered + 2 * self.tail_recency[start:])
        self.terms[start:] = _log_ratio(self.numerator[start:], self.denominator[start:])
        self.x[hi] += step
        self.row_total[hi + 1:] += 2 * step

        index = int(np.searchsorted(self.keys, hi * m + lo))
        if step > 0:
            fields = [f[0] for f in self._choice_fields(np.array([lo]), np.array([hi]))]
            values = (hi * m + lo, lo, *fields, _log_ratio(fields[0], fields[1]))
            for name, value in zip(_CHOICE_FIELDS, values):
                setattr(self, name, np.insert(getattr(self, name), index, value))
        else:
            for name in _CHOICE_FIELDS:
                setattr(self, name, np.delete(getattr(self, name), index))
        self._scores = {}


# ----------------------------------------------------------------------------------------------------------------------
# Joint posterior kernel
# ----------------------------------------------------------------------------------------------------------------------
def compute_components(
        params: ParamState,
        sigma: NetworkOrder,
        g: Graph,
        data: EpidemicData,
        mode: str = APPROX,
) -> LogLikComponents:
    """Evaluate every likelihood component from scratch."""
    adj_pos = permuted_adjacency(g, sigma)
    si_sum = si_edge_time_sum(g, data.times)
    return LogLikComponents(
        log_tree=log_tree_given_graph(data.tree, g),
        log_times=float((data.m - 1) * np.log(params.beta) - params.beta * si_sum),
        log_L1=log_L1_positions(adj_pos, params.mu),
        log_L2=log_L2_positions(adj_pos, params.gamma, mode),
        si_sum=si_sum,
    )


def log_prior(params: ParamState, priors: Priors, m: int) -> float:
    """Gamma priors on beta and mu, U[0, 1] on gamma and the uniform distribution over the m! network orders."""
    if not (params.beta > 0 and params.mu > 0 and 0 <= params.gamma <= 1):
        return -np.inf
    value = gamma_dist.logpdf(params.beta, priors.a_beta, scale=1 / priors.b_beta)
    value += gamma_dist.logpdf(params.mu, priors.a_mu, scale=1 / priors.b_mu)
    return float(value - gammaln(m + 1))


def log_joint_from_components(
        components: LogLikComponents,
        params: ParamState,
        priors: Priors,
        m: int,
) -> float:
    total = components.total
    if total == -np.inf:
        return -np.inf
    return total + log_prior(params, priors, m)


def log_joint(state: 'ChainState', data: EpidemicData, priors: Priors, mode: str = APPROX) -> float:
    """Unnormalised log posterior of (G, beta, mu, gamma, sigma) given the tree and infection times."""
    components = compute_components(state.params, state.sigma, state.g, data, mode)
    return log_joint_from_components(components, state.params, priors, data.m)
