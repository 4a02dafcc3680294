"""
Posterior summaries of a kept trace.

The network scaled epidemic rate alpha = beta * mu_star, with mu_star = mu + exp(-mu) the approximate mean number of
new edges per entrant, is computed per draw and then summarised.
"""

from typing import NamedTuple, Tuple, Union

import numpy as np
from scipy.stats import binom

from epinet_tools.inference.mcmc import Trace, BRG


def mu_star(mu: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Approximate mean of the censored Poisson new-edge count. Nondecreasing in mu, equal to 1 at mu = 0."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("mu must be non-negative.")
    value = mu + np.exp(-mu)
    return float(value) if value.ndim == 0 else value


def alpha(beta: Union[float, np.ndarray], mu: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    return beta * mu_star(mu)


class PosteriorSummary(NamedTuple):
    beta_mean: float
    beta_sd: float
    mu_mean: float
    mu_sd: float
    gamma_mean: float
    gamma_sd: float
    mu_star_mean: float
    mu_star_sd: float
    alpha_mean: float
    alpha_sd: float
    corr_beta_mustar: float  # NaN when either parameter is constant over the trace
    kept_n: int


class BRGSummary(NamedTuple):
    beta_mean: float
    beta_sd: float
    p_mean: float
    p_sd: float
    corr_beta_p: float
    average_degree: float  # E(p) * (m - 1)
    kept_n: int


def _mean_sd(x: np.ndarray) -> Tuple[float, float]:
    return float(np.mean(x)), float(np.std(x, ddof=1))


def _correlation(x: np.ndarray, y: np.ndarray) -> float:
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return float('nan')
    return float(np.corrcoef(x, y)[0, 1])


def _check_kept(trace: Trace, minimum: int = 2) -> None:
    if trace.kept_n < minimum:
        raise ValueError(f"At least {minimum} kept iterations are required (the trace has {trace.kept_n}).")


def summarize_trace(trace: Trace) -> PosteriorSummary:
    """Posterior means, unbiased standard deviations and corr(beta, mu_star) of a preferential attachment trace."""
    if trace.model == BRG:
        raise ValueError("Use summarize_brg_trace for Bernoulli random graph traces.")
    _check_kept(trace)

    beta = trace.samples['beta'].to_numpy()
    mu = trace.samples['mu'].to_numpy()
    gamma = trace.samples['gamma'].to_numpy()
    ms = mu_star(mu)
    a = beta * ms

    return PosteriorSummary(
        *_mean_sd(beta),
        *_mean_sd(mu),
        *_mean_sd(gamma),
        *_mean_sd(ms),
        *_mean_sd(a),
        corr_beta_mustar=_correlation(beta, ms),
        kept_n=trace.kept_n,
    )


def summarize_brg_trace(trace: Trace, m: int) -> BRGSummary:
    if trace.model != BRG:
        raise ValueError("summarize_brg_trace expects a Bernoulli random graph trace.")
    _check_kept(trace)

    beta = trace.samples['beta'].to_numpy()
    p = trace.samples['p'].to_numpy()
    p_mean, p_sd = _mean_sd(p)
    return BRGSummary(
        *_mean_sd(beta),
        p_mean,
        p_sd,
        corr_beta_p=_correlation(beta, p),
        average_degree=p_mean * (m - 1),
        kept_n=trace.kept_n,
    )


def credible_interval(values: np.ndarray, level: float = 0.95) -> Tuple[float, float]:
    """Central credible interval from posterior draws."""
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1) (received {level}).")
    tail = (1 - level) / 2
    lower, upper = np.quantile(np.asarray(values, dtype=float), [tail, 1 - tail])
    return float(lower), float(upper)


def edge_posterior(trace: Trace) -> np.ndarray:
    """Posterior inclusion probability of every pair (symmetric matrix with a zero diagonal)."""
    _check_kept(trace, minimum=1)
    return trace.edge_tally / trace.kept_n


def binomial_tail(n: int, p: float, k: int) -> float:
    """P(X >= k) for X ~ Binomial(n, p), evaluated in log space."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1] (received {p}).")
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, n] (received k={k}, n={n}).")
    if k == 0:
        return 1.0
    return float(np.exp(binom.logsf(k - 1, n, p)))


def format_mean_sd(mean: float, sd: float, digits: int = 3) -> str:
    """Render a summary cell as 'mean (sd)'."""
    return f'{mean:.{digits}f} ({sd:.{digits}f})'
