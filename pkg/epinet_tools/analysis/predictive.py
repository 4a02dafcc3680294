"""
Posterior predictive cumulative infection curves.
Each simulation draws (beta, mu, gamma) from the kept trace, grows a preferential attachment network in identity order
and runs an SI epidemic on it.
"""

from typing import Optional

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from epinet_tools.data.types import NetworkOrder
from epinet_tools.epidemic.simulate import simulate_si, cumulative_curve
from epinet_tools.inference.mcmc import Trace, BRG
from epinet_tools.network.generate import generate_pa_network


QUANTILES = (0.025, 0.5, 0.975)


def simulate_predictive_curves(
        trace: Trace,
        m: int,
        grid: np.ndarray,
        n_sims: int,
        rng: np.random.Generator,
        gamma: Optional[float] = None,
        progress_bar: bool = False,
) -> np.ndarray:
    """
    :param gamma: Recency weight overriding the sampled draws. None uses the gamma of each draw, which is the pinned
        value when gamma was fixed during fitting.
    :return: n_sims x len(grid) array of cumulative infection counts.
    """
    if trace.model == BRG:
        raise ValueError("Predictive curves are simulated from preferential attachment traces.")
    if trace.kept_n < 1:
        raise ValueError("The trace has no kept iterations.")
    if n_sims < 1:
        raise ValueError(f"n_sims must be positive (received {n_sims}).")

    draws = trace.samples.iloc[rng.integers(0, trace.kept_n, size=n_sims)]
    sigma = NetworkOrder.identity(m)
    curves = np.empty((n_sims, len(grid)), dtype=int)

    iterator = enumerate(draws.itertuples(index=False))
    if progress_bar:
        iterator = tqdm(iterator, total=n_sims, unit='sims', desc='Predictive')
    for k, draw in iterator:
        g, _ = generate_pa_network(m, draw.mu, draw.gamma if gamma is None else gamma, sigma, rng)
        epidemic = simulate_si(g, draw.beta, rng)
        curves[k] = cumulative_curve(epidemic.times, grid)
    return curves


def posterior_predictive_curves(
        trace: Trace,
        m: int,
        grid: np.ndarray,
        n_sims: int,
        rng: np.random.Generator,
        gamma: Optional[float] = None,
        progress_bar: bool = False,
) -> pd.DataFrame:
    """
    Pointwise 2.5%, 50% and 97.5% quantiles of simulated cumulative infection counts.
    :return: DataFrame with columns time, lower, median, upper.
    """
    curves = simulate_predictive_curves(trace, m, grid, n_sims, rng, gamma, progress_bar)
    lower, median, upper = np.quantile(curves, QUANTILES, axis=0)
    return pd.DataFrame({'time': np.asarray(grid, dtype=float), 'lower': lower, 'median': median, 'upper': upper})


def band_coverage(observed: np.ndarray, band: pd.DataFrame) -> float:
    """Fraction of grid points at which an observed curve lies inside the predictive band."""
    observed = np.asarray(observed)
    inside = (observed >= band['lower'].to_numpy()) & (observed <= band['upper'].to_numpy())
    return float(inside.mean())
