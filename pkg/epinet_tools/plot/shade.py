"""
Plotting helpers for predictive bands and the joint posterior of beta and mu_star.
"""

import numpy as np
import pandas as pd
from typing import Optional, Dict
from matplotlib import pyplot as plt

from epinet_tools.analysis.summary import mu_star
from epinet_tools.inference.mcmc import Trace


def shade_band(ax: plt.Axes, band: pd.DataFrame, plot_kws: Optional[Dict] = None) -> None:
    """Shade a predictive band (columns time, lower, upper) and draw its median if present."""
    if plot_kws is None:
        plot_kws = {'alpha': 0.3, 'color': 'tab:blue'}

    ax.fill_between(band['time'], band['lower'], band['upper'], step='post', **plot_kws)
    if 'median' in band:
        ax.step(band['time'], band['median'], where='post', color=plot_kws.get('color', 'tab:blue'), lw=1)


def shade_mask(ax: plt.Axes, mask: np.ndarray, ts: np.ndarray, plot_kws: Optional[Dict] = None) -> None:
    """Apply vertical shading over the runs of a Boolean mask."""
    if plot_kws is None:
        plot_kws = {'alpha': 0.2, 'color': 'tab:red'}
    if not np.issubdtype(mask.dtype, np.bool_):
        raise NotImplementedError(f"shade_mask is not implemented for mask arrays with dtype {mask.dtype}")

    edges = np.flatnonzero(np.diff(mask.astype(int))) + 1
    edges = np.concatenate(([0], edges, [mask.shape[0] - 1]))
    for begin, end in zip(edges[:-1], edges[1:]):
        if mask[begin]:
            ax.axvspan(ts[begin], ts[end], **plot_kws)


def plot_predictive(ax: plt.Axes, band: pd.DataFrame, observed: np.ndarray) -> None:
    """Observed cumulative curve over the predictive band, with grid intervals outside the band highlighted."""
    shade_band(ax, band)
    ax.step(band['time'], observed, where='post', color='k', lw=1.5, label='Observed')
    outside = (observed < band['lower'].to_numpy()) | (observed > band['upper'].to_numpy())
    shade_mask(ax, outside, band['time'].to_numpy())
    ax.set_xlabel('Time (days)')
    ax.set_ylabel('Cumulative infections')


def plot_joint_alpha(ax: plt.Axes, trace: Trace, alpha_line: Optional[float] = None, plot_kws: Optional[Dict] = None):
    """Scatter of the (beta, mu_star) draws with the curve beta * mu_star = alpha_line."""
    if plot_kws is None:
        plot_kws = {'s': 4, 'alpha': 0.3}

    beta = trace.samples['beta'].to_numpy()
    ms = mu_star(trace.samples['mu'].to_numpy())
    ax.scatter(beta, ms, **plot_kws)
    if alpha_line is not None:
        xs = np.linspace(beta.min(), beta.max(), 200)
        ax.plot(xs, alpha_line / xs, color='k', lw=1)
    ax.set_xlabel('beta')
    ax.set_ylabel('mu*')
