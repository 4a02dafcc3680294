import matplotlib
matplotlib.use('Agg')
import numpy as np
import pandas as pd
import pytest
from matplotlib import pyplot as plt

from epinet_tools.inference.mcmc import Trace
from epinet_tools.plot.shade import shade_band, shade_mask, plot_predictive, plot_joint_alpha


@pytest.fixture
def ax():
    fig, ax = plt.subplots()
    yield ax
    plt.close(fig)


@pytest.fixture
def band() -> pd.DataFrame:
    return pd.DataFrame({
        'time': [0.0, 1.0, 2.0, 3.0], 'lower': [1, 1, 2, 3], 'median': [1, 2, 3, 4], 'upper': [1, 3, 4, 5],
    })


def test_shade_mask_runs(ax):
    shade_mask(ax, np.array([True, True, False, True, True]), np.arange(5.0))
    assert len(ax.patches) == 2


def test_shade_mask_needs_boolean(ax):
    with pytest.raises(NotImplementedError):
        shade_mask(ax, np.array([0, 1, 1]), np.arange(3.0))


def test_plot_predictive_highlights_excursions(ax, band):
    plot_predictive(ax, band, np.array([1, 4, 3, 4]))
    assert len(ax.patches) == 1
    assert ax.get_ylabel() == 'Cumulative infections'


def test_shade_band_without_median(ax, band):
    shade_band(ax, band.drop(columns='median'))
    assert len(ax.lines) == 0


def test_plot_joint_alpha(ax):
    samples = pd.DataFrame({
        'iter': [1, 2], 'beta': [0.3, 0.5], 'mu': [4.0, 6.0], 'gamma': [0.0, 0.0], 'log_joint': [0.0, 0.0],
    })
    plot_joint_alpha(ax, Trace(samples, np.zeros((2, 2)), {}, {}), alpha_line=2.0)
    assert len(ax.lines) == 1
