"""
Simulation studies: for every combination of network size and true parameters, simulate a network and an SI epidemic,
reveal a proportion of the non-tree pairs, fit the preferential attachment model and compare the posterior to the
truth. Cells run in parallel processes; a failing cell is recorded in the report and the study continues.
"""

import os
import logging
import traceback
from functools import partial
from itertools import product
from typing import NamedTuple, List, Dict, Any, Optional

import numpy as np
import pandas as pd
from tqdm.auto import tqdm
from tqdm.contrib.concurrent import process_map

from epinet_tools.io import make_directory
from epinet_tools.data.types import DataException, Priors
from epinet_tools.data.dataset import clamp_known_proportion, with_known_edges
from epinet_tools.data import files
from epinet_tools.analysis.summary import summarize_trace, credible_interval, edge_posterior, mu_star, alpha
from epinet_tools.epidemic.simulate import simulate_si
from epinet_tools.inference.mcmc import McmcConfig, run_chain
from epinet_tools.network.generate import sample_prior_network


logger = logging.getLogger(__name__)

THREADS_ENV = 'EPINET_THREADS'
REPORT_FILE = 'study_report.csv'
REPORTED_PARAMETERS = ('beta', 'mu', 'gamma', 'alpha')

# Independent random streams derived from each cell seed
SIMULATION_STREAM, SELECTION_STREAM, CHAIN_STREAM = 0, 1, 2


class StudyGrid(NamedTuple):
    m_values: List[int]
    beta_values: List[float]
    mu_values: List[float]
    gamma_values: List[float]
    known_proportions: List[float]  # Fractions of the non-tree pairs revealed to the sampler
    replicates: int = 1
    base_seed: int = 0
    config: McmcConfig = McmcConfig()
    priors: Priors = Priors()

    def validate(self) -> None:
        for name in ('m_values', 'beta_values', 'mu_values', 'gamma_values', 'known_proportions'):
            if len(getattr(self, name)) == 0:
                raise DataException(f"The study grid needs at least one value in {name}.")
        if any(not 0 <= p <= 1 for p in self.known_proportions):
            raise DataException(f"Known proportions must lie in [0, 1] (received {self.known_proportions}).")
        if any(m < 3 for m in self.m_values):
            raise DataException(f"Study networks need at least three nodes (received {self.m_values}).")
        if any(not b > 0 for b in self.beta_values) or any(not mu > 0 for mu in self.mu_values):
            raise DataException("True beta and mu values must be positive.")
        if any(not 0 <= g <= 1 for g in self.gamma_values):
            raise DataException(f"True gamma values must lie in [0, 1] (received {self.gamma_values}).")
        if self.replicates < 1:
            raise DataException(f"replicates must be at least 1 (received {self.replicates}).")
        self.config.validate()
        self.priors.validate()


class StudyCell(NamedTuple):
    index: int
    m: int
    beta: float
    mu: float
    gamma: float
    proportion: float
    replicate: int
    seed: int

    @property
    def name(self) -> str:
        return f'cell_{self.index:04d}'

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])


def study_cells(grid: StudyGrid) -> List[StudyCell]:
    """Cartesian product of the grid values and replicates, in a fixed order."""
    combos = product(
        grid.m_values, grid.beta_values, grid.mu_values, grid.gamma_values, grid.known_proportions,
        range(grid.replicates),
    )
    return [
        StudyCell(index, m, beta, mu, gamma, proportion, replicate, seed=grid.base_seed + index)
        for index, (m, beta, mu, gamma, proportion, replicate) in enumerate(combos)
    ]


def thread_limit() -> int:
    """Worker processes for study cells, capped by the EPINET_THREADS environment variable."""
    value = os.environ.get(THREADS_ENV)
    if value is None:
        return os.cpu_count() or 1
    try:
        n = int(value)
    except ValueError:
        raise DataException(f"{THREADS_ENV} must be an integer (found '{value}').")
    return max(n, 1)


def run_cell(cell: StudyCell, grid: StudyGrid, out_dir: str) -> Dict[str, Any]:
    """Simulate, fit and summarise one cell. Output files are written to their own directory."""
    cell_dir = os.path.join(out_dir, cell.name)
    make_directory(cell_dir, clear=True)

    simulation_rng = cell.rng(SIMULATION_STREAM)
    truth, _ = sample_prior_network(cell.m, cell.mu, cell.gamma, simulation_rng)
    epidemic = simulate_si(truth, cell.beta, simulation_rng)
    data = epidemic.to_data()
    known = clamp_known_proportion(epidemic.graph, epidemic.tree, cell.proportion, cell.rng(SELECTION_STREAM))
    if known:
        data = with_known_edges(data, known)

    trace = run_chain(data, grid.priors, grid.config, cell.rng(CHAIN_STREAM))
    summary = summarize_trace(trace)

    files.write_epidemic_csv(os.path.join(cell_dir, 'epidemic.csv'), data)
    files.write_edges_csv(os.path.join(cell_dir, 'network.csv'), epidemic.graph)
    files.write_known_edges_csv(os.path.join(cell_dir, 'known_edges.csv'), known)
    files.write_trace(os.path.join(cell_dir, 'trace.csv'), trace)
    files.write_summary(os.path.join(cell_dir, 'summary.csv'), [files.summary_row(cell.name, cell.m, summary)])
    files.write_edge_probs(os.path.join(cell_dir, 'edge_probs.csv'), edge_posterior(trace))

    draws = {
        'beta': trace.samples['beta'].to_numpy(),
        'mu': trace.samples['mu'].to_numpy(),
        'gamma': trace.samples['gamma'].to_numpy(),
    }
    draws['alpha'] = draws['beta'] * mu_star(draws['mu'])
    true_values = {'beta': cell.beta, 'mu': cell.mu, 'gamma': cell.gamma, 'alpha': alpha(cell.beta, cell.mu)}

    row: Dict[str, Any] = {}
    for name in REPORTED_PARAMETERS:
        lower, upper = credible_interval(draws[name])
        row[f'{name}_true'] = true_values[name]
        row[f'{name}_mean'] = float(np.mean(draws[name]))
        row[f'{name}_lower'] = lower
        row[f'{name}_upper'] = upper
    row['corr_beta_mustar'] = summary.corr_beta_mustar
    row['n_known'] = len(known)
    row['kept_n'] = trace.kept_n
    return row


def run_cell_safe(cell: StudyCell, grid: StudyGrid, out_dir: str) -> Dict[str, Any]:
    """Run a cell, recording the traceback instead of raising."""
    row = {**cell._asdict(), 'selection_stream': SELECTION_STREAM}
    try:
        row.update(run_cell(cell, grid, out_dir))
        row['error'] = ''
    except Exception:
        logger.error("Study cell %s failed.", cell.name)
        row['error'] = traceback.format_exc()
    return row


def run_study(
        grid: StudyGrid,
        out_dir: str,
        max_workers: Optional[int] = None,
        progress_bar: bool = True,
) -> pd.DataFrame:
    """
    Run every cell of a study grid.
    :param grid: The study grid and the sampler configuration shared by every cell.
    :param out_dir: Directory receiving one sub-directory per cell and the study report.
    :param max_workers: Number of worker processes (defaults to the EPINET_THREADS cap). 1 runs in-process.
    :param progress_bar: Whether to display a tqdm progress bar over cells.
    :return: The study report, one row per cell (true value, posterior mean and central 95% interval per parameter).
    """
    grid.validate()
    make_directory(out_dir)
    cells = study_cells(grid)
    max_workers = thread_limit() if max_workers is None else max(1, max_workers)
    logger.info("Running %d study cells with %d worker(s).", len(cells), max_workers)

    run_cell_ = partial(run_cell_safe, grid=grid, out_dir=out_dir)
    if max_workers == 1:
        rows = list(map(run_cell_, tqdm(cells, desc='Study', unit='cells', disable=not progress_bar)))
    else:
        rows = process_map(
            run_cell_, cells, max_workers=max_workers, chunksize=1, desc='Study', unit='cells',
            disable=not progress_bar,
        )

    report = pd.DataFrame(rows)
    n_failed = int((report['error'] != '').sum())
    if n_failed:
        logger.warning("%d of %d study cells failed; see the error column of the report.", n_failed, len(cells))
    files.write_table(os.path.join(out_dir, REPORT_FILE), report)
    return report
