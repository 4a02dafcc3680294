"""
Reading and writing epidemic data sets and sampler output as CSV files.
Every file uses 1-based node labels; the Python API uses 0-based labels.
"""

import os
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from epinet_tools.data.types import DataException, DatasetException, EpidemicData, Graph
from epinet_tools.data.dataset import normalize_and_relabel, with_known_edges
from epinet_tools.analysis.summary import PosteriorSummary, BRGSummary, format_mean_sd, mu_star
from epinet_tools.inference.mcmc import Trace, BRG


FILE_PATH = Union[str, os.PathLike]

EPIDEMIC_COLUMNS = ['node_id', 'infection_time', 'infector_id']
KNOWN_EDGE_COLUMNS = ['i', 'j', 'present']
PA_TRACE_COLUMNS = ['iter', 'beta', 'mu', 'gamma', 'alpha', 'log_joint']
BRG_TRACE_COLUMNS = ['iter', 'beta', 'p', 'log_joint']
SUMMARY_COLUMNS = ['epidemic', 'm', 'beta', 'mu', 'correlation', 'alpha']
BRG_SUMMARY_COLUMNS = ['epidemic', 'm', 'beta', 'p', 'correlation', 'average_degree']


def _read_csv(path: FILE_PATH, columns: List[str]) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetException(f"Unable to read {path}: {e}") from e
    if list(df.columns) != columns:
        raise DatasetException(f"{path}: expected header {','.join(columns)} (found {','.join(df.columns)}).")
    return df


def _line_error(path: FILE_PATH, row_index: int, message: str) -> DatasetException:
    # Header is line 1
    return DatasetException(f"{path}, line {row_index + 2}: {message}")


def load_epidemic_csv(path: FILE_PATH, known_edges_path: Optional[FILE_PATH] = None) -> EpidemicData:
    """
    Load an epidemic from rows node_id,infection_time,infector_id (infector empty for the root).
    :param path: The epidemic CSV file.
    :param known_edges_path: Optional CSV of i,j,present rows using the relabelled 1-based epidemic labels.
    :return: The normalised data set.
    """
    df = _read_csv(path, EPIDEMIC_COLUMNS)
    raw = []
    for k, row in enumerate(df.itertuples(index=False)):
        if not row.node_id.strip():
            raise _line_error(path, k, "missing node_id.")
        try:
            time = float(row.infection_time)
        except ValueError:
            raise _line_error(path, k, f"infection_time '{row.infection_time}' is not a number.")
        if not np.isfinite(time):
            raise _line_error(path, k, f"infection_time '{row.infection_time}' is not finite.")
        infector = row.infector_id.strip()
        raw.append((row.node_id.strip(), time, infector if infector else None))

    data = normalize_and_relabel(raw)
    if known_edges_path is not None:
        data = with_known_edges(data, load_known_edges_csv(known_edges_path, data.m))
    return data


def load_known_edges_csv(path: FILE_PATH, m: int) -> Dict[Tuple[int, int], bool]:
    df = _read_csv(path, KNOWN_EDGE_COLUMNS)
    known = {}
    for k, row in enumerate(df.itertuples(index=False)):
        try:
            i, j, present = int(row.i), int(row.j), int(row.present)
        except ValueError:
            raise _line_error(path, k, "i, j and present must be integers.")
        if not (1 <= i <= m and 1 <= j <= m):
            raise _line_error(path, k, f"labels must lie in 1..{m} (found {i}, {j}).")
        if present not in (0, 1):
            raise _line_error(path, k, f"present must be 0 or 1 (found {present}).")
        known[(i - 1, j - 1)] = bool(present)
    return known


def _to_csv(df: pd.DataFrame, path: FILE_PATH) -> None:
    try:
        df.to_csv(path, index=False)
    except OSError as e:
        raise DataException(f"Unable to write {path}: {e}") from e


def write_epidemic_csv(path: FILE_PATH, data: EpidemicData) -> None:
    labels = data.labels if data.labels is not None else [str(k + 1) for k in range(data.m)]
    infector = [labels[i] if i >= 0 else '' for i in data.tree.infector]
    _to_csv(pd.DataFrame({
        'node_id': labels,
        'infection_time': data.times + data.offset,
        'infector_id': infector,
    }), path)


def write_known_edges_csv(path: FILE_PATH, known: Dict[Tuple[int, int], bool]) -> None:
    rows = [(i + 1, j + 1, int(present)) for (i, j), present in sorted(known.items())]
    _to_csv(pd.DataFrame(rows, columns=KNOWN_EDGE_COLUMNS), path)


def write_edges_csv(path: FILE_PATH, g: Graph) -> None:
    """Present edges of a graph as 1-based i,j rows."""
    _to_csv(pd.DataFrame(g.edges() + 1, columns=['i', 'j']), path)


def trace_table(trace: Trace) -> pd.DataFrame:
    if trace.model == BRG:
        return trace.samples[BRG_TRACE_COLUMNS]
    table = trace.samples.copy()
    table['alpha'] = table['beta'] * mu_star(table['mu'].to_numpy())
    return table[PA_TRACE_COLUMNS]


def write_trace(path: FILE_PATH, trace: Trace) -> None:
    if trace.kept_n == 0:
        raise DataException(f"Refusing to write an empty trace to {path}.")
    _to_csv(trace_table(trace), path)


def read_trace(path: FILE_PATH) -> Trace:
    """Read a trace written by write_trace. The edge tally is not stored in the trace file and is left empty."""
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataException(f"Unable to read {path}: {e}") from e

    if list(df.columns) == PA_TRACE_COLUMNS:
        model, samples = 'pa', df.drop(columns='alpha')
    elif list(df.columns) == BRG_TRACE_COLUMNS:
        model, samples = BRG, df
    else:
        raise DataException(f"{path} is not a trace file (columns {','.join(df.columns)}).")
    return Trace(samples=samples, edge_tally=np.zeros((0, 0), dtype=np.int64), acceptance={}, proposal_sd={},
                 model=model)


def summary_row(epidemic: str, m: int, summary: PosteriorSummary, digits: int = 3) -> Dict[str, str]:
    return {
        'epidemic': epidemic,
        'm': m,
        'beta': format_mean_sd(summary.beta_mean, summary.beta_sd, digits),
        'mu': format_mean_sd(summary.mu_mean, summary.mu_sd, digits),
        'correlation': f'{summary.corr_beta_mustar:.{digits}f}',
        'alpha': format_mean_sd(summary.alpha_mean, summary.alpha_sd, digits),
    }


def brg_summary_row(epidemic: str, m: int, summary: BRGSummary, digits: int = 3) -> Dict[str, str]:
    return {
        'epidemic': epidemic,
        'm': m,
        'beta': format_mean_sd(summary.beta_mean, summary.beta_sd, digits),
        'p': format_mean_sd(summary.p_mean, summary.p_sd, digits),
        'correlation': f'{summary.corr_beta_p:.{digits}f}',
        'average_degree': f'{summary.average_degree:.{digits}f}',
    }


def write_summary(path: FILE_PATH, rows: List[Dict[str, str]]) -> None:
    """Write summary rows (from summary_row or brg_summary_row) in the column order of their kind."""
    if not rows:
        raise DataException(f"Refusing to write an empty summary to {path}.")
    columns = BRG_SUMMARY_COLUMNS if 'p' in rows[0] else SUMMARY_COLUMNS
    _to_csv(pd.DataFrame(rows, columns=columns), path)


def write_edge_probs(path: FILE_PATH, matrix: np.ndarray) -> None:
    """One i,j,prob row per unordered pair (i < j, 1-based), in lexicographic order."""
    i, j = np.triu_indices(matrix.shape[0], k=1)
    _to_csv(pd.DataFrame({'i': i + 1, 'j': j + 1, 'prob': matrix[i, j]}), path)


def write_table(path: FILE_PATH, table: pd.DataFrame) -> None:
    _to_csv(table, path)
