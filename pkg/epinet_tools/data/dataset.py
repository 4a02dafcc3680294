"""
Construction, normalisation and validation of epidemic data sets.
"""

import numpy as np
from typing import List, Tuple, Optional, Hashable, Dict, Sequence

from epinet_tools.data.types import (
    EpidemicData,
    TransmissionTree,
    ValidationReport,
    DatasetException,
    Graph,
)


RawRecord = Tuple[Hashable, float, Optional[Hashable]]


def validate_dataset(d: EpidemicData) -> ValidationReport:
    """Check the structural invariants of an epidemic data set. Failures are reported, not raised."""
    violations = []
    m = d.m
    times = np.asarray(d.times, dtype=float)

    if m < 2:
        violations.append(f'The population must contain at least two individuals (m={m}).')
        if m == 0:
            return ValidationReport(violations)
    if times[0] != 0:
        violations.append(f'The first infection time must be 0 (found {times[0]}).')
    bad = np.nonzero(np.diff(times) <= 0)[0]
    for k in bad:
        violations.append(f'Infection times are not strictly increasing at nodes {k + 1} and {k + 2}.')

    infector = d.tree.infector
    if d.tree.m != m:
        violations.append(f'The transmission tree covers {d.tree.m} nodes but there are {m} infection times.')
        return ValidationReport(violations)
    if infector[0] != -1:
        violations.append('Node 1 must not have an infector.')
    for j in range(1, m):
        if not 0 <= infector[j] < j:
            violations.append(f'The infector of node {j + 1} ({infector[j] + 1}) is not an earlier infection.')

    for (i, j), present in d.known().items():
        if not 0 <= i < j < m:
            violations.append(f'Known edge ({i + 1}, {j + 1}) is not an ordered pair of valid labels.')
        elif not present and infector[j] == i:
            violations.append(f'Known edge ({i + 1}, {j + 1}) is marked absent but is a transmission tree edge.')

    if not violations and not tree_is_spanning(d.tree):
        violations.append('The transmission tree does not span all nodes.')

    return ValidationReport(violations)


def tree_is_spanning(tree: TransmissionTree) -> bool:
    """The undirected tree edges form a connected acyclic graph over all nodes."""
    m = tree.m
    if np.any(tree.infector[1:] < 0):
        return False
    g = tree.as_graph()
    return g.edge_count == m - 1 and g.is_connected()


def normalize_and_relabel(raw: Sequence[RawRecord]) -> EpidemicData:
    """
    Build an epidemic data set from raw (identifier, infection time, infector identifier) records.
    Nodes are relabelled in ascending order of infection time and times are shifted so the first infection is at 0.
    :param raw: One record per individual. Exactly one record must have a None infector.
    :return: The normalised data set. Original identifiers are kept in the labels field.
    """
    if len(raw) < 2:
        raise DatasetException(f'An epidemic needs at least two individuals (received {len(raw)}).')

    ids = [str(r[0]) for r in raw]
    if len(set(ids)) != len(ids):
        raise DatasetException('Duplicate individual identifiers.', _duplicates(ids))

    times = np.array([float(r[1]) for r in raw])
    if np.unique(times).shape[0] != times.shape[0]:
        tied = [f'{i} at time {t}' for i, t in zip(ids, times) if np.sum(times == t) > 1]
        raise DatasetException('Tied infection times are not permitted.', tied)

    roots = [i for i, r in zip(ids, raw) if _is_missing(r[2])]
    if len(roots) != 1:
        raise DatasetException(f'Expected exactly one record without an infector; found {len(roots)}.', roots)

    order = np.argsort(times, kind='stable')
    label_of: Dict[str, int] = {ids[k]: new for new, k in enumerate(order)}

    infector = np.full(len(raw), -1, dtype=int)
    missing = []
    for k, r in enumerate(raw):
        if _is_missing(r[2]):
            continue
        source = str(r[2])
        if source not in label_of:
            missing.append(f'{ids[k]} references unknown infector {source}')
            continue
        infector[label_of[ids[k]]] = label_of[source]
    if missing:
        raise DatasetException('Infector references could not be resolved.', missing)

    sorted_times = times[order]
    data = EpidemicData(
        times=sorted_times - sorted_times[0],
        tree=TransmissionTree(infector=infector),
        labels=[ids[k] for k in order],
        offset=float(sorted_times[0]),
    )

    report = validate_dataset(data)
    if not report.passed:
        raise DatasetException('The epidemic data set is invalid.', report.violations)
    return data


def with_known_edges(d: EpidemicData, known_edges: Dict[Tuple[int, int], bool]) -> EpidemicData:
    """Attach a (validated) partial observation of the latent graph. Pairs are reordered so that i < j."""
    known = {}
    for (i, j), present in known_edges.items():
        if i == j:
            raise DatasetException(f'Known edge ({i + 1}, {j + 1}) is a self-loop.')
        known[(min(i, j), max(i, j))] = bool(present)

    d = d._replace(known_edges=known)
    report = validate_dataset(d)
    if not report.passed:
        raise DatasetException('Known edges are inconsistent with the epidemic data.', report.violations)
    return d


def clamp_known_proportion(
        truth: Graph,
        tree: TransmissionTree,
        proportion: float,
        rng: np.random.Generator,
) -> Dict[Tuple[int, int], bool]:
    """
    Reveal a uniformly random subset of the non-tree pairs of a simulated graph.
    :param truth: The simulated latent graph.
    :param tree: The transmission tree (tree pairs are always known and are not included in the result).
    :param proportion: Fraction of the non-tree pairs to reveal, in [0, 1].
    :param rng: Random generator that controls which pairs are revealed.
    :return: Map of revealed pairs (i < j) to their true presence.
    """
    if not 0 <= proportion <= 1:
        raise ValueError(f'The proportion of known pairs must lie in [0, 1] (received {proportion}).')

    m = truth.m
    is_tree = tree.as_graph().adj
    i, j = np.triu_indices(m, k=1)
    free = ~is_tree[i, j]
    i, j = i[free], j[free]

    n_known = int(round(proportion * i.shape[0]))
    chosen = np.sort(rng.choice(i.shape[0], size=n_known, replace=False))
    return {(int(i[k]), int(j[k])): truth.has_edge(i[k], j[k]) for k in chosen}


def _is_missing(value) -> bool:
    if value is None:
        return True
    if isinstance(value, float) and np.isnan(value):
        return True
    return isinstance(value, str) and not value.strip()


def _duplicates(ids: List[str]) -> List[str]:
    seen, dup = set(), []
    for i in ids:
        if i in seen and i not in dup:
            dup.append(i)
        seen.add(i)
    return dup
