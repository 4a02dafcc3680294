"""
Shared data types.

Node labels are 0-based throughout the Python API (label k is the (k+1)-th individual to be infected).
Files and the command line use 1-based labels; conversion happens in epinet_tools.data.files.
"""

import numpy as np
from typing import NamedTuple, Optional, Dict, Tuple, List, Iterable

from scipy.sparse.csgraph import connected_components


class DataException(Exception):
    """Exception for data-related errors."""
    def __init__(self, *args):
        super(DataException, self).__init__(*args)


class DatasetException(DataException):
    """Exception raised when an epidemic data set cannot be constructed or fails validation."""
    def __init__(self, message: str, violations: Optional[List[str]] = None):
        self.violations = violations if violations is not None else []
        if self.violations:
            message = message + '\n' + '\n'.join(f'  - {v}' for v in self.violations)
        super(DatasetException, self).__init__(message)


class Graph:
    """
    Undirected simple graph over the nodes 0..m-1, stored as a symmetric Boolean adjacency matrix.
    The number of present edges is cached and kept current by set_edge.
    """

    def __init__(self, m: int, adj: Optional[np.ndarray] = None):
        if m < 2:
            raise ValueError(f"A graph needs at least two nodes (received m={m}).")

        if adj is None:
            adj = np.zeros((m, m), dtype=bool)
        else:
            adj = np.array(adj, dtype=bool)
            if adj.shape != (m, m):
                raise ValueError(f"Adjacency matrix has shape {adj.shape}; expected {(m, m)}.")
            if np.any(np.diag(adj)):
                raise ValueError("Self-loops are not permitted.")
            if not np.array_equal(adj, adj.T):
                raise ValueError("Adjacency matrix must be symmetric.")

        self._adj = adj
        self.edge_count = self.count_edges()

    @classmethod
    def from_edges(cls, m: int, edges: Iterable[Tuple[int, int]]) -> 'Graph':
        g = cls(m)
        for i, j in edges:
            g.set_edge(i, j, True)
        return g

    @classmethod
    def complete(cls, m: int) -> 'Graph':
        return cls(m, ~np.eye(m, dtype=bool))

    @property
    def m(self) -> int:
        return self._adj.shape[0]

    @property
    def adj(self) -> np.ndarray:
        """Read-only view of the adjacency matrix. Use set_edge to modify the graph."""
        view = self._adj.view()
        view.flags.writeable = False
        return view

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._adj[i, j])

    def set_edge(self, i: int, j: int, present: bool) -> bool:
        """
        Set the presence of the edge {i, j}.
        :return: Whether the graph changed.
        """
        if i == j:
            raise ValueError(f"Self-loop on node {i} is not representable.")
        present = bool(present)
        if self._adj[i, j] == present:
            return False
        self._adj[i, j] = present
        self._adj[j, i] = present
        self.edge_count += 1 if present else -1
        return True

    def toggle_edge(self, i: int, j: int) -> bool:
        """Flip the edge {i, j} and return its new value."""
        new_value = not self._adj[i, j]
        self.set_edge(i, j, new_value)
        return new_value

    def count_edges(self) -> int:
        """Recount the present edges from scratch."""
        return int(np.count_nonzero(np.triu(self._adj, k=1)))

    def edges(self) -> np.ndarray:
        """Kx2 array of present edges (i < j) in lexicographic order."""
        i, j = np.nonzero(np.triu(self._adj, k=1))
        return np.stack([i, j], axis=1)

    def degrees(self) -> np.ndarray:
        return self._adj.sum(axis=0)

    def is_connected(self) -> bool:
        n_components, _ = connected_components(self._adj, directed=False)
        return n_components == 1

    def relabel(self, order: np.ndarray) -> 'Graph':
        """
        Produce a relabelled graph in which new node k corresponds to old node order[k].
        """
        order = np.asarray(order)
        return Graph(self.m, self._adj[np.ix_(order, order)])

    def copy(self) -> 'Graph':
        return Graph(self.m, self._adj.copy())

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and np.array_equal(self._adj, other._adj)

    def __repr__(self) -> str:
        return f'Graph(m={self.m}, edge_count={self.edge_count})'


class TransmissionTree(NamedTuple):
    """
    Who-infected-whom. infector[j] is the label of the individual that infected j; infector[0] is -1 (the root).
    """
    infector: np.ndarray

    @classmethod
    def from_infectors(cls, infector: Iterable[int]) -> 'TransmissionTree':
        return cls(infector=np.asarray(list(infector), dtype=int))

    @property
    def m(self) -> int:
        return self.infector.shape[0]

    def edges(self) -> np.ndarray:
        """(m-1)x2 array of (infector, infectee) pairs ordered by infectee."""
        infectee = np.arange(1, self.m)
        return np.stack([self.infector[1:], infectee], axis=1)

    def as_graph(self) -> Graph:
        return Graph.from_edges(self.m, self.edges())

    def degrees(self) -> np.ndarray:
        return self.as_graph().degrees()


class EpidemicData(NamedTuple):
    """
    Normalised observation of a single epidemic.
    :param times: Infection times shifted so that times[0] == 0, strictly increasing.
    :param tree: The observed transmission tree.
    :param known_edges: Optional partial observation of the latent graph: {(i, j) with i < j: present}.
        Pairs that are absent from the map are unknown.
    :param labels: Original identifiers of each node (for provenance when writing results).
    :param offset: The original infection time of the root before shifting.
    """
    times: np.ndarray
    tree: TransmissionTree
    known_edges: Optional[Dict[Tuple[int, int], bool]] = None
    labels: Optional[List[str]] = None
    offset: float = 0.0

    @property
    def m(self) -> int:
        return self.times.shape[0]

    def known(self) -> Dict[Tuple[int, int], bool]:
        return self.known_edges if self.known_edges is not None else {}


class NetworkOrder(NamedTuple):
    """sigma[k] is the label of the (k+1)-th node to enter the network."""
    sigma: np.ndarray

    @classmethod
    def identity(cls, m: int) -> 'NetworkOrder':
        return cls(sigma=np.arange(m))

    @property
    def m(self) -> int:
        return self.sigma.shape[0]

    def positions(self) -> np.ndarray:
        """Inverse permutation: positions()[label] is the entry position of the node."""
        pos = np.empty_like(self.sigma)
        pos[self.sigma] = np.arange(self.sigma.shape[0])
        return pos

    def is_valid(self) -> bool:
        return np.array_equal(np.sort(self.sigma), np.arange(self.sigma.shape[0]))


class ParamState(NamedTuple):
    """Epidemic and network parameters."""
    beta: float  # Infection rate per edge per day
    mu: float  # Censored Poisson parameter for the number of new edges
    gamma: float  # Mixture weight of the recency component in the attachment weights

    def validate(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be positive (received {self.beta}).")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive (received {self.mu}).")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1] (received {self.gamma}).")


class Priors(NamedTuple):
    """Gamma(shape, rate) priors for beta and mu. gamma has a U[0, 1] prior and sigma a uniform prior."""
    a_beta: float = 1.0
    b_beta: float = 0.001
    a_mu: float = 1.0
    b_mu: float = 0.001

    def validate(self) -> None:
        for name, value in self._asdict().items():
            if not value > 0:
                raise ValueError(f"Prior hyperparameter {name} must be positive (received {value}).")


class BRGParams(NamedTuple):
    """Bernoulli random graph: edge inclusion probability p with a Beta(a_p, b_p) prior."""
    p: float
    a_p: float = 1.0
    b_p: float = 1.0

    def validate(self) -> None:
        if not 0 < self.p < 1:
            raise ValueError(f"p must lie in (0, 1) (received {self.p}).")
        if not (self.a_p > 0 and self.b_p > 0):
            raise ValueError("Beta prior hyperparameters must be positive.")


class GenerationRecord(NamedTuple):
    """What happened when the node at entry position step-1 joined the network (step is 1-based, >= 3)."""
    step: int
    x: int  # Number of new edges
    selected: np.ndarray  # Entry positions (0-based) chosen, in draw order
    weights: np.ndarray  # Attachment weights over the step-1 earlier positions


class ValidationReport(NamedTuple):
    violations: List[str]

    @property
    def passed(self) -> bool:
        return not self.violations
