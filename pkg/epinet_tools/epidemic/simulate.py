"""
Markovian SI epidemic on a fixed network.

Every edge between an infected and a susceptible node transmits at rate beta, so the next infection happens after an
exponential time with rate beta * (number of SI edges) and is carried by an SI edge chosen uniformly at random.
"""

import numpy as np
from typing import NamedTuple, Optional

from epinet_tools.data.types import Graph, TransmissionTree, EpidemicData, NetworkOrder, DataException


class SimulatedEpidemic(NamedTuple):
    """
    A simulated epidemic, already relabelled in infection order.
    :param times: Infection times with times[0] == 0.
    :param tree: Transmission tree in epidemic labels.
    :param graph: The network the epidemic ran on, in epidemic labels.
    :param order: order[k] is the original node label of the (k+1)-th infection.
    """
    times: np.ndarray
    tree: TransmissionTree
    graph: Graph
    order: np.ndarray

    @property
    def m(self) -> int:
        return self.times.shape[0]

    def to_data(self) -> EpidemicData:
        return EpidemicData(times=self.times, tree=self.tree)

    def relabel_order(self, sigma: NetworkOrder) -> NetworkOrder:
        """Express a network order given in original labels in epidemic labels."""
        epidemic_label = np.empty_like(self.order)
        epidemic_label[self.order] = np.arange(self.order.shape[0])
        return NetworkOrder(sigma=epidemic_label[sigma.sigma])


def simulate_si(
        g: Graph,
        beta: float,
        rng: np.random.Generator,
        initial: int = 0,
) -> SimulatedEpidemic:
    """
    Event-driven simulation of an SI epidemic until every node is infected.
    :param g: A connected network.
    :param beta: Infection rate per edge per day.
    :param rng: Random generator.
    :param initial: Label of the initially infected node.
    :return: The epidemic, relabelled so that labels follow infection order.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive (received {beta}).")
    if not g.is_connected():
        raise DataException("The epidemic cannot infect every node of a disconnected network.")

    m = g.m
    adj = g.adj
    infected = np.zeros(m, dtype=bool)
    infected[initial] = True
    si_count = adj[initial].astype(int)  # Infected neighbours of each node (only read for susceptibles)

    order = [initial]
    times = [0.0]
    infector_of = {initial: -1}
    t = 0.0
    for _ in range(m - 1):
        pressure = np.where(infected, 0, si_count)
        total = pressure.sum()
        t += rng.exponential(1 / (beta * total))

        infectee = rng.choice(m, p=pressure / total)
        candidates = np.nonzero(adj[infectee] & infected)[0]
        infector_of[infectee] = int(rng.choice(candidates))

        infected[infectee] = True
        si_count += adj[infectee]
        order.append(int(infectee))
        times.append(t)

    order = np.array(order)
    label = np.empty(m, dtype=int)
    label[order] = np.arange(m)
    infector = np.array([-1] + [label[infector_of[node]] for node in order[1:]])

    return SimulatedEpidemic(
        times=np.array(times),
        tree=TransmissionTree(infector=infector),
        graph=g.relabel(order),
        order=order,
    )


def cumulative_curve(times: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Number of individuals infected at or before each grid time (right-continuous step function)."""
    return np.searchsorted(np.sort(times), np.asarray(grid, dtype=float), side='right')


def default_grid(times: np.ndarray, n_points: int = 200, span: Optional[float] = None) -> np.ndarray:
    """Equally spaced time grid from 0 to the epidemic span."""
    span = float(np.max(times)) if span is None else span
    return np.linspace(0, span, n_points)
