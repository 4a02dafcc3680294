"""
Batch-wise adaptation of random walk proposal standard deviations during burn-in.
After every batch of iterations the log standard deviation moves towards the target acceptance rate with a step
size that shrinks with the batch index. Adaptation stops at the end of burn-in so the kept chain is a fixed kernel.
"""

import numpy as np


BATCH_SIZE: int = 50
MAX_STEP: float = 0.25


def adapt_proposal(current_sd: float, batch_accept_rate: float, target: float, batch_index: int) -> float:
    """
    :param current_sd: Proposal standard deviation used during the batch.
    :param batch_accept_rate: Fraction of proposals accepted during the batch.
    :param target: Target acceptance rate.
    :param batch_index: 1-based index of the completed batch.
    :return: The standard deviation for the next batch.
    """
    step = min(MAX_STEP, batch_index ** -0.5)
    return float(current_sd * np.exp(step * (batch_accept_rate - target)))


class ProposalTuner:
    """Tracks acceptances for a single random walk move and adapts its scale at batch boundaries."""

    def __init__(self, sd: float, target: float, batch_size: int = BATCH_SIZE):
        if not sd > 0:
            raise ValueError(f"Proposal standard deviation must be positive (received {sd}).")
        self.sd = sd
        self.target = target
        self.batch_size = batch_size
        self.batch_index = 0
        self._batch_accepted = 0
        self._batch_proposed = 0

    def record(self, accepted: bool) -> None:
        self._batch_accepted += int(accepted)
        self._batch_proposed += 1

    def end_iteration(self, iteration: int, burnin: int) -> None:
        """
        Call once per iteration (0-based). Adapts when a batch completes inside burn-in.
        """
        if iteration >= burnin or (iteration + 1) % self.batch_size != 0:
            return
        if self._batch_proposed > 0:
            self.batch_index += 1
            rate = self._batch_accepted / self._batch_proposed
            self.sd = adapt_proposal(self.sd, rate, self.target, self.batch_index)
        self._batch_accepted = 0
        self._batch_proposed = 0
