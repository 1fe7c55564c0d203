"""
Deletion Channel for the Mesh Watermarking Toolkit
The (p_d, s_d) per-run deletion channel on bit streams and the memoryless symbol channel it induces
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from runlength_code import RunAlphabet, parse_runs
from watermark_errors import ChannelError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeletionChannelSpec:
    """Each run loses j trailing bits with probability p_d**j, 1 <= j <= s_d"""
    p_d: float
    s_d: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_d < 1.0:
            raise ChannelError(f"p_d must lie in [0, 1), got {self.p_d}")
        if self.s_d < 1:
            raise ChannelError("s_d must be at least 1")
        if sum(self.p_d ** j for j in range(1, self.s_d + 1)) >= 1.0:
            raise ChannelError(f"p_d={self.p_d} with s_d={self.s_d} gives deletion probabilities summing to 1 or more")

    def event_probabilities(self) -> np.ndarray:
        """P(j deletions in a run) for j = 0..s_d"""
        events = np.array([self.p_d ** j for j in range(1, self.s_d + 1)])
        return np.concatenate([[1.0 - events.sum()], events])


@dataclass(frozen=True, eq=False)
class DmcModel:
    """Runlength input symbols, attainable output lengths and P = [p(y|x)]"""
    input_lengths: np.ndarray
    output_lengths: np.ndarray
    transition: np.ndarray

    @property
    def costs(self) -> np.ndarray:
        return self.input_lengths.astype(np.float64)


def delete_from_runs(bits: Sequence[int], events: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Delete events[i] trailing bits from the i-th run; returns (output, deleted positions)"""
    bits = np.asarray(bits, dtype=np.int8)
    lengths = parse_runs(bits).lengths
    events = np.asarray(events, dtype=np.int64)
    if len(events) != len(lengths):
        raise ValueError(f"{len(events)} deletion events for {len(lengths)} runs")
    too_long = events >= lengths
    if np.any(too_long):
        logger.warning("%d runs are not longer than their deletion event; capping at run length - 1",
                       int(too_long.sum()))
        events = np.minimum(events, lengths - 1)
    ends = np.cumsum(lengths)
    positions = np.concatenate([np.arange(end - j, end) for end, j in zip(ends, events) if j > 0]
                               or [np.empty(0, dtype=np.int64)]).astype(np.int64)
    keep = np.ones(len(bits), dtype=bool)
    keep[positions] = False
    return bits[keep], positions


def apply_deletion_channel(bits: Sequence[int], spec: DeletionChannelSpec,
                           rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Pass a bit stream through the per-run deletion channel"""
    rng = np.random.default_rng(spec.rng_seed) if rng is None else rng
    bits = np.asarray(bits, dtype=np.int8)
    runs = len(parse_runs(bits))
    if spec.p_d == 0.0 or runs == 0:
        return bits.copy(), np.empty(0, dtype=np.int64)
    events = rng.choice(spec.s_d + 1, size=runs, p=spec.event_probabilities())
    return delete_from_runs(bits, events)


def dmc_matrix(alphabet: RunAlphabet, spec: DeletionChannelSpec) -> DmcModel:
    """Transition matrix from runlength symbols to received run lengths"""
    lengths = np.asarray(alphabet.run_lengths, dtype=np.int64)
    if lengths.min() <= spec.s_d:
        raise ChannelError(f"run lengths must exceed s_d={spec.s_d}")
    outputs = np.unique(np.concatenate([lengths - j for j in range(spec.s_d + 1)]))
    column = {int(y): i for i, y in enumerate(outputs)}
    law = spec.event_probabilities()
    transition = np.zeros((len(lengths), len(outputs)))
    for row, length in enumerate(lengths):
        for j, probability in enumerate(law):
            transition[row, column[int(length) - j]] += probability
    return DmcModel(lengths, outputs, transition)


def empirical_transitions(symbols: Sequence[int], received_lengths: Sequence[int], model: DmcModel) -> np.ndarray:
    """Row-normalized counts of (sent symbol, received length) pairs"""
    symbols = np.asarray(symbols, dtype=np.int64)
    received = np.asarray(received_lengths, dtype=np.int64)
    if len(symbols) != len(received):
        raise ValueError("symbol and run counts differ")
    column = np.searchsorted(model.output_lengths, received)
    if np.any(column >= len(model.output_lengths)) or np.any(model.output_lengths[np.minimum(
            column, len(model.output_lengths) - 1)] != received):
        raise ChannelError("received a run length outside the channel's output set")
    counts = np.zeros(model.transition.shape)
    np.add.at(counts, (symbols, column), 1)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
