"""
Runlength Code for the Mesh Watermarking Toolkit
Maps symbols to alternating-polarity runs longer than s_d, parses runs back and scores them for the decoder
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from watermark_errors import ChannelError

logger = logging.getLogger(__name__)

# Channel LLR magnitude limit
LLR_CLIP = 25.0


@dataclass(frozen=True)
class RunAlphabet:
    """Symbol-to-runlength map of a runlength modulator

    run_lengths[v] is the length of the run that carries symbol v; it doubles as
    the transmission cost c(v) in channel bits.
    """
    bits_per_symbol: int
    run_lengths: Tuple[int, ...]
    s_d: int = 1
    first_polarity: int = 1

    def __post_init__(self):
        object.__setattr__(self, "run_lengths", tuple(int(r) for r in self.run_lengths))
        if self.bits_per_symbol < 1:
            raise ValueError("bits_per_symbol must be at least 1")
        if len(self.run_lengths) != 2 ** self.bits_per_symbol:
            raise ValueError(f"{2 ** self.bits_per_symbol} run lengths required, got {len(self.run_lengths)}")
        if len(set(self.run_lengths)) != len(self.run_lengths):
            raise ValueError("run lengths must be distinct")
        if self.s_d < 1:
            raise ValueError("s_d must be at least 1")
        if min(self.run_lengths) <= self.s_d:
            raise ValueError(f"every run length must exceed s_d={self.s_d}")
        if self.first_polarity not in (0, 1):
            raise ValueError("first_polarity must be 0 or 1")

    @classmethod
    def default(cls, bits_per_symbol: int = 1, s_d: int = 1, first_polarity: int = 1) -> "RunAlphabet":
        """Symbol v carried by a run of s_d + 1 + v bits"""
        base = s_d + 1
        return cls(bits_per_symbol, tuple(base + v for v in range(2 ** bits_per_symbol)), s_d, first_polarity)

    @property
    def size(self) -> int:
        return len(self.run_lengths)

    @property
    def costs(self) -> np.ndarray:
        return np.array(self.run_lengths, dtype=np.float64)

    def average_cost(self, distribution: Optional[Sequence[float]] = None) -> float:
        """Expected channel bits per symbol; uniform symbols by default"""
        if distribution is None:
            return float(self.costs.mean())
        return float(np.dot(self.costs, distribution))

    def rate_factor(self, distribution: Optional[Sequence[float]] = None) -> float:
        """Information bits per channel bit of the modulation alone"""
        return self.bits_per_symbol / self.average_cost(distribution)


@dataclass(frozen=True, eq=False)
class RunObservation:
    """Received run lengths; runs alternate polarity starting from polarity_start"""
    lengths: np.ndarray
    polarity_start: int = 1

    def __len__(self) -> int:
        return len(self.lengths)


def bits_to_symbols(bits: Sequence[int], bits_per_symbol: int) -> np.ndarray:
    """Group bits MSB-first into symbols; the length must divide evenly"""
    bits = np.asarray(bits, dtype=np.int64)
    if len(bits) % bits_per_symbol:
        raise ValueError(f"{len(bits)} bits do not split into {bits_per_symbol}-bit symbols")
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1)
    return bits.reshape(-1, bits_per_symbol) @ weights


def symbols_to_bits(symbols: Sequence[int], bits_per_symbol: int) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=np.int64)
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    return ((symbols[:, None] >> shifts) & 1).astype(np.int8).ravel()


def rl_encode(symbols: Sequence[int], alphabet: RunAlphabet) -> np.ndarray:
    """Emit one run per symbol, alternating polarity from alphabet.first_polarity"""
    symbols = np.asarray(symbols, dtype=np.int64)
    if len(symbols) == 0:
        return np.empty(0, dtype=np.int8)
    if symbols.min() < 0 or symbols.max() >= alphabet.size:
        raise ValueError(f"symbols must lie in [0, {alphabet.size})")
    lengths = np.asarray(alphabet.run_lengths)[symbols]
    polarity = (alphabet.first_polarity + np.arange(len(symbols))) % 2
    return np.repeat(polarity, lengths).astype(np.int8)


def parse_runs(bits: Sequence[int]) -> RunObservation:
    """Maximal-run decomposition of a bit stream"""
    bits = np.asarray(bits, dtype=np.int8)
    if len(bits) == 0:
        return RunObservation(np.empty(0, dtype=np.int64), 1)
    edges = np.flatnonzero(np.diff(bits)) + 1
    bounds = np.concatenate([[0], edges, [len(bits)]])
    return RunObservation(np.diff(bounds).astype(np.int64), int(bits[0]))


def run_likelihoods(lengths: np.ndarray, alphabet: RunAlphabet, p_d: float, s_d: Optional[int] = None) -> np.ndarray:
    """P(observed length | symbol) under the per-run deletion law, one row per run"""
    s_d = alphabet.s_d if s_d is None else s_d
    events = np.array([p_d ** j for j in range(1, s_d + 1)])
    keep = 1.0 - events.sum()
    if keep <= 0:
        raise ChannelError(f"p_d={p_d} with s_d={s_d} is not a valid deletion law")
    law = np.concatenate([[keep], events])
    deletions = np.asarray(alphabet.run_lengths)[None, :] - np.asarray(lengths)[:, None]
    valid = (deletions >= 0) & (deletions <= s_d)
    return np.where(valid, law[np.clip(deletions, 0, s_d)], 0.0)


def rl_decode_hard(obs: RunObservation, alphabet: RunAlphabet,
                   s_d: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Symbols from run lengths, with a flag where more than one symbol fits

    s_d defaults to the alphabet's deletion bound; s_d=0 decodes a noiseless stream.
    """
    s_d = alphabet.s_d if s_d is None else s_d
    lengths = np.asarray(obs.lengths, dtype=np.int64)
    if len(lengths) and obs.polarity_start != alphabet.first_polarity:
        raise ChannelError("first run polarity does not match the alphabet convention")
    run_lengths = np.asarray(alphabet.run_lengths)
    deletions = run_lengths[None, :] - lengths[:, None]
    reachable = (deletions >= 0) & (deletions <= s_d)
    counts = reachable.sum(axis=1)
    if np.any(counts == 0):
        bad = int(lengths[np.argmax(counts == 0)])
        raise ChannelError(f"run of length {bad} cannot come from any symbol under s_d={s_d}")
    # Smallest reachable runlength wins
    candidate = np.where(reachable, run_lengths[None, :], np.iinfo(np.int64).max)
    symbols = np.argmin(candidate, axis=1)
    return symbols, counts > 1


def rl_llr(obs: RunObservation, alphabet: RunAlphabet, p_d: float, s_d: Optional[int] = None,
           priors: Optional[Sequence[float]] = None, strict: bool = True) -> np.ndarray:
    """Bit LLRs log P(bit=0)/P(bit=1) for every run, clipped to +-LLR_CLIP

    Binary alphabets give one LLR per run. Larger alphabets give bits_per_symbol
    LLRs per run, MSB first, marginalizing over the symbols sharing each bit value.
    With strict=False runs no symbol can explain become erasures (LLR 0).
    """
    lengths = np.asarray(obs.lengths, dtype=np.int64)
    priors = np.full(alphabet.size, 1.0 / alphabet.size) if priors is None else np.asarray(priors, dtype=np.float64)
    if len(priors) != alphabet.size or np.any(priors < 0) or not np.isclose(priors.sum(), 1.0):
        raise ValueError("priors must be a distribution over the alphabet")
    joint = run_likelihoods(lengths, alphabet, p_d, s_d) * priors[None, :]
    impossible = joint.sum(axis=1) == 0
    if np.any(impossible):
        if strict:
            bad = int(lengths[np.argmax(impossible)])
            raise ChannelError(f"run of length {bad} is impossible under the channel law")
        logger.warning("%d runs cannot be explained by the channel law; treating them as erasures", impossible.sum())

    b = alphabet.bits_per_symbol
    labels = symbols_to_bits(np.arange(alphabet.size), b).reshape(alphabet.size, b)
    llrs = np.empty((len(lengths), b))
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(b):
            zero = joint[:, labels[:, i] == 0].sum(axis=1)
            one = joint[:, labels[:, i] == 1].sum(axis=1)
            llrs[:, i] = np.log(zero) - np.log(one)
    llrs[impossible] = 0.0
    return np.clip(np.nan_to_num(llrs, nan=0.0, posinf=LLR_CLIP, neginf=-LLR_CLIP), -LLR_CLIP, LLR_CLIP).ravel()
