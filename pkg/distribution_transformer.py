"""
Distribution Transformer for the Mesh Watermarking Toolkit
Arithmetic decoding of uniform payload bits into symbols with a chosen distribution, and its inverse
"""

import logging
from typing import Iterator, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)

STATE_BITS = 32
FREQUENCY_BITS = 16


class FrequencyTable:
    """Target distribution quantized to integer frequencies summing to 2**FREQUENCY_BITS"""

    def __init__(self, distribution: Sequence[float]):
        p = np.asarray(distribution, dtype=np.float64)
        if p.ndim != 1 or len(p) < 2:
            raise ValueError("target distribution needs at least two symbols")
        if np.any(~np.isfinite(p)) or np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-9):
            raise ValueError("target must be a probability distribution")
        if np.any(p == 0):
            raise ValueError(f"target gives symbol {int(np.argmin(p))} zero probability")
        total = 1 << FREQUENCY_BITS
        freqs = np.maximum(1, np.round(p * total)).astype(np.int64)
        freqs[np.argmax(freqs)] += total - freqs.sum()
        if freqs.min() < 1:
            raise ValueError("target distribution cannot be represented with 16-bit frequencies")
        self.freqs = [int(f) for f in freqs]
        self.cumulative = [0] + np.cumsum(freqs).tolist()

    @property
    def total(self) -> int:
        return self.cumulative[-1]

    @property
    def symbol_limit(self) -> int:
        return len(self.freqs)

    def low(self, symbol: int) -> int:
        return self.cumulative[symbol]

    def high(self, symbol: int) -> int:
        return self.cumulative[symbol + 1]

    def symbol_for(self, value: int) -> int:
        """Symbol whose cumulative interval contains value"""
        lo, hi = 0, self.symbol_limit
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if self.cumulative[mid] > value:
                hi = mid
            else:
                lo = mid
        return lo


class _CoderBase:
    def __init__(self):
        self.full_range = 1 << STATE_BITS
        self.half_range = self.full_range >> 1
        self.quarter_range = self.half_range >> 1
        self.state_mask = self.full_range - 1
        self.low = 0
        self.high = self.state_mask

    def _narrow(self, table: FrequencyTable, symbol: int) -> None:
        span = self.high - self.low + 1
        self.high = self.low + span * table.high(symbol) // table.total - 1
        self.low = self.low + span * table.low(symbol) // table.total

    def _shift(self) -> None:
        self.low = (self.low << 1) & self.state_mask
        self.high = ((self.high << 1) & self.state_mask) | 1


class ArithmeticEncoder(_CoderBase):
    """Collects emitted bits in a list; bits already emitted never change"""

    def __init__(self):
        super().__init__()
        self.bits: List[int] = []
        self.underflow = 0

    def write(self, table: FrequencyTable, symbol: int) -> None:
        self._narrow(table, symbol)
        while True:
            if self.high < self.half_range:
                self._emit(0)
            elif self.low >= self.half_range:
                self._emit(1)
                self.low -= self.half_range
                self.high -= self.half_range
            elif self.low >= self.quarter_range and self.high < 3 * self.quarter_range:
                self.underflow += 1
                self.low -= self.quarter_range
                self.high -= self.quarter_range
            else:
                break
            self._shift()

    def _emit(self, bit: int) -> None:
        self.bits.append(bit)
        self.bits.extend([bit ^ 1] * self.underflow)
        self.underflow = 0


class ArithmeticDecoder(_CoderBase):
    """Reads code bits from an iterator; zeros once it runs dry"""

    def __init__(self, bits: Iterator[int]):
        super().__init__()
        self.source = bits
        self.code = 0
        for _ in range(STATE_BITS):
            self.code = (self.code << 1) | self._next_bit()

    def _next_bit(self) -> int:
        return next(self.source, 0)

    def read(self, table: FrequencyTable) -> int:
        span = self.high - self.low + 1
        value = ((self.code - self.low + 1) * table.total - 1) // span
        symbol = table.symbol_for(value)
        self._narrow(table, symbol)
        while True:
            if self.high < self.half_range:
                pass
            elif self.low >= self.half_range:
                self.low -= self.half_range
                self.high -= self.half_range
                self.code -= self.half_range
            elif self.low >= self.quarter_range and self.high < 3 * self.quarter_range:
                self.low -= self.quarter_range
                self.high -= self.quarter_range
                self.code -= self.quarter_range
            else:
                break
            self._shift()
            self.code = ((self.code << 1) & self.state_mask) | self._next_bit()
        return symbol


def distribution_transform(bits: Sequence[int], target: Sequence[float]) -> np.ndarray:
    """Symbols distributed per `target` that carry `bits` exactly

    Decoding stops once a mirrored encoder of the emitted symbols has committed
    at least len(bits) bits, so inverse_transform recovers the input.
    """
    bits = [int(b) for b in np.asarray(bits, dtype=np.int64)]
    if any(b not in (0, 1) for b in bits):
        raise ValueError("input must be a bit stream")
    table = FrequencyTable(target)
    if not bits:
        return np.empty(0, dtype=np.int64)
    decoder = ArithmeticDecoder(iter(bits))
    mirror = ArithmeticEncoder()
    symbols = []
    while len(mirror.bits) < len(bits):
        symbol = decoder.read(table)
        mirror.write(table, symbol)
        symbols.append(symbol)
    logger.debug("transformed %d bits into %d symbols", len(bits), len(symbols))
    return np.array(symbols, dtype=np.int64)


def inverse_transform(symbols: Sequence[int], target: Sequence[float], n_bits: int) -> np.ndarray:
    """First n_bits of the arithmetic encoding of `symbols`"""
    table = FrequencyTable(target)
    encoder = ArithmeticEncoder()
    for symbol in np.asarray(symbols, dtype=np.int64):
        if not 0 <= symbol < table.symbol_limit:
            raise ValueError(f"symbol {symbol} outside the target alphabet")
        encoder.write(table, int(symbol))
        if len(encoder.bits) >= n_bits:
            break
    if len(encoder.bits) < n_bits:
        raise ValueError(f"symbols carry only {len(encoder.bits)} committed bits, {n_bits} requested")
    return np.array(encoder.bits[:n_bits], dtype=np.int8)
