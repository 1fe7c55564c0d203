import numpy as np
import pytest

from distribution_transformer import FrequencyTable, distribution_transform, inverse_transform


def test_uniform_target_passes_bits_through(rng):
    bits = rng.integers(0, 2, size=64)
    symbols = distribution_transform(bits, [0.5, 0.5])
    assert np.array_equal(symbols[:len(bits)], bits)


def test_symbols_follow_target_distribution(rng):
    symbols = distribution_transform(rng.integers(0, 2, size=20_000), [0.75, 0.25])
    assert np.mean(symbols == 0) == pytest.approx(0.75, abs=0.01)


@pytest.mark.parametrize("target", [[0.75, 0.25], [0.4, 0.3, 0.2, 0.1], [0.57, 0.43]])
def test_inverse_recovers_payload(target, rng):
    for length in (1, 7, 100, 513):
        bits = rng.integers(0, 2, size=length)
        symbols = distribution_transform(bits, target)
        assert np.array_equal(inverse_transform(symbols, target, length), bits)


def test_skewed_target_needs_more_symbols(rng):
    bits = rng.integers(0, 2, size=2000)
    assert len(distribution_transform(bits, [0.9, 0.1])) > len(distribution_transform(bits, [0.5, 0.5]))


def test_empty_payload():
    assert len(distribution_transform([], [0.5, 0.5])) == 0


@pytest.mark.parametrize("target", [[1.0], [0.5, 0.6], [1.0, 0.0], [np.nan, 0.5]])
def test_bad_targets_are_rejected(target):
    with pytest.raises(ValueError):
        FrequencyTable(target)


def test_argument_checks():
    with pytest.raises(ValueError, match="bit stream"):
        distribution_transform([0, 2], [0.5, 0.5])
    with pytest.raises(ValueError, match="outside"):
        inverse_transform([0, 3], [0.5, 0.5], 1)
    with pytest.raises(ValueError, match="committed bits"):
        inverse_transform([0], [0.5, 0.5], 10)


def test_frequency_table_sums_to_total():
    table = FrequencyTable([0.4, 0.3, 0.2, 0.1])
    assert table.total == 1 << 16
    assert table.symbol_for(0) == 0
    assert table.symbol_for(table.total - 1) == 3
