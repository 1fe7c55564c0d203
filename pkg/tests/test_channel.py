import numpy as np
import pytest

from channel import DeletionChannelSpec, apply_deletion_channel, delete_from_runs, dmc_matrix, empirical_transitions
from runlength_code import RunAlphabet, parse_runs, rl_encode
from watermark_errors import ChannelError


def test_zero_deletion_probability_is_identity(rng):
    bits = rl_encode(rng.integers(0, 2, size=200), RunAlphabet.default(1))
    received, positions = apply_deletion_channel(bits, DeletionChannelSpec(0.0))
    assert np.array_equal(received, bits)
    assert len(positions) == 0


def test_single_trailing_deletion():
    received, positions = delete_from_runs([0, 0, 0, 0, 0], [1])
    assert received.tolist() == [0, 0, 0, 0]
    assert positions.tolist() == [4]


def test_deletions_come_from_run_tails():
    received, positions = delete_from_runs([1, 1, 0, 0, 0, 1, 1, 1], [0, 1, 2])
    assert received.tolist() == [1, 1, 0, 0, 1]
    assert positions.tolist() == [4, 6, 7]
    with pytest.raises(ValueError, match="deletion events"):
        delete_from_runs([1, 1, 0], [1])


def test_deletion_frequency_matches_p_d(rng):
    alphabet = RunAlphabet.default(1)
    symbols = rng.integers(0, 2, size=50_000)
    bits = rl_encode(symbols, alphabet)
    received, positions = apply_deletion_channel(bits, DeletionChannelSpec(0.05), rng)
    assert len(positions) / len(symbols) == pytest.approx(0.05, abs=0.005)
    assert len(received) == len(bits) - len(positions)
    assert len(parse_runs(received)) == len(symbols)


def test_channel_is_reproducible_from_seed(rng):
    bits = rl_encode(rng.integers(0, 2, size=500), RunAlphabet.default(1))
    spec = DeletionChannelSpec(0.1, rng_seed=7)
    first, _ = apply_deletion_channel(bits, spec)
    second, _ = apply_deletion_channel(bits, spec)
    assert np.array_equal(first, second)


def test_dmc_matrix_for_binary_alphabet():
    p = 0.05
    model = dmc_matrix(RunAlphabet.default(1), DeletionChannelSpec(p))
    assert model.output_lengths.tolist() == [1, 2, 3]
    assert model.transition == pytest.approx(np.array([[p, 1 - p, 0.0], [0.0, p, 1 - p]]))
    assert model.costs.tolist() == [2.0, 3.0]


@pytest.mark.parametrize("b, s_d", [(1, 1), (2, 1), (3, 2), (4, 1)])
def test_dmc_rows_are_distributions(b, s_d):
    model = dmc_matrix(RunAlphabet.default(b, s_d), DeletionChannelSpec(0.08, s_d))
    assert model.transition.sum(axis=1) == pytest.approx(np.ones(2 ** b))
    assert np.all(model.transition >= 0)


def test_dmc_needs_runs_longer_than_s_d():
    with pytest.raises(ChannelError):
        dmc_matrix(RunAlphabet.default(1), DeletionChannelSpec(0.05, s_d=2))


def _empirical_gap(symbol_count, rng):
    alphabet = RunAlphabet.default(2)
    spec = DeletionChannelSpec(0.1)
    model = dmc_matrix(alphabet, spec)
    symbols = rng.integers(0, alphabet.size, size=symbol_count)
    received, _ = apply_deletion_channel(rl_encode(symbols, alphabet), spec, rng)
    counts = empirical_transitions(symbols, parse_runs(received).lengths, model)
    return np.max(np.abs(counts - model.transition))


def test_simulated_channel_matches_dmc(rng):
    assert _empirical_gap(100_000, rng) < 0.01


@pytest.mark.slow
def test_simulated_channel_matches_dmc_at_full_scale(rng):
    assert _empirical_gap(1_000_000, rng) < 0.003


def test_empirical_transitions_rejects_foreign_lengths():
    model = dmc_matrix(RunAlphabet.default(1), DeletionChannelSpec(0.05))
    with pytest.raises(ChannelError):
        empirical_transitions([0], [7], model)
    with pytest.raises(ValueError):
        empirical_transitions([0, 1], [2], model)


@pytest.mark.parametrize("kwargs", [{"p_d": -0.1}, {"p_d": 1.0}, {"p_d": 0.1, "s_d": 0}, {"p_d": 0.7, "s_d": 2}])
def test_channel_spec_validation(kwargs):
    with pytest.raises(ChannelError):
        DeletionChannelSpec(**kwargs)


def test_event_probabilities():
    law = DeletionChannelSpec(0.1, s_d=2).event_probabilities()
    assert law == pytest.approx([0.89, 0.1, 0.01])
