import numpy as np
import pytest

from capacity import deletion_channel_capacity, mutual_information, unit_cost_capacity
from channel import DeletionChannelSpec, dmc_matrix
from runlength_code import RunAlphabet


def test_mutual_information_examples():
    assert mutual_information([0.5, 0.5], np.eye(2)) == pytest.approx(1.0)
    assert mutual_information([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]]) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information([0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]]) == pytest.approx(0.5310, abs=1e-4)


def test_mutual_information_argument_checks():
    with pytest.raises(ValueError, match="probability distributions"):
        mutual_information([0.5, 0.5], [[0.6, 0.6], [0.5, 0.5]])
    with pytest.raises(ValueError, match="entries"):
        mutual_information([1.0], np.eye(2))


def test_noiseless_binary_runlength_capacity():
    # Largest real root of x**-2 + x**-3 = 1
    result = deletion_channel_capacity(1, 0.0)
    assert result.converged
    assert result.c_unit == pytest.approx(0.40569, abs=1e-5)
    assert result.p_star[0] > result.p_star[1]


def test_unit_costs_reduce_to_shannon_capacity():
    result = unit_cost_capacity([[0.9, 0.1], [0.1, 0.9]], [1.0, 1.0])
    assert result.c_unit == pytest.approx(0.5310, abs=1e-4)
    assert result.p_star == pytest.approx([0.5, 0.5], abs=1e-6)


def test_history_never_decreases():
    history = deletion_channel_capacity(2, 0.05).history
    assert np.all(np.diff(history) >= -1e-10)


def test_upper_bound_brackets_capacity():
    result = deletion_channel_capacity(3, 0.04)
    assert result.c_unit <= result.upper_bound + 1e-9
    assert result.upper_bound - result.c_unit < 1e-3


@pytest.mark.parametrize("b", [1, 2, 3])
def test_capacity_falls_as_deletions_grow(b):
    values = [deletion_channel_capacity(b, p).c_unit for p in (0.01, 0.04, 0.07, 0.10)]
    assert all(a > c for a, c in zip(values, values[1:]))


def test_binary_capacity_matches_grid_search():
    model = dmc_matrix(RunAlphabet.default(1), DeletionChannelSpec(0.05))
    best = max(mutual_information([p, 1 - p], model.transition) / (2 * p + 3 * (1 - p))
               for p in np.linspace(0.001, 0.999, 999))
    result = unit_cost_capacity(model.transition, model.costs)
    assert result.c_unit == pytest.approx(best, abs=1e-5)


def test_cost_argument_checks():
    with pytest.raises(ValueError, match="costs"):
        unit_cost_capacity(np.eye(2), [1.0])
    with pytest.raises(ValueError, match="positive"):
        unit_cost_capacity(np.eye(2), [1.0, 0.0])


def test_iteration_cap_reports_non_convergence():
    result = unit_cost_capacity([[0.9, 0.1], [0.2, 0.8]], [2.0, 3.0], tol=0.0, max_iter=3)
    assert not result.converged
    assert result.iterations == 3


@pytest.mark.parametrize("p_d", [0.01, 0.1])
def test_capacity_grows_with_alphabet_size(p_d):
    values = [deletion_channel_capacity(b, p_d).c_unit for b in (1, 2, 3, 4)]
    assert all(a < c for a, c in zip(values, values[1:])), values
