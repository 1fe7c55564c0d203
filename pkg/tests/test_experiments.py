import pytest

from experiments import DEFAULT_P_D, capacity_grid, frame_seed, region_study, run_sweep, survival_curve
from ldpc import preset_code
from runlength_code import RunAlphabet


def test_frame_seeds_are_stable_and_distinct():
    assert frame_seed(0, 1, 2) == frame_seed(0, 1, 2)
    assert len({frame_seed(0, p, f) for p in range(5) for f in range(50)}) == 250


def test_sweep_rows(toy_code):
    report = run_sweep(toy_code, RunAlphabet.default(1), (0.05, 0.01), frames=30, seed=2)
    assert [row.p_d for row in report.rows] == [0.05, 0.01]
    assert report.effective_rate == pytest.approx(0.4 * toy_code.rate)
    for row in report.rows:
        assert row.frames == 30
        assert 0 <= row.frame_errors <= 30
        assert row.ber == pytest.approx(row.bit_errors / (30 * toy_code.k))
        assert row.fer == pytest.approx(row.frame_errors / 30)
        assert row.unconverged <= 30
    assert report.as_dicts()[0]["p_d"] == 0.05


def test_sweep_is_independent_of_worker_count(toy_code):
    alphabet = RunAlphabet.default(1)
    serial = run_sweep(toy_code, alphabet, (0.04,), frames=24, seed=9)
    threaded = run_sweep(toy_code, alphabet, (0.04,), frames=24, seed=9, workers=4)
    assert serial.rows == threaded.rows


def test_low_deletion_rate_decodes_cleanly(small_code):
    report = run_sweep(small_code, RunAlphabet.default(1), (0.005,), frames=20, seed=1)
    assert report.rows[0].fer <= 0.1


def test_sweep_needs_frames(toy_code):
    with pytest.raises(ValueError):
        run_sweep(toy_code, RunAlphabet.default(1), frames=0)


def test_capacity_grid():
    rows = capacity_grid((1, 2), (0.01, 0.05))
    assert [(row["p_d"], row["alphabet_size"]) for row in rows] == [(0.01, 2), (0.01, 4), (0.05, 2), (0.05, 4)]
    assert all(row["converged"] for row in rows)
    assert rows[0]["c_unit"] > rows[2]["c_unit"]
    assert len(rows[1]["p_star"].split(";")) == 4


def test_survival_curve(featured_sphere):
    rows = survival_curve(featured_sphere, count=40, fractions=(1.0, 0.7, 0.4))
    assert [row.face_fraction for row in rows] == [1.0, 0.7, 0.4]
    assert rows[0].ranked_deleted == rows[0].random_deleted == 0
    assert rows[0].vertices_remaining == featured_sphere.vertex_count
    assert rows[1].vertices_remaining >= rows[2].vertices_remaining
    assert rows[2].achieved_fraction <= 0.4 + 1e-9
    assert rows[2].p_hat_ranked <= rows[2].p_hat_random


def test_region_study(featured_sphere):
    rows = region_study(featured_sphere, count=40, coverage=0.2, seeds=(0, 1))
    assert [row.seed for row in rows] == [0, 1]
    for row in rows:
        assert row.deleted_vertices >= 0.2 * featured_sphere.vertex_count
        assert 0 <= row.deleted_marks <= row.watermark_length == 40
        assert row.consecutive_pairs <= max(row.deleted_marks - 1, 0)
        assert row.max_consecutive <= row.deleted_marks
    with pytest.raises(ValueError):
        region_study(featured_sphere, count=40, coverage=1.0)


@pytest.mark.slow
def test_ranked_vertices_outlast_random_ones(full_mesh):
    rows = survival_curve(full_mesh, count=1000, fractions=(0.7,), seeds=range(10))
    assert len(rows) == 10
    assert 5 * sum(row.ranked_deleted for row in rows) <= sum(row.random_deleted for row in rows)
    assert sum(row.random_deleted for row in rows) > 0
    assert sum(row.max_consecutive_ranked == 0 for row in rows) >= 9


@pytest.mark.slow
def test_error_rates_fall_with_the_deletion_probability():
    code = preset_code("code-2")
    report = run_sweep(code, RunAlphabet.default(1), DEFAULT_P_D, frames=10000, seed=4, workers=4)
    assert [row.p_d for row in report.rows] == sorted(DEFAULT_P_D, reverse=True)
    for worse, better in zip(report.rows, report.rows[1:]):
        assert better.ber <= worse.ber
        assert better.fer <= worse.fer
    assert report.rows[-1].fer < 1e-2
