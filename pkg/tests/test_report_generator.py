import csv

import pytest

from experiments import RegionRow, SurvivalRow, SweepReport, SweepRow
from report_generator import CAPACITY_FIELDS, SWEEP_FIELDS, ReportGenerator


@pytest.fixture
def sweep():
    rows = [SweepRow(0.05, 100, 40, 6, 0.004, 0.06, 7.5, 3), SweepRow(0.01, 100, 0, 0, 0.0, 0.0, 1.2, 0)]
    return SweepReport(rows, 221, 172, 172 / 221, 0.4 * 172 / 221)


@pytest.fixture
def survival_rows():
    return [SurvivalRow(1.0, 0, 1.0, 500, 0, 0, 0.0, 0.0, 0),
            SurvivalRow(0.5, 0, 0.5, 260, 2, 20, 0.05, 0.5, 1),
            SurvivalRow(0.5, 1, 0.49, 255, 4, 22, 0.1, 0.55, 2)]


def test_sweep_csv(tmp_path, sweep):
    path = ReportGenerator(tmp_path).generate_sweep_report(sweep, "csv", "sweep.csv")
    assert path == tmp_path / "sweep.csv"
    with open(path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert list(rows[0]) == SWEEP_FIELDS
    assert rows[0]["p_d"] == "0.05"
    assert rows[1]["frame_errors"] == "0"


def test_sweep_text_echoes_config_and_rates(sweep):
    text = ReportGenerator(config_text="delta = 0.01\nL = 1\n").generate_sweep_report(sweep, "text")
    assert text.startswith("ERROR RATE SWEEP")
    assert "  delta = 0.01" in text
    assert "n = 221, k = 172" in text
    assert "0.004" in text


def test_dict_format_returns_rows(sweep):
    rows = ReportGenerator().generate_sweep_report(sweep)
    assert rows == sweep.as_dicts()


def test_table_report_argument_checks():
    generator = ReportGenerator()
    with pytest.raises(ValueError, match="filename"):
        generator.generate_table_report("T", [], ["a"], "csv")
    with pytest.raises(ValueError, match="unknown output format"):
        generator.generate_table_report("T", [], ["a"], "html")


def test_summary_report_text_and_csv(tmp_path):
    generator = ReportGenerator(tmp_path)
    summary = {"payload_bits": 6, "hausdorff": 0.001234567, "converged": True}
    text = generator.generate_summary_report("EMBED", summary)
    assert "payload_bits : 6" in text
    assert "hausdorff    : 0.00123457" in text
    path = generator.generate_summary_report("EMBED", summary, "csv", "embed.csv")
    assert path.read_text().splitlines() == ["key,value", "payload_bits,6", "hausdorff,0.001234567", "converged,True"]


def test_capacity_and_region_reports(tmp_path):
    capacity = [{"p_d": 0.01, "alphabet_size": 2, "c_unit": 0.39, "upper_bound": 0.39, "iterations": 12,
                 "converged": True, "p_star": "0.57;0.43"}]
    generator = ReportGenerator(tmp_path)
    assert "CAPACITY PER UNIT COST" in generator.generate_capacity_report(capacity, "text")
    header = generator.generate_capacity_report(capacity, "csv", "cap.csv").read_text().splitlines()[0]
    assert header == ",".join(CAPACITY_FIELDS)
    region = [RegionRow(0, 12, 3, 1442, 300, 40, 7, 5, 4)]
    assert generator.generate_region_report(region)[0]["deleted_marks"] == 7


def test_charts_are_written(tmp_path, sweep, survival_rows):
    generator = ReportGenerator(tmp_path)
    capacity = [{"p_d": p, "alphabet_size": size, "c_unit": 0.4 - p * size / 10} for p in (0.01, 0.05)
                for size in (2, 4)]
    for path in (generator.create_error_rate_chart(sweep, "rates.png"),
                 generator.create_capacity_chart(capacity, "capacity.png"),
                 generator.create_survival_chart(survival_rows, "charts/survival.png")):
        assert path.exists()
        assert path.read_bytes()[:4] == b"\x89PNG"
    assert (tmp_path / "charts" / "survival.png").exists()
