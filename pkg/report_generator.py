"""
Report Generator for the Mesh Watermarking Toolkit
Handles generation of reports and charts for every command
"""

import csv
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")  # Charts are only ever written to files

import matplotlib.pyplot as plt

from experiments import RegionRow, SurvivalRow, SweepReport

logger = logging.getLogger(__name__)

SWEEP_FIELDS = ["p_d", "frames", "bit_errors", "frame_errors", "ber", "fer", "mean_iterations", "unconverged"]
CAPACITY_FIELDS = ["p_d", "alphabet_size", "c_unit", "upper_bound", "iterations", "converged", "p_star"]
SURVIVAL_FIELDS = ["face_fraction", "seed", "achieved_fraction", "vertices_remaining", "ranked_deleted",
                   "random_deleted", "p_hat_ranked", "p_hat_random", "max_consecutive_ranked"]
REGION_FIELDS = ["seed", "center", "radius_hops", "total_vertices", "deleted_vertices", "watermark_length",
                 "deleted_marks", "max_consecutive", "consecutive_pairs"]
RANKING_FIELDS = ["rank", "index", "score", "gaussian_curvature", "mean_curvature"]

Rows = List[Dict[str, object]]


def _format(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class ReportGenerator:
    def __init__(self, output_dir: Union[str, Path] = ".", config_text: Optional[str] = None):
        """Reports go to output_dir; config_text is echoed into every text report"""
        self.output_dir = Path(output_dir)
        self.config_text = config_text

    def _path(self, name: Union[str, Path]) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.output_dir / path

    def _banner(self, title: str) -> str:
        report = f"{title}\n"
        report += "=" * 80 + "\n"
        if self.config_text:
            report += "Configuration:\n"
            report += "".join(f"  {line}\n" for line in self.config_text.splitlines())
            report += "=" * 80 + "\n"
        return report + "\n"

    def write_csv(self, rows: Sequence[Mapping[str, object]], fieldnames: Sequence[str],
                  filename: Union[str, Path]) -> Path:
        """Write rows with a fixed header; returns the file path"""
        path = self._path(filename)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as csvfile:
            writer = csv.DictWriter(csvfile, fieldnames=list(fieldnames), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({name: row[name] for name in fieldnames})
        logger.info("wrote %d rows to %s", len(rows), path)
        return path

    def generate_table_report(self, title: str, rows: Rows, fieldnames: Sequence[str], output_format: str = "dict",
                              filename: Union[str, Path, None] = None):
        """
        Render a list of rows
        output_format: 'dict', 'csv', or 'text'
        """
        if output_format == "dict":
            return rows

        elif output_format == "csv":
            if filename is None:
                raise ValueError("a filename is required for csv output")
            return self.write_csv(rows, fieldnames, filename)

        elif output_format == "text":
            widths = [max([len(name)] + [len(_format(row[name])) for row in rows]) for name in fieldnames]
            report = self._banner(title)
            report += "  ".join(name.rjust(width) for name, width in zip(fieldnames, widths)) + "\n"
            report += "-" * 80 + "\n"
            for row in rows:
                report += "  ".join(_format(row[name]).rjust(width) for name, width in zip(fieldnames, widths)) + "\n"
            return report

        raise ValueError(f"unknown output format {output_format!r}")

    def generate_summary_report(self, title: str, summary: Mapping[str, object], output_format: str = "text",
                                filename: Union[str, Path, None] = None):
        """Key/value report for embed, extract, attack and codegen"""
        if output_format == "text":
            report = self._banner(title)
            width = max((len(key) for key in summary), default=0)
            for key, value in summary.items():
                report += f"{key.ljust(width)} : {_format(value)}\n"
            return report
        rows = [{"key": key, "value": value} for key, value in summary.items()]
        return self.generate_table_report(title, rows, ["key", "value"], output_format, filename)

    def generate_sweep_report(self, report: SweepReport, output_format: str = "dict",
                              filename: Union[str, Path, None] = None):
        rows = report.as_dicts()
        if output_format != "text":
            return self.generate_table_report("ERROR RATE SWEEP", rows, SWEEP_FIELDS, output_format, filename)
        text = self.generate_table_report("ERROR RATE SWEEP", rows, SWEEP_FIELDS, "text")
        text += f"\nn = {report.n}, k = {report.k}, R = {report.rate:.4f}, R_eff = {report.effective_rate:.4f}\n"
        return text

    def generate_capacity_report(self, rows: Rows, output_format: str = "dict",
                                 filename: Union[str, Path, None] = None):
        return self.generate_table_report("CAPACITY PER UNIT COST", rows, CAPACITY_FIELDS, output_format, filename)

    def generate_survival_report(self, rows: Sequence[SurvivalRow], output_format: str = "dict",
                                 filename: Union[str, Path, None] = None):
        dicts = [asdict(row) for row in rows]
        return self.generate_table_report("VERTEX SURVIVAL UNDER SIMPLIFICATION", dicts, SURVIVAL_FIELDS,
                                          output_format, filename)

    def generate_region_report(self, rows: Sequence[RegionRow], output_format: str = "dict",
                               filename: Union[str, Path, None] = None):
        dicts = [asdict(row) for row in rows]
        return self.generate_table_report("MALICIOUS REGION DELETION", dicts, REGION_FIELDS, output_format, filename)

    def _save(self, fig, filename: Union[str, Path]) -> Path:
        path = self._path(filename)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.tight_layout()
        fig.savefig(path, dpi=100)
        plt.close(fig)
        logger.info("saved chart %s", path)
        return path

    def create_error_rate_chart(self, report: SweepReport, filename: Union[str, Path]) -> Path:
        """BER and FER against p_d on a log scale; zero rates are left off the plot"""
        p_d = [row.p_d for row in report.rows]
        fig, ax = plt.subplots(figsize=(6, 4))
        for attribute, label, marker in (("ber", "BER", "o"), ("fer", "FER", "s")):
            points = [(p, getattr(row, attribute)) for p, row in zip(p_d, report.rows) if getattr(row, attribute) > 0]
            if points:
                ax.plot(*zip(*points), marker=marker, label=label)
        ax.set_yscale("log")
        ax.set_xlabel("Deletion probability p_d")
        ax.set_ylabel("Probability of error")
        ax.set_title(f"Coded error rates (n={report.n}, R={report.rate:.2f})")
        ax.grid(True, which="both", linestyle="--", alpha=0.7)
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
        return self._save(fig, filename)

    def create_capacity_chart(self, rows: Rows, filename: Union[str, Path]) -> Path:
        """Capacity per unit cost against p_d, one line per alphabet size"""
        fig, ax = plt.subplots(figsize=(6, 4))
        for size in sorted({row["alphabet_size"] for row in rows}):
            points = sorted((row["p_d"], row["c_unit"]) for row in rows if row["alphabet_size"] == size)
            ax.plot(*zip(*points), marker="o", label=f"|X| = {size}")
        ax.set_xlabel("Deletion probability p_d")
        ax.set_ylabel("Capacity per unit cost (bits)")
        ax.set_title("Capacity estimates for the deletion channel")
        ax.grid(True, linestyle="--", alpha=0.7)
        ax.legend()
        return self._save(fig, filename)

    def create_survival_chart(self, rows: Sequence[SurvivalRow], filename: Union[str, Path]) -> Path:
        """Mean deletion probability of ranked and random marks per simplification level"""
        fractions = sorted({row.face_fraction for row in rows}, reverse=True)
        ranked, random = [], []
        for fraction in fractions:
            level = [row for row in rows if row.face_fraction == fraction]
            ranked.append(sum(row.p_hat_ranked for row in level) / len(level))
            random.append(sum(row.p_hat_random for row in level) / len(level))
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(fractions, ranked, marker="o", color="green", label="Ranked vertices")
        ax.plot(fractions, random, marker="s", color="red", label="Random vertices")
        ax.invert_xaxis()
        ax.set_xlabel("Fraction of faces kept")
        ax.set_ylabel("Deletion probability")
        ax.set_title("Vertex deletion under simplification")
        ax.grid(True, linestyle="--", alpha=0.7)
        ax.legend()
        return self._save(fig, filename)
