"""Output generation for the risk-sensitive game solver."""

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from config import Config
from models import (
    CheckReport,
    CostEstimate,
    CrosscheckRow,
    ErgodicSolution,
    Grid,
    StrategyField,
    ThetaGrid,
    ValueField,
)

FLOAT_FORMAT = "{:.17g}"


def format_float(value: float) -> str:
    """Shortest round-tripping text for a double, '.' as decimal separator."""
    return FLOAT_FORMAT.format(float(value))


def _coordinate_header(grid: Grid) -> List[str]:
    return [f"x_{i + 1}" for i in range(grid.dimension)]


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


class OutputGenerator:
    """Write CSV fields and run reports, and print terminal summaries."""

    def __init__(self, config: Config):
        """Initialize output generator.

        Args:
            config: Configuration object
        """
        self.config = config

    def _write_rows(
        self, path: Path, header: List[str], rows: Iterable[List[str]]
    ) -> str:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as csvfile:
            writer = csv.writer(csvfile, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        return str(path)

    def write_values(self, field: ValueField, output_path: str) -> str:
        """Write psi(theta_j, x_i) as ``values_player<k>.csv``.

        Args:
            field: Value field of one player
            output_path: Directory path for output

        Returns:
            Path to generated CSV file
        """
        grid = field.grid
        thetas = field.theta_grid.nodes
        coords = [[format_float(c) for c in node] for node in grid.nodes]
        rows = (
            [format_float(theta), *coords[i], format_float(field.values[j, i])]
            for j, theta in enumerate(thetas)
            for i in range(grid.n_nodes)
        )
        path = Path(output_path) / f"values_player{field.player}.csv"
        return self._write_rows(path, ["theta", *_coordinate_header(grid), "value"], rows)

    def write_strategies(
        self,
        strategy: StrategyField,
        grid: Grid,
        output_path: str,
        theta_grid: Optional[ThetaGrid] = None,
        suffix: str = "",
    ) -> str:
        """Write mixed actions per node, one row per (theta, node).

        Stationary strategies carry an empty theta column.
        """
        coords = [[format_float(c) for c in node] for node in grid.nodes]
        if strategy.stationary:
            levels = [("", strategy.weights)]
        else:
            thetas = theta_grid.nodes if theta_grid is not None else None
            levels = [
                (format_float(thetas[j]) if thetas is not None else str(j), w)
                for j, w in enumerate(strategy.weights)
            ]
        rows = (
            [theta, *coords[i], *(format_float(p) for p in weights[i])]
            for theta, weights in levels
            for i in range(grid.n_nodes)
        )
        header = [
            "theta",
            *_coordinate_header(grid),
            *(f"w_action_{a}" for a in range(strategy.n_actions)),
        ]
        path = Path(output_path) / f"strategies_player{strategy.player}{suffix}.csv"
        return self._write_rows(path, header, rows)

    def write_ergodic(
        self, solution: ErgodicSolution, grid: Grid, output_path: str
    ) -> str:
        """Write the eigenfunction psi normalized at the anchor."""
        rows = (
            [*(format_float(c) for c in node), format_float(p)]
            for node, p in zip(grid.nodes, solution.psi)
        )
        path = Path(output_path) / f"ergodic_player{solution.player}.csv"
        return self._write_rows(path, [*_coordinate_header(grid), "psi"], rows)

    def write_per_path(self, estimate: CostEstimate, output_path: str) -> str:
        """Per-path samples behind a Monte-Carlo estimate."""
        samples = np.asarray(estimate.samples if estimate.samples is not None else [])
        rows = ([str(i), format_float(v)] for i, v in enumerate(samples))
        path = Path(output_path) / f"paths_{estimate.tag.value}.csv"
        return self._write_rows(path, ["path", "sample"], rows)

    def write_report(self, report: Dict[str, Any], output_path: str) -> str:
        """Write the run report as ``report.json``.

        No timestamps are written, so identical runs give identical reports.
        """
        Path(output_path).mkdir(parents=True, exist_ok=True)
        path = Path(output_path) / "report.json"
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(report, f, indent=2, sort_keys=True, default=_json_default)
            f.write("\n")
        return str(path)

    def display_checks(self, reports: Sequence[CheckReport]) -> None:
        """Print one line per assumption check."""
        print("\n🔍 Assumption checks")
        print("=" * 60)
        for report in reports:
            icon = "✅" if report.holds else "❌"
            print(f"{icon} {report.name:<28} margin {report.margin:+.6e}")
            if report.worst_node is not None and not report.holds:
                print(f"   worst node {report.worst_node} pair {report.worst_pair}")
            for message in report.messages:
                print(f"   ⚠️  {message}")
        print("=" * 60)

    def display_iteration(self, label: str, report: Any) -> None:
        """Summary of a Nash iteration report."""
        icon = "✅" if report.converged else "⚠️ "
        print(f"\n{icon} {label}: {report.iterations} iterations")
        print(f"   strategy change {report.change:.3e} (tol {report.strat_tol:.1e})")
        residuals = ", ".join(f"{r:.3e}" for r in report.residuals)
        print(f"   residuals {residuals} (tol {report.resid_tol:.1e})")
        if hasattr(report, "solutions"):
            for solution in report.solutions:
                print(f"   player {solution.player}: rho = {solution.rho:.10g}")

    def display_estimate(self, label: str, estimate: CostEstimate) -> None:
        """Monte-Carlo estimate with its confidence interval."""
        print(
            f"\n📈 {label}: {estimate.estimate:.10g} ± {estimate.stderr:.3g} "
            f"[{estimate.lower:.6g}, {estimate.upper:.6g}] "
            f"({estimate.n_paths} paths, T = {estimate.horizon:g})"
        )
        for warning in estimate.warnings:
            print(f"   ⚠️  {warning}")

    def display_crosscheck(self, rows: Sequence[CrosscheckRow]) -> None:
        """Pass/fail matrix of a crosscheck run."""
        print("\n🔄 Crosscheck")
        print("=" * 96)
        print(f"{'check':<42} {'reference':>16} {'candidate':>16} {'diff':>9} {'tol':>9}")
        print("-" * 96)
        for row in rows:
            icon = "✅" if row.passed else "❌"
            print(
                f"{row.name:<42} {row.reference:>16.10g} {row.candidate:>16.10g} "
                f"{row.difference:>9.2e} {row.tolerance:>9.2e} {icon}"
            )
        print("=" * 96)
        passed = sum(row.passed for row in rows)
        print(f"📊 {passed}/{len(rows)} checks passed")
