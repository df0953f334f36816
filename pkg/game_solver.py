#!/usr/bin/env python3
"""Main CLI interface for the risk-sensitive game solver."""

import logging
import sys
from functools import cached_property, wraps
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click

from assumptions import run_all_checks
from config import Config, RunConfig, apply_flag_overrides, parse_floats
from crosscheck import (
    domain_doubling_check,
    kappa_halving_check,
    run_crosscheck,
)
from discretize import Discretization, prepare
from ergodic import (
    check_solution_bounds,
    default_anchor,
    deviation_test_ergodic,
    nash_iterate_ergodic,
    solve_ergodic_br,
    vanishing_discount_check,
)
from errors import GameSolverError
from hjb import (
    certainty_equivalent,
    solve_discounted,
    step_halving_report,
    value_summary,
)
from models import RunResult, StrategyField, ThetaGrid
from nash import deviation_test, fixed_point_consistency, nash_iterate
from oracle import (
    best_response_exhaustive,
    build_chain,
    perron_ergodic,
    stationary_average_cost,
    vi_discounted,
)
from output_generator import OutputGenerator
from policy.strategy_factory import (
    ENUMERATION_CAP,
    initial_pair,
    pure_deviations,
)
from simulate import mc_discounted, mc_ergodic, mc_hitting_bound, mc_power_lyapunov

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 3
EXIT_NOT_CONVERGED = 4

PAIR_SOURCES = ("init", "nash")


class GameSolver:
    """Runs one subcommand pipeline for a loaded run configuration."""

    def __init__(self, config: Config, run: RunConfig, threads: Optional[int] = None):
        """Initialize game solver.

        Args:
            config: Process configuration
            run: Experiment configuration
            threads: Worker cap; the environment default when None
        """
        self.config = config
        self.run = run
        self.threads = threads or config.threads
        self.output_generator = OutputGenerator(config)
        self.output_dir = run.output_dir(config)

    @cached_property
    def grid(self):
        return self.run.build_grid()

    @cached_property
    def theta_grid(self) -> ThetaGrid:
        return self.run.build_theta_grid()

    @cached_property
    def disc(self) -> Discretization:
        return prepare(self.run.game, self.grid, threads=self.threads)

    def _init_pair(self) -> Tuple[StrategyField, StrategyField]:
        return initial_pair(
            self.run.solver.init,
            self.grid.n_nodes,
            self.run.game.n_actions,
            self.run.solver.init_seed,
        )

    def _anchor(self) -> int:
        index = self.run.anchor_index(self.grid)
        if index is None:
            return default_anchor(self.grid, self.run.certificate)
        return index

    def _start_index(self) -> int:
        return int(self.grid.nearest_index(self.run.simulation.start)[0])

    def _finish(
        self,
        command: str,
        payload: Dict[str, Any],
        artifacts: List[str],
        exit_code: int,
        message: str,
    ) -> RunResult:
        report = {
            "command": command,
            "config": self.run.to_dict(),
            "exit_code": exit_code,
            "threads": self.threads,
            **payload,
        }
        artifacts.append(self.output_generator.write_report(report, self.output_dir))
        return RunResult(
            success=exit_code == EXIT_OK,
            command=command,
            message=message,
            exit_code=exit_code,
            artifacts=artifacts,
        )

    def check(self) -> RunResult:
        """Ellipticity, boundedness, Lyapunov, small-cost and power-Lyapunov checks."""
        reports = run_all_checks(
            self.run.game,
            self.grid,
            self.run.solver.theta,
            self.run.certificate,
            ellip_min=self.config.ellip_min,
            slack_tol=self.run.solver.slack_tol,
        )
        self.output_generator.display_checks(reports)
        failed = [r.name for r in reports if not r.holds]
        exit_code = EXIT_NUMERICAL if failed else EXIT_OK
        message = (
            f"{len(reports)} checks passed"
            if not failed
            else f"failed checks: {', '.join(failed)}"
        )
        return self._finish(
            "check", {"checks": [r.to_dict() for r in reports]}, [], exit_code, message
        )

    def solve_discounted(self) -> RunResult:
        """Best response of each player to the opponent's initial strategy."""
        v1, v2 = self._init_pair()
        solver = self.run.solver
        artifacts = []
        fields = []
        halving = []
        level = self.theta_grid.nearest_level(solver.theta)
        start = self._start_index()
        for player, opponent in ((1, v2), (2, v1)):
            click.echo(f"🔄 Solving discounted best response of player {player}")
            field, strategy = solve_discounted(
                self.run.game,
                self.grid,
                self.theta_grid,
                solver.alpha,
                player,
                opponent,
                disc=self.disc,
            )
            fine, _ = solve_discounted(
                self.run.game,
                self.grid,
                self.theta_grid.refined(),
                solver.alpha,
                player,
                opponent,
                disc=self.disc,
            )
            fields.append(field)
            halving.append(step_halving_report(field, fine, level, start))
            artifacts.append(self.output_generator.write_values(field, self.output_dir))
            artifacts.append(
                self.output_generator.write_strategies(
                    strategy, self.grid, self.output_dir, self.theta_grid
                )
            )
        summary = value_summary(fields, self.disc.cost_sup)
        for entry, field, steps in zip(summary, fields, halving):
            entry["step_halving"] = steps
            entry["theta"] = float(self.theta_grid.nodes[level])
            entry["psi_at_start"] = float(field.values[level, start])
            entry["certainty_equivalent_at_start"] = float(
                certainty_equivalent(field)[level, start]
            )
            click.echo(
                f"   player {entry['player']}: psi(theta, x0) = "
                f"{entry['psi_at_start']:.10g}"
            )
        breaches = [e["player"] for e in summary if not e["bounds"]["holds"]]
        exit_code = EXIT_NUMERICAL if breaches else EXIT_OK
        message = "discounted values solved"
        if breaches:
            message = f"value bounds breached for player(s) {breaches}"
        return self._finish(
            "solve-discounted",
            {"theta_grid": self.theta_grid.to_dict(), "values": summary},
            artifacts,
            exit_code,
            message,
        )

    def solve_ergodic(self) -> RunResult:
        """Ergodic best responses and the vanishing-discount comparison."""
        v1, v2 = self._init_pair()
        solver = self.run.solver
        anchor = self._anchor()
        artifacts = []
        entries = []
        pair = {1: v1, 2: v2}
        for player, opponent in ((1, v2), (2, v1)):
            click.echo(f"🔄 Solving ergodic best response of player {player}")
            solution, strategy = solve_ergodic_br(
                self.run.game,
                self.grid,
                solver.theta,
                player,
                opponent,
                anchor,
                disc=self.disc,
                cert=self.run.certificate,
            )
            pair[player] = strategy
            bounds = check_solution_bounds(
                solution,
                self.grid,
                self.disc.cost_sup[player - 1],
                self.run.certificate,
            )
            entries.append({**solution.to_dict(), "bounds": bounds.to_dict()})
            click.echo(f"   player {player}: rho = {solution.rho:.10g}")
            artifacts.append(
                self.output_generator.write_ergodic(solution, self.grid, self.output_dir)
            )
            artifacts.append(
                self.output_generator.write_strategies(strategy, self.grid, self.output_dir)
            )
        best_pair = (pair[1], v2) if solver.player == 1 else (v1, pair[2])
        vanishing = vanishing_discount_check(
            self.run.game,
            self.grid,
            solver.theta,
            solver.player,
            best_pair,
            solver.alphas,
            n_theta=self.run.grid.n_theta,
            kappa_ratio=self.run.grid.kappa_ratio,
            anchor=anchor,
            disc=self.disc,
        )
        return self._finish(
            "solve-ergodic",
            {"ergodic": entries, "vanishing_discount": vanishing.to_dict()},
            artifacts,
            EXIT_OK,
            "ergodic best responses solved",
        )

    def _deviations(self) -> List[StrategyField]:
        return pure_deviations(
            self.grid.n_nodes,
            self.run.game.n_actions,
            self.run.solver.deviation_cap,
            self.run.solver.init_seed,
        )

    def _run_nash(self):
        solver = self.run.solver
        return nash_iterate(
            self.run.game,
            self.grid,
            self.theta_grid,
            solver.alpha,
            self._init_pair(),
            self.run.schedule,
            damping=solver.damping,
            strat_tol=solver.strat_tol,
            resid_tol=solver.resid_tol,
            max_iter=solver.max_iter,
            threads=self.threads,
            disc=self.disc,
        )

    def _run_nash_ergodic(self):
        solver = self.run.solver
        return nash_iterate_ergodic(
            self.run.game,
            self.grid,
            solver.theta,
            self._init_pair(),
            self._anchor(),
            self.run.schedule,
            damping=solver.damping,
            strat_tol=solver.strat_tol,
            resid_tol=solver.resid_tol,
            max_iter=solver.max_iter,
            threads=self.threads,
            disc=self.disc,
            cert=self.run.certificate,
        )

    def nash(self) -> RunResult:
        """Discounted fictitious play with deviation and consistency tests."""
        click.echo("🔄 Running discounted Nash iteration")
        report = self._run_nash()
        self.output_generator.display_iteration("discounted Nash", report)
        artifacts = []
        for field, strategy in zip(report.values, report.strategies):
            artifacts.append(self.output_generator.write_values(field, self.output_dir))
            artifacts.append(
                self.output_generator.write_strategies(
                    strategy, self.grid, self.output_dir, self.theta_grid
                )
            )
        deviation = deviation_test(
            self.run.game,
            self.grid,
            self.theta_grid,
            self.run.solver.alpha,
            report.strategies,
            self._deviations(),
            self.run.solver.dev_tol,
            disc=self.disc,
        )
        moved = fixed_point_consistency(
            report, self.theta_grid, self.run.solver.alpha, self.disc
        )
        payload = {
            "nash": report.to_dict(),
            "deviation": deviation.to_dict(),
            "fixed_point_moved_fraction": moved,
            "values": value_summary(list(report.values), self.disc.cost_sup),
        }
        if not report.converged:
            exit_code, message = EXIT_NOT_CONVERGED, "Nash iteration did not converge"
        elif not deviation.holds:
            exit_code = EXIT_NUMERICAL
            message = f"deviation gain {deviation.worst_violation:.3e} exceeds tolerance"
        else:
            exit_code, message = EXIT_OK, "discounted Nash equilibrium found"
        return self._finish("nash", payload, artifacts, exit_code, message)

    def nash_ergodic(self) -> RunResult:
        """Ergodic fictitious play with deviation and bound tests."""
        click.echo("🔄 Running ergodic Nash iteration")
        report = self._run_nash_ergodic()
        self.output_generator.display_iteration("ergodic Nash", report)
        artifacts = []
        bounds = []
        for solution, strategy in zip(report.solutions, report.strategies):
            artifacts.append(
                self.output_generator.write_ergodic(solution, self.grid, self.output_dir)
            )
            artifacts.append(
                self.output_generator.write_strategies(strategy, self.grid, self.output_dir)
            )
            bounds.append(
                check_solution_bounds(
                    solution,
                    self.grid,
                    self.disc.cost_sup[solution.player - 1],
                    self.run.certificate,
                ).to_dict()
            )
        deviation = deviation_test_ergodic(
            self.run.game,
            self.grid,
            self.run.solver.theta,
            report.strategies,
            self._deviations(),
            self.run.solver.dev_tol,
            report.solutions[0].anchor,
            disc=self.disc,
        )
        payload = {
            "nash_ergodic": report.to_dict(),
            "deviation": deviation.to_dict(),
            "bounds": bounds,
        }
        if not report.converged:
            exit_code, message = EXIT_NOT_CONVERGED, "ergodic Nash iteration did not converge"
        elif not deviation.holds:
            exit_code = EXIT_NUMERICAL
            message = f"deviation gain {deviation.worst_violation:.3e} exceeds tolerance"
        else:
            exit_code, message = EXIT_OK, "ergodic Nash equilibrium found"
        return self._finish("nash-ergodic", payload, artifacts, exit_code, message)

    def simulate(self, pair_source: str = "init") -> RunResult:
        """Monte-Carlo estimates for the configured player and start point.

        Args:
            pair_source: ``init`` simulates the initial pair, ``nash`` the
                pairs returned by the discounted and ergodic Nash iterations
        """
        run = self.run
        solver = run.solver
        simcfg = run.build_sim_config()
        simcfg.check_against(self.grid)
        x = run.simulation.start
        payload: Dict[str, Any] = {"pair_source": pair_source}
        artifacts = []

        if pair_source == "nash":
            discounted_pair = self._run_nash().strategies
            ergodic_pair = self._run_nash_ergodic().strategies
        else:
            discounted_pair = ergodic_pair = self._init_pair()

        estimates = {}
        estimates["discounted"] = mc_discounted(
            run.game,
            self.grid,
            *discounted_pair,
            x,
            solver.theta,
            solver.alpha,
            solver.player,
            simcfg,
            theta_grid=self.theta_grid,
            threads=self.threads,
        )
        estimates["ergodic"] = mc_ergodic(
            run.game,
            self.grid,
            *ergodic_pair,
            x,
            solver.theta,
            solver.player,
            simcfg,
            threads=self.threads,
        )
        cert = run.certificate
        ball = run.build_ball()
        if cert is not None:
            if ball is not None:
                payload["hitting"] = []
                for point in run.start_points():
                    estimate = mc_hitting_bound(
                        run.game,
                        self.grid,
                        *ergodic_pair,
                        point,
                        cert,
                        ball,
                        simcfg,
                        threads=self.threads,
                    )
                    self.output_generator.display_estimate(f"hitting from {point}", estimate)
                    payload["hitting"].append({"start": list(point), **estimate.to_dict()})
            estimates["power_lyapunov"] = mc_power_lyapunov(
                run.game,
                self.grid,
                *ergodic_pair,
                x,
                solver.theta,
                solver.player,
                cert,
                simcfg,
                threads=self.threads,
            )

        for label, estimate in estimates.items():
            self.output_generator.display_estimate(label, estimate)
            payload[label] = estimate.to_dict()
            if run.output.per_path_csv:
                artifacts.append(
                    self.output_generator.write_per_path(estimate, self.output_dir)
                )
        return self._finish("simulate", payload, artifacts, EXIT_OK, "simulation finished")

    def oracle(self) -> RunResult:
        """Chain references for the initial pair on a small lattice."""
        run = self.run
        solver = run.solver
        v1, v2 = self._init_pair()
        chain = build_chain(run.game, self.grid, run.simulation.dt, disc=self.disc)
        start = self._start_index()
        players = []
        for player, opponent in ((1, v2), (2, v1)):
            r_sup = self.disc.cost_sup[player - 1]
            values = vi_discounted(
                chain,
                solver.theta,
                solver.alpha,
                player,
                v1,
                v2,
                kappa=self.theta_grid.kappa,
                r_sup=r_sup,
            )
            rho, _ = perron_ergodic(chain, solver.theta, player, v1, v2, anchor=start)
            entry = {
                "player": player,
                "discounted_at_start": float(values[start]),
                "discounted_min": float(values.min()),
                "discounted_max": float(values.max()),
                "rho": rho,
                "stationary_average_cost": stationary_average_cost(chain, player, v1, v2),
            }
            m = run.game.n_actions[player - 1]
            if m**chain.n_states <= ENUMERATION_CAP:
                actions, best = best_response_exhaustive(
                    chain, solver.theta, player, opponent, anchor=start
                )
                entry["exhaustive_best_rho"] = best
                entry["exhaustive_best_actions"] = actions.tolist()
            else:
                logger.warning(
                    "exhaustive best response skipped: %d^%d selectors",
                    m,
                    chain.n_states,
                )
            click.echo(
                f"   player {player}: V(x0) = {entry['discounted_at_start']:.10g}, "
                f"rho = {rho:.10g}"
            )
            players.append(entry)
        return self._finish(
            "oracle",
            {"dt": chain.dt, "n_states": chain.n_states, "players": players},
            [],
            EXIT_OK,
            "oracle references computed",
        )

    def crosscheck(self) -> RunResult:
        """PDE, Monte-Carlo and chain triangle plus discretization robustness."""
        run = self.run
        solver = run.solver
        pair = self._init_pair()
        rows = run_crosscheck(
            run.game,
            self.grid,
            solver.theta,
            solver.alpha,
            pair,
            dt=run.simulation.dt,
            n_theta=run.grid.n_theta,
            kappa_ratio=run.grid.kappa_ratio,
            horizon=run.simulation.horizon,
            n_paths=run.simulation.paths,
            seed=run.simulation.seed,
            mixing=run.build_sim_config().mixing,
        )
        rows.append(
            kappa_halving_check(
                run.game,
                self.grid,
                self.theta_grid,
                solver.alpha,
                solver.player,
                pair,
                disc=self.disc,
            )
        )
        rows.extend(
            domain_doubling_check(
                run.game,
                self.grid,
                self.theta_grid,
                solver.alpha,
                solver.theta,
                solver.player,
                init=solver.init,
            )
        )
        self.output_generator.display_crosscheck(rows)
        failed = [row.name for row in rows if not row.passed]
        exit_code = EXIT_NUMERICAL if failed else EXIT_OK
        message = "all crosschecks passed" if not failed else f"{len(failed)} crosschecks failed"
        return self._finish(
            "crosscheck", {"rows": [r.to_dict() for r in rows]}, [], exit_code, message
        )


class OrderedGroup(click.Group):
    """Custom Click group to present commands in pipeline order for --help."""

    PIPELINE = [
        "check",
        "solve-discounted",
        "solve-ergodic",
        "nash",
        "nash-ergodic",
        "simulate",
    ]

    VALIDATION = [
        "oracle",
        "crosscheck",
    ]

    def list_commands(self, ctx):  # type: ignore[override]
        ordered = [n for n in self.PIPELINE + self.VALIDATION if n in self.commands]
        return ordered + sorted(n for n in self.commands if n not in ordered)

    def format_commands(self, ctx, formatter):  # type: ignore[override]
        def render_section(title: str, names: List[str]) -> None:
            rows = []
            for name in names:
                cmd = self.get_command(ctx, name)
                if cmd is None or getattr(cmd, "hidden", False):
                    continue
                rows.append((name, cmd.get_short_help_str()))
            if rows:
                formatter.write_heading(title)
                with formatter.indentation():
                    formatter.write_dl(rows)
                formatter.write("\n")

        render_section("Solver pipeline", [n for n in self.PIPELINE if n in self.commands])
        render_section(
            "Validation", [n for n in self.VALIDATION if n in self.commands]
        )


# Flag name -> dotted run-file key
FLAG_KEYS = {
    "half_width": "grid.half_width",
    "spacing": "grid.spacing",
    "n_theta": "grid.n_theta",
    "kappa_ratio": "grid.kappa_ratio",
    "theta_cap": "grid.theta_cap",
    "alpha": "solver.alpha",
    "theta": "solver.theta",
    "alphas": "solver.alphas",
    "player": "solver.player",
    "strat_tol": "solver.strat_tol",
    "resid_tol": "solver.resid_tol",
    "dev_tol": "solver.dev_tol",
    "max_iter": "solver.max_iter",
    "damping": "solver.damping",
    "schedule": "solver.schedule",
    "init": "solver.init",
    "dt": "simulation.dt",
    "horizon": "simulation.horizon",
    "paths": "simulation.paths",
    "seed": "simulation.seed",
    "mixing": "simulation.mixing",
    "output_dir": "output.directory",
    "per_path_csv": "output.per_path_csv",
}

RUN_OPTIONS = [
    click.option("--half-width", type=float, help="Domain half width L"),
    click.option("--spacing", type=float, help="Grid spacing dx"),
    click.option("--n-theta", type=int, help="Number of theta steps"),
    click.option("--kappa-ratio", type=float, help="kappa as a fraction of the cap"),
    click.option("--theta-cap", type=float, help="Largest theta on the lattice"),
    click.option("--alpha", type=float, help="Discount rate"),
    click.option("--theta", type=float, help="Risk-sensitivity parameter"),
    click.option("--alphas", help="Comma-separated discount rates for the vanishing-discount check"),
    click.option("--player", type=click.IntRange(1, 2), help="Player for one-sided runs"),
    click.option("--strat-tol", type=float, help="Strategy change tolerance"),
    click.option("--resid-tol", type=float, help="Coupled residual tolerance"),
    click.option("--dev-tol", type=float, help="Deviation gain tolerance"),
    click.option("--max-iter", type=int, help="Fictitious play iteration cap"),
    click.option("--damping", type=float, help="Constant damping factor"),
    click.option(
        "--schedule", type=click.Choice(["constant", "harmonic"]), help="Damping schedule"
    ),
    click.option(
        "--init", type=click.Choice(["uniform", "dirac", "random"]), help="Initial pair"
    ),
    click.option("--dt", type=float, help="Simulation time step"),
    click.option("--horizon", type=float, help="Simulation horizon T"),
    click.option("--paths", type=int, help="Number of simulated paths"),
    click.option("--seed", type=int, help="Simulation seed"),
    click.option(
        "--mixing", type=click.Choice(["sample", "average"]), help="Mixed-action mode"
    ),
    click.option("--output-dir", "-o", help="Directory for CSV and report output"),
    click.option(
        "--per-path-csv/--no-per-path-csv",
        default=None,
        help="Write per-path Monte-Carlo samples",
    ),
    click.option("--threads", type=int, help="Worker thread cap"),
    click.option(
        "--log-level",
        type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
        help="Logging level",
    ),
]


def run_command(func):
    """Attach the run-file argument and shared flags, and map errors to exit codes."""

    @click.argument("run_file", type=click.Path(dir_okay=False))
    @click.pass_context
    @wraps(func)
    def wrapper(ctx, run_file: str, threads=None, log_level=None, **kwargs):
        config = ctx.obj["config"]
        config.configure_logging(log_level)
        extra = {k: v for k, v in kwargs.items() if k not in FLAG_KEYS}
        if not Path(run_file).exists():
            click.echo(f"❌ Run file not found: {run_file}")
            sys.exit(2)
        try:
            kwargs["alphas"] = parse_floats(kwargs.get("alphas"))
            run = RunConfig.load(run_file, overrides=apply_flag_overrides(kwargs, FLAG_KEYS))
            validation = run.validate()
            if not validation.is_valid:
                click.echo("❌ Run configuration errors:")
                for error in validation.errors:
                    click.echo(f"   • {error}")
                sys.exit(2)
            for warning in validation.warnings:
                click.echo(f"⚠️  {warning}")
            solver = GameSolver(config, run, threads=threads)
            click.echo(f"📁 Output directory: {solver.output_dir}")
            result = func(solver, **extra)
        except GameSolverError as e:
            click.echo(f"❌ {type(e).__name__}: {e}")
            sys.exit(e.exit_code)

        icon = "✅" if result.success else ("⚠️ " if result.exit_code == 4 else "❌")
        click.echo(f"{icon} {result.message}")
        for artifact in result.artifacts:
            click.echo(f"   📄 {artifact}")
        if result.exit_code:
            sys.exit(result.exit_code)

    for option in reversed(RUN_OPTIONS):
        wrapper = option(wrapper)
    return wrapper


# CLI Interface
@click.group(cls=OrderedGroup, invoke_without_command=True)
@click.pass_context
def cli(ctx):
    """Risk-sensitive game solver - HJB, Nash and ergodic solvers for two-player games."""
    if ctx.invoked_subcommand is None:
        click.echo("🎲 Risk-sensitive game solver")
        click.echo("=" * 40)
        click.echo("📋 Most Common Commands:")
        click.echo("  python3 game_solver.py check games/stable_tanh.toml")
        click.echo("  python3 game_solver.py nash games/stable_tanh.toml")
        click.echo("  python3 game_solver.py nash-ergodic games/stable_tanh.toml")
        click.echo("  python3 game_solver.py crosscheck games/triangle_chain.toml")
        click.echo("\n💡 Use --help to see all commands and options")
        return

    config = Config()
    validation = config.validate_required_settings()
    if not validation.is_valid:
        click.echo("❌ Configuration errors:")
        for error in validation.errors:
            click.echo(f"   • {error}")
        sys.exit(2)

    if validation.warnings:
        click.echo("⚠️  Configuration warnings:")
        for warning in validation.warnings:
            click.echo(f"   • {warning}")

    ctx.ensure_object(dict)
    ctx.obj["config"] = config


@cli.command()
@run_command
def check(solver: GameSolver) -> RunResult:
    """Check ellipticity, boundedness and the Lyapunov conditions."""
    return solver.check()


@cli.command(name="solve-discounted")
@run_command
def solve_discounted_cmd(solver: GameSolver) -> RunResult:
    """Solve the discounted best responses to the initial pair."""
    return solver.solve_discounted()


@cli.command(name="solve-ergodic")
@run_command
def solve_ergodic_cmd(solver: GameSolver) -> RunResult:
    """Solve the ergodic best responses and compare with vanishing discount."""
    return solver.solve_ergodic()


@cli.command()
@run_command
def nash(solver: GameSolver) -> RunResult:
    """Find a discounted Nash equilibrium by fictitious play."""
    return solver.nash()


@cli.command(name="nash-ergodic")
@run_command
def nash_ergodic(solver: GameSolver) -> RunResult:
    """Find an ergodic Nash equilibrium by fictitious play."""
    return solver.nash_ergodic()


@cli.command()
@click.option(
    "--pair",
    "pair_source",
    type=click.Choice(PAIR_SOURCES),
    default="init",
    help="Simulate the initial pair or the Nash pairs",
)
@run_command
def simulate(solver: GameSolver, pair_source: str = "init") -> RunResult:
    """Monte-Carlo estimates of the discounted and ergodic criteria."""
    return solver.simulate(pair_source)


@cli.command()
@run_command
def oracle(solver: GameSolver) -> RunResult:
    """Brute-force chain references on a small lattice."""
    return solver.oracle()


@cli.command()
@run_command
def crosscheck(solver: GameSolver) -> RunResult:
    """PDE vs Monte-Carlo vs chain oracle pass/fail matrix."""
    return solver.crosscheck()


if __name__ == "__main__":
    cli()
