"""Configuration management for the risk-sensitive game solver.

Two layers: ``Config`` holds process settings from the environment (and an
optional .env file); ``RunConfig`` holds one experiment, read from a TOML
run file and overridden by command-line flags.
"""

import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from dotenv import load_dotenv

from errors import ConfigError
from game_model import validate_spec
from models import (
    Ball,
    GameSpec,
    Grid,
    LyapunovCertificate,
    MixingMode,
    Schedule,
    SimConfig,
    ThetaGrid,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class ValidationResult:
    """Result of configuration validation."""

    is_valid: bool
    errors: list[str]
    warnings: list[str]


class Config:
    """Process-level settings for the game solver."""

    def __init__(self, env_file: Optional[str] = None):
        """Initialize configuration.

        Args:
            env_file: Optional path to .env file. If None, looks for .env in
                current directory.
        """
        self.env_file = env_file or ".env"
        self.load_env()

    def load_env(self) -> None:
        """Load environment variables from .env file."""
        if os.path.exists(self.env_file):
            load_dotenv(self.env_file)

    @property
    def output_path(self) -> str:
        """Get default output directory path."""
        return os.getenv("RSG_OUTPUT_PATH", "./output")

    @property
    def threads(self) -> int:
        """Get worker thread cap."""
        return int(os.getenv("RSG_THREADS", "1"))

    @property
    def log_level(self) -> str:
        """Get logging level name."""
        return os.getenv("RSG_LOG_LEVEL", "WARNING").upper()

    @property
    def ellip_min(self) -> float:
        """Get the ellipticity floor used by the checkers."""
        return float(os.getenv("RSG_ELLIP_MIN", "1e-10"))

    def validate_required_settings(self) -> ValidationResult:
        """Validate that all settings are present and usable.

        Returns:
            ValidationResult with validation status and any errors/warnings.
        """
        errors = []
        warnings = []

        try:
            if self.threads <= 0:
                errors.append("RSG_THREADS must be greater than 0.")
            elif self.threads > (os.cpu_count() or 1):
                warnings.append(
                    f"RSG_THREADS={self.threads} exceeds the {os.cpu_count()} "
                    "available CPUs."
                )
        except ValueError:
            errors.append("RSG_THREADS must be an integer.")

        try:
            if not self.ellip_min > 0:
                errors.append("RSG_ELLIP_MIN must be positive.")
        except ValueError:
            errors.append("RSG_ELLIP_MIN must be a number.")

        if self.log_level not in LOG_LEVELS:
            errors.append(
                f"RSG_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, "
                f"got {self.log_level}."
            )

        try:
            Path(self.output_path).mkdir(parents=True, exist_ok=True)
            test_file = Path(self.output_path) / ".write_test"
            test_file.write_text("test")
            test_file.unlink()
        except (OSError, PermissionError) as e:
            errors.append(f"Cannot write to output_path ({self.output_path}): {e}")

        return ValidationResult(
            is_valid=len(errors) == 0, errors=errors, warnings=warnings
        )

    def configure_logging(self, level: Optional[str] = None) -> None:
        """Configure the root logger once for a CLI run."""
        logging.basicConfig(
            level=getattr(logging, (level or self.log_level).upper(), logging.WARNING),
            format="%(levelname)s %(name)s: %(message)s",
        )

    def __str__(self) -> str:
        """String representation of configuration."""
        return f"""Config:
  Output Path: {self.output_path}
  Threads: {self.threads}
  Log Level: {self.log_level}
  Ellipticity Floor: {self.ellip_min}"""


@dataclass
class GridSettings:
    """Spatial lattice and theta lattice."""

    half_width: float = 6.0
    spacing: float = 0.05
    n_theta: int = 200
    kappa_ratio: float = 1e-3
    theta_cap: float = 1.0


@dataclass
class SolverSettings:
    """Risk, discount and iteration parameters."""

    alpha: float = 1.0
    theta: float = 0.2
    player: int = 1
    strat_tol: float = 1e-4
    resid_tol: float = 1e-3
    dev_tol: float = 5e-3
    max_iter: int = 200
    damping: float = 0.5
    schedule: str = "constant"
    init: str = "uniform"
    init_seed: int = 0
    deviation_cap: int = 64
    slack_tol: float = 1e-9
    alphas: List[float] = field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05])
    anchor: Optional[List[float]] = None


@dataclass
class SimulationSettings:
    """Monte-Carlo parameters."""

    dt: float = 0.01
    horizon: float = 5.0
    paths: int = 2000
    seed: int = 12345
    mixing: str = "sample"
    tail_tol: float = 1e-4
    start: List[float] = field(default_factory=lambda: [0.0])
    starts: List[List[float]] = field(default_factory=list)
    ball: Optional[Dict[str, Any]] = None


@dataclass
class OutputSettings:
    """Artifact locations."""

    directory: Optional[str] = None
    per_path_csv: bool = False


SECTIONS = {
    "grid": GridSettings,
    "solver": SolverSettings,
    "simulation": SimulationSettings,
    "output": OutputSettings,
}


def _read_toml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"TOML syntax error: {e}", str(path))


def _section(cls, raw: Dict[str, Any], name: str):
    """Build a settings dataclass, rejecting unknown keys."""
    known = cls.__dataclass_fields__
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}", name)
    return cls(**raw)


@dataclass
class RunConfig:
    """One experiment: game, certificate, lattices, solver and simulation settings."""

    game: GameSpec
    certificate: Optional[LyapunovCertificate] = None
    grid: GridSettings = field(default_factory=GridSettings)
    solver: SolverSettings = field(default_factory=SolverSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    source: Optional[str] = None

    @classmethod
    def load(
        cls, path: str, overrides: Optional[Dict[str, Any]] = None
    ) -> "RunConfig":
        """Read a run file and apply dotted-key overrides.

        Args:
            path: TOML run file
            overrides: Mapping such as ``{"solver.alpha": 0.5}``; None values
                are ignored

        Returns:
            RunConfig with every section populated
        """
        run_path = Path(path)
        data = _read_toml(run_path)
        return cls.from_dict(data, base_dir=run_path.parent, overrides=overrides, source=path)

    @classmethod
    def from_dict(
        cls,
        data: Dict[str, Any],
        base_dir: Optional[Path] = None,
        overrides: Optional[Dict[str, Any]] = None,
        source: Optional[str] = None,
    ) -> "RunConfig":
        """Create instance from a parsed run document."""
        unknown = sorted(set(data) - set(SECTIONS) - {"game", "certificate"})
        if unknown:
            raise ConfigError(f"unknown section(s) {', '.join(unknown)}")
        if "game" not in data:
            raise ConfigError("missing", "game")
        game_data = dict(data["game"])
        if "file" in game_data:
            game_path = (base_dir or Path(".")) / game_data.pop("file")
            included = _read_toml(game_path)
            game_data = {**included.get("game", included), **game_data}
        game = GameSpec.from_dict(game_data)
        validate_spec(game)

        certificate = None
        if "certificate" in data:
            certificate = LyapunovCertificate.from_dict(data["certificate"], game.dimension)

        sections = {}
        for name, settings_cls in SECTIONS.items():
            raw = dict(data.get(name, {}))
            for key, value in (overrides or {}).items():
                section, _, attr = key.partition(".")
                if section == name and value is not None:
                    raw[attr] = value
            try:
                sections[name] = _section(settings_cls, raw, name)
            except TypeError as e:
                raise ConfigError(str(e), name)

        return cls(
            game=game,
            certificate=certificate,
            source=source,
            **sections,
        )

    def build_grid(self) -> Grid:
        return Grid.regular(self.grid.half_width, self.grid.spacing, self.game.dimension)

    def build_theta_grid(self) -> ThetaGrid:
        return ThetaGrid.from_cap(
            self.grid.theta_cap, self.grid.n_theta, self.grid.kappa_ratio
        )

    @property
    def schedule(self) -> Schedule:
        try:
            return Schedule(self.solver.schedule)
        except ValueError:
            raise ConfigError(f"unknown schedule {self.solver.schedule!r}", "solver.schedule")

    def build_sim_config(self) -> SimConfig:
        sim = self.simulation
        try:
            mixing = MixingMode(sim.mixing)
        except ValueError:
            raise ConfigError(f"unknown mixing mode {sim.mixing!r}", "simulation.mixing")
        return SimConfig(
            dt=float(sim.dt),
            horizon=float(sim.horizon),
            n_paths=int(sim.paths),
            seed=int(sim.seed),
            mixing=mixing,
            tail_tol=float(sim.tail_tol),
        )

    def build_ball(self) -> Optional[Ball]:
        if self.simulation.ball is None:
            return None
        return Ball.from_dict(self.simulation.ball, self.game.dimension, "simulation.ball")

    def anchor_index(self, grid: Grid) -> Optional[int]:
        """Node nearest the configured anchor, or None for the default."""
        if self.solver.anchor is None:
            return None
        return int(grid.nearest_index(self.solver.anchor)[0])

    def start_points(self) -> List[Tuple[float, ...]]:
        """Hitting-bound start points, or the single start point."""
        points = self.simulation.starts or [self.simulation.start]
        return [tuple(float(v) for v in p) for p in points]

    def output_dir(self, config: Config) -> str:
        return self.output.directory or config.output_path

    def validate(self) -> ValidationResult:
        """Check ranges the dataclasses cannot check on their own."""
        errors = []
        warnings = []
        solver, grid, sim = self.solver, self.grid, self.simulation
        for name in ("strat_tol", "resid_tol", "dev_tol", "slack_tol", "alpha", "theta"):
            if not getattr(solver, name) > 0:
                errors.append(f"solver.{name} must be positive")
        if not 0 < solver.theta < grid.theta_cap:
            errors.append("solver.theta must lie in (0, grid.theta_cap)")
        if not 0 < grid.kappa_ratio < 1:
            errors.append("grid.kappa_ratio must lie in (0, 1)")
        if grid.n_theta < 2:
            errors.append("grid.n_theta must be at least 2")
        if not 0 < solver.damping <= 1:
            errors.append("solver.damping must lie in (0, 1]")
        if solver.max_iter < 1:
            errors.append("solver.max_iter must be at least 1")
        if solver.player not in (1, 2):
            errors.append("solver.player must be 1 or 2")
        alphas = list(solver.alphas)
        if not alphas or min(alphas) <= 0:
            errors.append("solver.alphas must be positive")
        elif any(a <= b for a, b in zip(alphas, alphas[1:])):
            errors.append("solver.alphas must be strictly decreasing")
        if len(sim.start) != self.game.dimension:
            errors.append("simulation.start needs one coordinate per dimension")
        if sim.dt > grid.spacing:
            warnings.append("simulation.dt exceeds grid.spacing; simulation will refuse it")
        try:
            self.schedule
            self.build_grid()
            self.build_theta_grid()
            self.build_sim_config()
            self.build_ball()
        except ConfigError as e:
            errors.append(str(e))
        if self.certificate is None:
            warnings.append("no Lyapunov certificate: ergodic checks use the centre anchor")
        return ValidationResult(is_valid=not errors, errors=errors, warnings=warnings)

    def to_dict(self) -> Dict[str, Any]:
        """Config echo for the run report."""
        return {
            "source": self.source,
            "game": self.game.to_dict(),
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "grid": asdict(self.grid),
            "solver": asdict(self.solver),
            "simulation": asdict(self.simulation),
            "output": asdict(self.output),
        }


def apply_flag_overrides(flags: Dict[str, Any], mapping: Dict[str, str]) -> Dict[str, Any]:
    """Translate click option values into dotted config keys."""
    return {mapping[name]: value for name, value in flags.items() if name in mapping}


def parse_floats(raw: Optional[str]) -> Optional[Sequence[float]]:
    """Comma-separated floats from a flag value."""
    if raw is None:
        return None
    try:
        return [float(item) for item in raw.split(",") if item.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {raw!r}")
