"""
Run configuration: a tree of frozen dataclasses stored as JSON.

Syntax errors are reported with line and column, semantic errors with the dotted field path.
config_hash is the SHA-256 of the canonical JSON form and tags every artifact of a run.
"""
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from touchdown_lab.model import ModelParams
from touchdown_lab.solver import SolverConfig

STAGES = ("simulate", "exponents", "annular", "touchdown", "composite", "reproduce")


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = "", line: Optional[int] = None,
                 column: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if path:
            where.append(f"field '{path}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class InitialConfig:
    amplitude: float = 0.95
    center: float = 0.5
    flat_ends: bool = False

    def __post_init__(self):
        if not 0.0 < self.amplitude < 1.0:
            raise ValueError(f"amplitude must lie in (0, 1), got {self.amplitude}")
        if not 0.0 < self.center < 1.0:
            raise ValueError(f"center must lie in (0, 1), got {self.center}")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs/default"
    snapshots_per_decade: int = 8
    first_snapshot: float = 1e-4
    composite_times: Tuple[float, ...] = (1e10, 1e12)

    def __post_init__(self):
        if self.snapshots_per_decade < 1:
            raise ValueError("snapshots_per_decade must be at least 1")
        if not self.first_snapshot > 0:
            raise ValueError("first_snapshot must be positive")
        if any(not t > 0 for t in self.composite_times):
            raise ValueError("composite_times must be positive")


@dataclass(frozen=True)
class SimilarityConfig:
    window: int = 8
    tail_fraction: float = 0.2
    collapse_from: float = 1e10

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if not 0.0 < self.tail_fraction <= 1.0:
            raise ValueError("tail_fraction must lie in (0, 1]")
        if not self.collapse_from > 0:
            raise ValueError("collapse_from must be positive")


@dataclass(frozen=True)
class AnnularConfig:
    tol: float = 1e-8
    mesh_intervals: int = 4000
    max_iter: int = 40

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.mesh_intervals < 10:
            raise ValueError("mesh_intervals must be at least 10")


@dataclass(frozen=True)
class TouchdownConfig:
    L: float = 200.0
    right_length: float = 200.0
    intervals: int = 32000
    tol: float = 1e-10
    method: str = "shooting"
    refine: bool = True

    def __post_init__(self):
        if not self.L > 0 or not self.right_length > 0:
            raise ValueError("truncation lengths must be positive")
        if self.intervals < 10:
            raise ValueError("intervals must be at least 10")
        if self.method not in ("shooting", "collocation"):
            raise ValueError(f"method must be 'shooting' or 'collocation', got {self.method!r}")


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    grid_cells: int = 4000
    t_end: float = 1e12
    initial: InitialConfig = field(default_factory=InitialConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    annular: AnnularConfig = field(default_factory=AnnularConfig)
    touchdown: TouchdownConfig = field(default_factory=TouchdownConfig)
    stages: Tuple[str, ...] = ("simulate", "exponents", "annular", "touchdown", "composite")
    reproduce_n: Tuple[float, ...] = (3.0, 4.0, 5.0)

    def __post_init__(self):
        if self.grid_cells < 2:
            raise ValueError("grid_cells must be at least 2")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        unknown = [s for s in self.stages if s not in STAGES]
        if unknown:
            raise ValueError(f"unknown stages {unknown}; choose from {list(STAGES)}")


def to_dict(obj) -> Dict[str, Any]:
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if dataclasses.is_dataclass(value):
            value = to_dict(value)
        elif isinstance(value, Enum):
            value = value.value
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


def _coerce(value, default, path: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", path)
        return value
    if isinstance(default, int) and not isinstance(default, Enum):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        return float(value)
    if isinstance(default, Enum):
        try:
            return type(default)(value)
        except ValueError:
            choices = [m.value for m in type(default)]
            raise ConfigError(f"expected one of {choices}, got {value!r}", path) from None
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", path)
        sample = default[0] if default else value[0] if value else ""
        return tuple(_coerce(item, sample, f"{path}[{i}]") for i, item in enumerate(value))
    raise ConfigError(f"unsupported field type {type(default).__name__}", path)


def from_dict(cls, data, path: str = ""):
    if not isinstance(data, dict):
        raise ConfigError(f"expected an object, got {type(data).__name__}", path)
    defaults = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        key = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError("unknown key", key)

    kwargs = {}
    for name, value in data.items():
        key = f"{path}.{name}" if path else name
        default = getattr(defaults, name)
        if dataclasses.is_dataclass(default):
            kwargs[name] = from_dict(type(default), value, key)
        else:
            kwargs[name] = _coerce(value, default, key)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), path or cls.__name__) from exc


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    return from_dict(RunConfig, data)


def load_config(path) -> RunConfig:
    """
    Read a RunConfig from a JSON file; a missing path yields the defaults
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file {path} does not exist")
    return parse_config(path.read_text(encoding="utf-8"))


def dump_config(config: RunConfig) -> str:
    return json.dumps(to_dict(config), sort_keys=True, indent=2) + "\n"


def save_config(config: RunConfig, path) -> None:
    Path(path).write_text(dump_config(config), encoding="utf-8")


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def apply_overrides(config: RunConfig, n=None, eps=None, grid_cells=None, t_end=None,
                    out=None, stage=None) -> RunConfig:
    """
    Command-line values replace the corresponding configuration fields
    """
    try:
        model = config.model
        if n is not None or eps is not None:
            model = dataclasses.replace(
                model,
                n=model.n if n is None else float(n),
                epsilon=model.epsilon if eps is None else float(eps),
            )
        outputs = config.outputs if out is None else dataclasses.replace(config.outputs, directory=str(out))
        return dataclasses.replace(
            config,
            model=model,
            outputs=outputs,
            grid_cells=config.grid_cells if grid_cells is None else int(grid_cells),
            t_end=config.t_end if t_end is None else float(t_end),
            stages=config.stages if stage is None else (stage,),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), "command line") from exc
