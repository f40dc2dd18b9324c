"""
CSV and JSON artifacts. Every CSV opens with a '# touchdown_lab <version> config_hash=<hash>'
line; every JSON carries 'config_hash' and 'version'. Nothing time-of-day dependent is written.
"""
import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from touchdown_lab import __version__
from touchdown_lab.model import ModelParams, RadialState
from touchdown_lab.solver import chemical_potential

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def header_line(config_hash: str) -> str:
    return f"# touchdown_lab {__version__} config_hash={config_hash}\n"


def write_csv(frame: pd.DataFrame, path, config_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header_line(config_hash))
        frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def read_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", float_precision="round_trip")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, Path):
        return value.as_posix()
    return value


def write_json(payload: Dict[str, Any], path, config_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = dict(_jsonable(payload))
    document["config_hash"] = config_hash
    document["version"] = __version__
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    logger.debug("wrote %s", path)
    return path


def read_json(path) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def snapshot_frame(state: RadialState, params: ModelParams) -> pd.DataFrame:
    grid = state.grid
    return pd.DataFrame({
        "r": grid.nodes,
        "u": state.values,
        "v": state.v,
        "mu": chemical_potential(state, params, grid),
    })


def snapshot_name(index: int) -> str:
    return f"snapshot_{index:04d}.csv"


class SnapshotWriter:
    """
    Writes one CSV per snapshot under snapshots/ and keeps the manifest entries
    """

    def __init__(self, directory, params: ModelParams, config_hash: str):
        self.directory = Path(directory)
        self.params = params
        self.config_hash = config_hash
        self.entries: List[Dict[str, Any]] = []

    def __call__(self, state: RadialState) -> None:
        name = f"snapshots/{snapshot_name(len(self.entries))}"
        write_csv(snapshot_frame(state, self.params), self.directory / name, self.config_hash)
        self.entries.append({"time": float(state.time), "path": name})

    def write_manifest(self, extra: Optional[Dict[str, Any]] = None) -> Path:
        payload = {"snapshots": self.entries}
        if extra:
            payload.update(extra)
        return write_json(payload, self.directory / "manifest.json", self.config_hash)


def load_snapshots(directory) -> List[RadialState]:
    """
    States listed in manifest.json, in time order
    """
    directory = Path(directory)
    manifest = read_json(directory / "manifest.json")
    states = []
    for entry in manifest.get("snapshots", []):
        frame = read_csv(directory / entry["path"])
        states.append(RadialState(time=float(entry["time"]), values=frame["u"].to_numpy()))
    return sorted(states, key=lambda s: s.time)

