"""JSON loaders for games and targets, with file positions in parse errors."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .exceptions import ApproachabilityError, ConfigError
from .game import Game
from .geometry import TargetSet


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_game(path) -> Game:
    data = read_json(path)
    try:
        return Game.from_json(data)
    except ApproachabilityError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed game description ({exc})") from None


def target_from_json(data: dict) -> TargetSet:
    if isinstance(data, dict) and "pieces" not in data and ("halfspaces" in data or "vertices" in data):
        data = {"pieces": [data]}
    try:
        return TargetSet.from_json(data)
    except KeyError as exc:
        raise ConfigError(f"target description is missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed target description ({exc})") from None


def load_target(path) -> TargetSet:
    data = read_json(path)
    if "pieces" not in data and data.get("kind") == "rho_preimage":
        data = _nested(path, data["target"])
    try:
        return target_from_json(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _nested(path, spec):
    if isinstance(spec, str):
        return read_json(Path(path).parent / spec)
    return spec


def load_target_spec(path) -> dict:
    """Raw target description; nested target files are resolved relative to ``path``."""
    data = read_json(path)
    if data.get("kind") == "rho_preimage":
        data = dict(data, target=_nested(path, data["target"]))
    return data


def read_replay(path) -> list[np.ndarray | int]:
    """Actions for the replay adversary: one per line, a vertex index or comma-separated weights."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if "," in line:
                out.append(np.array([float(v) for v in line.split(",")]))
            else:
                out.append(int(line))
        except ValueError:
            raise ConfigError(f"{path}:{lineno}:1: cannot parse replay action {line!r}") from None
    if not out:
        raise ConfigError(f"{path}: replay file holds no actions")
    return out
