"""Key = value configuration files for the tracker."""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .tracker import TrackerConfig

_INT_FIELDS = {
    "window_height", "window_width", "patch_height", "patch_width",
    "patch_step", "template_count", "n_iter", "n_scal", "particle_count",
}
_FLOAT_FIELDS = {"l1_penalty", "encode_tol", "alpha", "gamma0", "scale_step"}
_OPTIONAL_FLOAT_FIELDS = {"bandwidth"}
_OPTIONAL_INT_FIELDS = {"max_pivots"}


def parse_keyvalue_file(path) -> dict[str, str]:
    """Read ``key = value`` lines; blank lines and ``#`` comments skipped."""
    mapping: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def _parse_offsets(raw: str):
    if raw.lower() == "none":
        return None
    pairs = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ValueError(f"offset {chunk!r} must be 'dx,dy'")
        pairs.append((float(parts[0]), float(parts[1])))
    return tuple(pairs)


def tracker_config_from_mapping(mapping: dict) -> TrackerConfig:
    known = {f.name for f in dataclasses.fields(TrackerConfig)}
    kwargs = {}
    for key, raw in mapping.items():
        if key not in known:
            raise ValueError(f"unknown tracker config key {key!r}")
        if key in _INT_FIELDS:
            kwargs[key] = int(raw)
        elif key in _FLOAT_FIELDS:
            kwargs[key] = float(raw)
        elif key in _OPTIONAL_FLOAT_FIELDS:
            kwargs[key] = None if raw.lower() == "none" else float(raw)
        elif key in _OPTIONAL_INT_FIELDS:
            kwargs[key] = None if raw.lower() == "none" else int(raw)
        elif key == "particle_offsets":
            kwargs[key] = _parse_offsets(raw)
        else:  # pragma: no cover - keeps field table honest
            raise ValueError(f"no parser for config key {key!r}")
    return TrackerConfig(**kwargs)


def tracker_config_from_file(path) -> TrackerConfig:
    return tracker_config_from_mapping(parse_keyvalue_file(path))
