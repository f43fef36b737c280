"""Run-directory I/O: CSV tables, config echoes, and the run manifest.

All numeric output uses 17 significant digits so that exported paths round-trip
exactly through the residual and comparison commands. The manifest is written
atomically (temp file + rename) so a crashed run never leaves a half manifest.
"""

import json
import os
import tempfile

import numpy as np

from .errors import ConfigError

FMT = "%.17g"


def format_float(x: float) -> str:
    return FMT % float(x)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(x) for x in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """(header, float array [n_rows, n_cols]); malformed rows raise ConfigError."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ConfigError(f"{path}: empty CSV")
    header = lines[0].split(",")
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != len(header):
            raise ConfigError(f"{path}: row {i} has {len(cells)} cells, expected {len(header)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise ConfigError(f"{path}: row {i} is not numeric") from None
    return header, np.asarray(rows, dtype=np.float64)


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    return str(v)


def write_config_echo(path, config: dict) -> None:
    """Flat `key = value` lines in sorted key order."""
    lines = [f"{k} = {_format_value(config[k])}" for k in sorted(config)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError(f"unterminated list value: {text!r}")
        inner = text[1:-1].strip()
        return [_parse_value(x) for x in inner.split(",")] if inner else []
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def read_config(path) -> dict:
    """Accepts either a JSON object or the flat `key = value` echo format."""
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: config must be an object")
        if "config" in obj and isinstance(obj["config"], dict):
            return obj["config"]  # a manifest: re-run from its embedded config
        return obj
    config = {}
    for i, ln in enumerate(text.splitlines(), start=1):
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise ConfigError(f"{path}: line {i} is not `key = value`")
        key, _, val = ln.partition("=")
        config[key.strip()] = _parse_value(val)
    return config


def write_manifest(path, manifest: dict) -> None:
    """Atomic JSON write so partial runs never leave a truncated manifest."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
