"""
Utility functions shared by the configuration layer and the writers.

This module holds the per-subcommand configuration key registries, the
validator that reports offending keys with their line numbers, atomic file
writes and the raw grid format used for fields.
"""

import hashlib
import os
import re
import tempfile
from pathlib import Path

import numpy as np
import yaml

from hyperqma.exceptions import ConfigError

# Check if a given path exists in the filesystem
path_exists = lambda abs_path: os.path.exists(abs_path)


VALID_VERIFY_KEYS = {
    "n",
    "trials",
    "samples",
    "seed",
}

VALID_SOLVE_KEYS = {
    "n",
    "N",
    "operator",
    "family",
    "sigma",
    "amplitude",
    "baseline",
    "mode",
    "p",
    "q",
    "target",
    "center",
    "tol",
    "max_iter",
    "gmres_rtol",
    "force",
    "continuation",
    "rhs_file",
    "seed",
    "output",
}

VALID_PROBE_KEYS = {
    "n",
    "N",
    "operator",
    "family",
    "sigmas",
    "amplitude",
    "baseline",
    "mode",
    "p",
    "q",
    "target",
    "center",
    "tol",
    "max_iter",
    "force",
    "workers",
    "seed",
    "output_csv",
    "output_svg",
}

VALID_GP_CLAIM_KEYS = {
    "n",
    "radius",
    "nodes",
    "s_fractions",
    "ks",
    "source",
    "N",
    "operator",
    "family",
    "sigma",
    "amplitude",
    "workers",
    "seed",
    "output",
}

VALID_KEYS = {
    "verify-inequalities": VALID_VERIFY_KEYS,
    "solve": VALID_SOLVE_KEYS,
    "probe": VALID_PROBE_KEYS,
    "gp-claim": VALID_GP_CLAIM_KEYS,
}

# `key = value` at the start of a line; YAML `key: value` lines never match
ASSIGNMENT = re.compile(r"^(\s*)([A-Za-z_][\w-]*)\s*=\s*(.*)$")

RAW_HEADER = np.dtype("<i8")
RAW_DATA = np.dtype("<f8")


def assignments_to_yaml(text: str) -> str:
    """Rewrites `key = value` lines as `key: value`; other lines and the line numbering are kept."""
    return "\n".join(ASSIGNMENT.sub(r"\1\2: \3", line) for line in text.splitlines())


def validate_config(text: str, command: str) -> tuple[dict, dict]:
    """
    Parses a flat configuration and checks its keys against the registry of a subcommand.

    Entries are `key = value` lines or YAML `key: value` lines, with `#` comments.
    Values are read as YAML scalars or flow lists.

    Args:
        text (str): Contents of the configuration file.
        command (str): Subcommand whose key registry applies.

    Returns:
        tuple[dict, dict]: The parsed mapping (empty for an empty file) and the 1-based line of each key.

    Raises:
        ConfigError: On malformed YAML, a non-mapping document, nested values that
            are not lists of scalars, or an unknown key (reported with its 1-based line).
    """
    valid = VALID_KEYS[command]
    text = assignments_to_yaml(text)
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"malformed configuration: {e}", None if mark is None else mark.line + 1) from None
    if node is None:
        return {}, {}
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError("configuration must be a flat mapping of key = value entries", node.start_mark.line + 1)

    lines = {}
    for key_node, value_node in node.value:
        line = key_node.start_mark.line + 1
        lines[key_node.value] = line
        if key_node.value not in valid:
            raise ConfigError(f"unknown key '{key_node.value}' for '{command}'", line)
        if isinstance(value_node, yaml.MappingNode):
            raise ConfigError(f"'{key_node.value}' must be a scalar or a list", line)
        if isinstance(value_node, yaml.SequenceNode) and any(
            not isinstance(v, yaml.ScalarNode) for v in value_node.value
        ):
            raise ConfigError(f"'{key_node.value}' must be a list of scalars", line)

    return yaml.safe_load(text) or {}, lines


def rng_digest(rng: np.random.Generator) -> str:
    """Short sha256 digest of the generator state, printed with every run."""
    state = yaml.safe_dump(rng.bit_generator.state, sort_keys=True)
    return hashlib.sha256(state.encode()).hexdigest()[:16]


def atomic_write(path: str | Path, data: bytes | str) -> Path:
    """
    Writes a file through a temporary sibling and os.replace, so readers never see a partial file.

    Returns:
        Path: The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def write_raw_grid(path: str | Path, n: int, values: np.ndarray) -> Path:
    """
    Raw grid file: three little-endian int64 (n, N, axis count) then the values as
    little-endian float64 in row-major order.
    """
    values = np.asarray(values)
    axes = values.ndim
    N = values.shape[0]
    if axes != 4 * n or any(s != N for s in values.shape):
        raise ValueError(f"grid of shape {values.shape} is not a {4 * n}-dimensional cube")
    header = np.array([n, N, axes], dtype=RAW_HEADER).tobytes()
    body = np.ascontiguousarray(values, dtype=RAW_DATA).tobytes()
    return atomic_write(path, header + body)


def read_raw_grid(path: str | Path) -> tuple[int, int, np.ndarray]:
    """
    Reads a raw grid file.

    Returns:
        tuple[int, int, np.ndarray]: (n, N, values shaped (N,) * axis count).

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the header and payload size disagree.
    """
    raw = Path(path).read_bytes()
    header_size = 3 * RAW_HEADER.itemsize
    if len(raw) < header_size:
        raise ValueError(f"{path}: truncated header")
    n, N, axes = (int(v) for v in np.frombuffer(raw[:header_size], dtype=RAW_HEADER))
    expected = N**axes * RAW_DATA.itemsize
    if axes != 4 * n or len(raw) - header_size != expected:
        size = len(raw) - header_size
        raise ValueError(f"{path}: header (n={n}, N={N}, axes={axes}) does not match {size} data bytes")
    values = np.frombuffer(raw[header_size:], dtype=RAW_DATA).reshape((N,) * axes).astype(float)
    return n, N, values


def write_sidecar(path: str | Path, meta: dict) -> Path:
    """Plain-text YAML metadata next to a raw grid file, at '<file>.meta.yaml'."""
    path = Path(path)
    return atomic_write(path.with_name(path.name + ".meta.yaml"), yaml.safe_dump(meta, sort_keys=False))
