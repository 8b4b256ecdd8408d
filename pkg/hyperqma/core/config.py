"""
config.py

LabConfig loads the flat `key = value` configuration of one subcommand (YAML
`key: value` lines are read too), validates its keys, merges the defaults and
hands out typed values and the domain objects built from them (operator,
right hand side family, solver options, RNG).

Every run prints the resolved configuration together with the seed and a
digest of the RNG state so that it can be reproduced.
"""

from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from hyperqma.core.families import RhsFamily
from hyperqma.core.flat_solver import SolverOptions
from hyperqma.core.logger import Logger
from hyperqma.core.qma_operators import OperatorSpec, operator_from_name
from hyperqma.exceptions import ConfigError
from hyperqma.utils import VALID_KEYS, path_exists, rng_digest, validate_config

_SOLVER_DEFAULTS = {"tol": 1e-8, "max_iter": 30, "force": False}

DEFAULTS = {
    "verify-inequalities": {"n": 2, "trials": 1000, "samples": 1000, "seed": 7},
    "solve": {
        "n": 1,
        "N": 16,
        "operator": "qma",
        "family": "cosine",
        "sigma": 0.2,
        "amplitude": 0.1,
        "baseline": 1.0,
        "mode": "raw",
        "p": 3.0,
        "q": 3.0,
        "target": None,
        "center": None,
        "gmres_rtol": 1e-10,
        "continuation": None,
        "rhs_file": None,
        "seed": 0,
        "output": "solution.grid",
        **_SOLVER_DEFAULTS,
    },
    "probe": {
        "n": 1,
        "N": 16,
        "operator": "qma",
        "family": "gaussian_bump",
        "sigmas": [0.4, 0.2, 0.1],
        "amplitude": 1.0,
        "baseline": 1.0,
        "mode": "fix_entropy",
        "p": 3.0,
        "q": 3.0,
        "target": 0.5,
        "center": None,
        "workers": 1,
        "seed": 0,
        "output_csv": "probe.csv",
        "output_svg": "probe.svg",
        **_SOLVER_DEFAULTS,
    },
    "gp-claim": {
        "n": 1,
        "radius": 0.2,
        "nodes": 4097,
        "s_fractions": [0.25, 0.5, 1.0],
        "ks": [10, 100],
        "source": "constant",
        "N": 16,
        "operator": "qma",
        "family": "gaussian_bump",
        "sigma": 0.2,
        "amplitude": 1.0,
        "workers": 1,
        "seed": 0,
        "output": "claim.csv",
    },
}

_INT_KEYS = {"n", "N", "trials", "samples", "seed", "max_iter", "workers", "nodes"}
_FLOAT_KEYS = {"sigma", "amplitude", "baseline", "p", "q", "target", "tol", "gmres_rtol", "radius"}
_BOOL_KEYS = {"force"}
_FLOAT_LIST_KEYS = {"sigmas", "s_fractions", "ks", "continuation", "center"}


class LabConfig:
    """
    Resolved configuration of one subcommand.

    Attributes:
        command (str): Subcommand name.
        values (dict): Defaults overlaid with the file and then with overrides.
        source (Path, optional): The configuration file, if any.
    """

    def __init__(self, command: str, config_path: Optional[str] = None, overrides: Optional[dict] = None):
        """
        Loads and validates a configuration.

        Args:
            command (str): Subcommand whose key registry and defaults apply.
            config_path (str, optional): Path to the configuration file.
            overrides (dict, optional): Values from command-line flags; None entries are ignored.

        Raises:
            FileNotFoundError: If config_path does not exist.
            ConfigError: On unknown keys or values of the wrong type.
        """
        if command not in DEFAULTS:
            raise ConfigError(f"unknown subcommand '{command}'")
        self.command = command
        self.source = None
        self.values: dict = dict(DEFAULTS[command])
        self._lines: dict = {}
        self.logger = Logger(name=self.__class__.__name__).get()

        if config_path:
            self._load_from_config(config_path)
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key not in VALID_KEYS[command]:
                raise ConfigError(f"unknown key '{key}' for '{command}'")
            self.values[key] = self._coerce(key, value)

    def _load_from_config(self, path: str):
        """
        Reads the file, checks the keys and overlays the values on the defaults.

        Args:
            path (str): Path to the configuration file.
        """
        if not path_exists(path):
            raise FileNotFoundError(f"configuration file not found: {path}")
        self.source = Path(path)
        text = self.source.read_text(encoding="utf-8")
        data, self._lines = validate_config(text, self.command)
        for key, value in data.items():
            self.values[key] = self._coerce(key, value)
        self.logger.debug(f"Loaded {len(data)} key(s) from {path}")

    def _coerce(self, key: str, value: Any) -> Any:
        line = self._lines.get(key)
        try:
            if value is None:
                return None
            if key in _INT_KEYS:
                if isinstance(value, bool) or float(value) != int(value):
                    raise ValueError
                return int(value)
            if key in _FLOAT_KEYS:
                return float(value)
            if key in _BOOL_KEYS:
                if not isinstance(value, bool):
                    raise ValueError
                return value
            if key in _FLOAT_LIST_KEYS:
                items = value if isinstance(value, (list, tuple)) else [value]
                return [float(v) for v in items]
        except (TypeError, ValueError):
            raise ConfigError(f"invalid value {value!r} for '{key}'", line) from None
        return value

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    @property
    def n(self) -> int:
        return self.values["n"]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def operator(self) -> OperatorSpec:
        try:
            return operator_from_name(self.values["operator"], self.n)
        except ValueError as e:
            raise ConfigError(str(e), self._lines.get("operator")) from None

    def family(self) -> RhsFamily:
        try:
            return RhsFamily.from_dict(self.values)
        except ValueError as e:
            raise ConfigError(str(e), self._lines.get("family")) from None

    def solver_options(self) -> SolverOptions:
        return SolverOptions.from_dict(self.values)

    def render(self) -> str:
        """The resolved configuration, seed and RNG digest as YAML text."""
        resolved = {"command": self.command, **dict(sorted(self.values.items()))}
        header = {"seed": self.seed, "rng_state_sha256": rng_digest(self.rng())}
        return yaml.safe_dump(resolved, sort_keys=False) + yaml.safe_dump(header, sort_keys=False)
