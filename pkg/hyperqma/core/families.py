"""
families.py

Closed-form right hand sides F on the torus and their normalisation.

A family turns a concentration scale σ and an amplitude into a field F. Before
it is handed to the solver F is mass normalised,

    F̃ = F − log(mean e^{nF}) / n,

so that mean e^{nF̃} = 1, which is the exact compatibility condition of the
quaternionic Monge-Ampère equation on the torus. Constants added to F are
absorbed this way, so fixed-norm modes tune the amplitude instead.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from hyperqma.core.flat_solver import ScalarField, TorusGrid
from hyperqma.core.logger import Logger
from hyperqma.exceptions import NormalizationError

MODES = ("raw", "fix_entropy", "fix_lq")
NORM_TOL = 1e-6


def norm_entropy(F: ScalarField | np.ndarray, p: float, scale: float = 2.0) -> float:
    """
    Entropy norm mean |G|^p e^G with G = scale·F, by grid quadrature on the unit volume torus.

    Raises:
        ValueError: If p <= 0.
    """
    if p <= 0:
        raise ValueError(f"entropy exponent must be positive, got {p}")
    values = F.values if isinstance(F, ScalarField) else np.asarray(F, dtype=float)
    G = scale * values
    return float(np.mean(np.abs(G) ** p * np.exp(G)))


def norm_lq(F: ScalarField | np.ndarray, q: float, scale: float = 1.0) -> float:
    """L^q norm of e^{scale·F}."""
    if q <= 0:
        raise ValueError(f"Lebesgue exponent must be positive, got {q}")
    values = F.values if isinstance(F, ScalarField) else np.asarray(F, dtype=float)
    return float(np.exp((logsumexp(q * scale * values) - np.log(values.size)) / q))


def mass_normalize(values: np.ndarray, n: int) -> np.ndarray:
    """F − log(mean e^{nF}) / n."""
    return values - (logsumexp(n * values) - np.log(values.size)) / n


def _bump(grid: TorusGrid, sigma: float, center: Sequence[float]) -> np.ndarray:
    d2 = sum(d**2 for d in grid.periodic_offsets(center))
    return np.broadcast_to(np.exp(-d2 / sigma**2), grid.shape)


def _constant(grid, sigma, amplitude, baseline, center):
    return np.full(grid.shape, float(amplitude))


def _gaussian_bump(grid, sigma, amplitude, baseline, center):
    return np.log(amplitude * _bump(grid, sigma, center) + baseline)


def _two_bump(grid, sigma, amplitude, baseline, center):
    other = [(c + 0.5) % 1.0 if a == 0 else c for a, c in enumerate(center)]
    return np.log(amplitude * (_bump(grid, sigma, center) + _bump(grid, sigma, other)) + baseline)


def _sign_balanced(grid, sigma, amplitude, baseline, center):
    g = _bump(grid, sigma, center)
    return amplitude * (g - g.mean())


def _cosine(grid, sigma, amplitude, baseline, center):
    x0 = grid.coordinates()[0]
    return np.broadcast_to(amplitude * np.cos(2 * np.pi * x0), grid.shape)


rhs_registry = {
    "constant": _constant,
    "gaussian_bump": _gaussian_bump,
    "two_bump": _two_bump,
    "sign_balanced": _sign_balanced,
    "cosine": _cosine,
}


@dataclass(frozen=True)
class RhsFamily:
    """
    A named right hand side family with its normalisation mode.

    Attributes:
        name (str): Key of rhs_registry.
        sigma (float): Concentration scale.
        amplitude (float): Amplitude; the starting bracket when a norm is fixed.
        mode (str): One of raw, fix_entropy, fix_lq.
        p (float): Entropy exponent.
        q (float): Lebesgue exponent.
        target (float, optional): Norm value held fixed in the fix modes.
        baseline (float): Floor added under bumps so that e^F stays positive.
        center (tuple, optional): Bump center; defaults to the middle of the torus.
    """

    name: str
    sigma: float = 0.2
    amplitude: float = 1.0
    mode: str = "raw"
    p: float = 3.0
    q: float = 3.0
    target: Optional[float] = None
    baseline: float = 1.0
    center: Optional[tuple] = None

    def __post_init__(self):
        if self.name not in rhs_registry:
            raise ValueError(f"unknown right hand side family '{self.name}', expected one of {sorted(rhs_registry)}")
        if self.mode not in MODES:
            raise ValueError(f"unknown normalisation mode '{self.mode}', expected one of {MODES}")
        if self.mode != "raw" and self.target is None:
            raise ValueError(f"mode '{self.mode}' needs a target")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.baseline <= 0 and self.name in ("gaussian_bump", "two_bump"):
            raise ValueError("baseline must be positive so that e^F stays positive")

    @classmethod
    def from_dict(cls, config: dict) -> "RhsFamily":
        """Creates a family from a configuration mapping."""
        center = config.get("center")
        return cls(
            name=config.get("family", config.get("name", "gaussian_bump")),
            sigma=float(config.get("sigma", 0.2)),
            amplitude=float(config.get("amplitude", 1.0)),
            mode=config.get("mode", "raw"),
            p=float(config.get("p", 3.0)),
            q=float(config.get("q", 3.0)),
            target=None if config.get("target") is None else float(config["target"]),
            baseline=float(config.get("baseline", 1.0)),
            center=None if center is None else tuple(float(c) for c in center),
        )

    def with_sigma(self, sigma: float) -> "RhsFamily":
        return replace(self, sigma=float(sigma))

    def _center(self, grid: TorusGrid) -> tuple:
        center = self.center or (0.5,) * grid.dim
        if len(center) != grid.dim:
            raise ValueError(f"center has {len(center)} coordinates, grid has {grid.dim} axes")
        return center

    def raw(self, grid: TorusGrid, amplitude: float | None = None) -> np.ndarray:
        """F before mass normalisation."""
        amplitude = self.amplitude if amplitude is None else amplitude
        return np.array(rhs_registry[self.name](grid, self.sigma, amplitude, self.baseline, self._center(grid)))

    def norm(self, values: np.ndarray, n: int) -> float:
        """The norm held fixed by the mode (entropy of e^{2nF̃} or L^q of e^{nF̃})."""
        if self.mode == "fix_lq":
            return norm_lq(values, self.q, scale=n)
        return norm_entropy(values, self.p, scale=2 * n)

    def generate(self, grid: TorusGrid) -> tuple[ScalarField, float]:
        """
        Mass normalised F̃ on the grid, with the amplitude matched to the target norm in the fix modes.

        Returns:
            tuple[ScalarField, float]: (F̃, amplitude used).

        Raises:
            NormalizationError: If the target cannot be bracketed or matched to 1e-6 relative.
        """
        logger = Logger(name=self.__class__.__name__).get()
        n = grid.n
        if self.mode == "raw" or self.name == "constant":
            if self.mode != "raw":
                logger.info(f"'{self.name}' has a fixed normalised shape, the {self.mode} target is not applied")
            return ScalarField(grid, mass_normalize(self.raw(grid), n)), self.amplitude

        def mismatch(a: float) -> float:
            return self.norm(mass_normalize(self.raw(grid, a), n), n) - self.target

        lo, hi = 0.0, max(self.amplitude, 1e-3)
        if mismatch(lo) > 0:
            raise NormalizationError(f"target {self.target} lies below the norm of the flat right hand side")
        for _ in range(64):
            if mismatch(hi) > 0:
                break
            lo, hi = hi, 2 * hi
        else:
            raise NormalizationError(f"could not bracket the {self.mode} target {self.target}")

        amplitude = brentq(mismatch, lo, hi, xtol=1e-14, rtol=1e-13, maxiter=200)
        F = mass_normalize(self.raw(grid, amplitude), n)
        achieved = self.norm(F, n)
        if abs(achieved - self.target) > NORM_TOL * abs(self.target):
            raise NormalizationError(f"norm {achieved:.9g} misses target {self.target} at amplitude {amplitude:.6g}")
        logger.debug(f"{self.name} sigma={self.sigma}: amplitude {amplitude:.9g} gives {self.mode} {achieved:.9g}")
        return ScalarField(grid, F), float(amplitude)
