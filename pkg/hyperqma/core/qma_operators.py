"""
qma_operators.py

Eigenvalues of perturbed hyperhermitian forms and the admissible operators f(λ)
acting on them.

An operator is a symmetric, degree one homogeneous function f on an open
symmetric cone Γ with the positive orthant ⊂ Γ ⊂ {Σλ > 0}, normalised by
f(1, ..., 1) = 1, elliptic (∂ᵢf > 0) and satisfying Π ∂ᵢf ≥ γ > 0 on Γ.
All operator methods are vectorised over leading axes of the eigenvalue array.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.linalg

from hyperqma.core.hypercomplex_linalg import HyperhermitianForm, HypercomplexFrame
from hyperqma.core.logger import Logger
from hyperqma.exceptions import ConeError, PairingError, PositivityError

PAIRING_TOL = 1e-8


def _pair_sorted(mu: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    """Pairs an ascending 2n-spectrum on the last axis; returns (ascending pair means, worst relative gap)."""
    if mu.shape[-1] % 2:
        raise PairingError(f"spectrum of odd length {mu.shape[-1]} cannot pair up")
    radius = np.maximum(np.abs(mu).max(axis=-1), np.finfo(float).tiny)
    gaps = (mu[..., 1::2] - mu[..., 0::2]).max(axis=-1) / radius
    worst = float(np.max(gaps, initial=0.0))
    if worst >= tol:
        raise PairingError(f"eigenvalues fail to pair: relative gap {worst:.3e} exceeds {tol:.1e}")
    return (mu[..., 0::2] + mu[..., 1::2]) / 2, worst


@dataclass(frozen=True)
class EigTuple:
    """
    The n eigenvalues λ₁ ≥ ... ≥ λₙ of a hyperhermitian endomorphism.

    Attributes:
        values (np.ndarray): Eigenvalues in descending order.
        pairing_gap (float): Relative splitting of the pairs they were averaged from.
    """

    values: np.ndarray
    pairing_gap: float = 0.0

    @classmethod
    def from_spectrum(cls, mu: np.ndarray, tol: float = PAIRING_TOL) -> "EigTuple":
        """
        Sorts a 2n-spectrum, pairs adjacent values and averages each pair.

        Raises:
            PairingError: If some pair splits by more than tol times the spectral radius.
        """
        means, gap = _pair_sorted(np.sort(np.asarray(mu, dtype=float)), tol)
        values = means[::-1].copy()
        values.setflags(write=False)
        return cls(values, gap)

    @property
    def n(self) -> int:
        return len(self.values)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def pencil_eigh(matrices: np.ndarray, tol: float = PAIRING_TOL) -> tuple[np.ndarray, np.ndarray, float]:
    """
    Batched eigen-decomposition of J-invariant hermitian matrices relative to the identity.

    Args:
        matrices (np.ndarray): Array of shape (..., 2n, 2n).
        tol (float): Pairing tolerance relative to the spectral radius.

    Returns:
        tuple: (λ of shape (..., n) ascending, eigenvectors (..., 2n, 2n), worst pairing gap).
    """
    mu, vectors = np.linalg.eigh(matrices)
    lam, gap = _pair_sorted(mu, tol)
    return lam, vectors, gap


def pencil_eigenvalues(matrices: np.ndarray, tol: float = PAIRING_TOL) -> tuple[np.ndarray, float]:
    """Eigenvalues only; same contract as pencil_eigh."""
    mu = np.linalg.eigvalsh(matrices)
    return _pair_sorted(mu, tol)


def eigenvalues(omega_phi: HyperhermitianForm, omega: HyperhermitianForm, frame: HypercomplexFrame) -> EigTuple:
    """
    Eigenvalues of g⁻¹ ∘ g_φ through the associated hermitian matrices h̄_φ and h̄.

    Raises:
        PositivityError: If the base form is not positive definite.
        PairingError: If the generalised spectrum does not split into pairs.
    """
    h = omega.to_hermitian(frame).A
    h_phi = omega_phi.to_hermitian(frame).A
    if np.linalg.eigvalsh(h)[0] <= 0:
        raise PositivityError("base hyperhermitian form is not positive")
    mu = scipy.linalg.eigh(h_phi, h, eigvals_only=True)
    return EigTuple.from_spectrum(mu)


def elementary_symmetric(lam: np.ndarray, k: int | None = None) -> np.ndarray:
    """
    Elementary symmetric polynomials σ_0..σ_n of the last axis, or σ_k alone when k is given.

    σ_j with j < 0 or j > n is zero.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        x = lam[..., i : i + 1]
        e[..., 1:] = e[..., 1:] + x * e[..., :-1]
    if k is None:
        return e
    if k < 0 or k > n:
        return np.zeros(lam.shape[:-1])
    return e[..., k]


def _without(lam: np.ndarray, i: int) -> np.ndarray:
    return np.delete(lam, i, axis=-1)


class OperatorSpec(ABC):
    """
    Admissible operator f with cone Γ.

    Subclasses implement `_evaluate`, `_gradient` and `contains`; the public
    methods add cone checks. Instances hold no mutable state and pickle cleanly.
    """

    name: str = "operator"

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"operator dimension must be positive, got {n}")
        self.n = int(n)

    def __repr__(self):
        return f"{self.__class__.__name__}(n={self.n})"

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.__dict__.items()))))

    @abstractmethod
    def _evaluate(self, lam: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _gradient(self, lam: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def contains(self, lam: np.ndarray) -> np.ndarray:
        """Membership in the open cone Γ, vectorised over leading axes."""

    def cone_margin(self, lam: np.ndarray) -> np.ndarray:
        """
        Largest t with λ − t(1, ..., 1) in the closure of Γ.

        Positive inside Γ, zero on its boundary. The generic implementation bisects
        between the orthant margin min λ and the halfspace margin mean λ.
        """
        lam = np.asarray(lam, dtype=float)
        lo = lam.min(axis=-1)
        hi = lam.mean(axis=-1)
        for _ in range(80):
            mid = (lo + hi) / 2
            inside = self.contains(lam - mid[..., None])
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return lo

    def _require(self, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if lam.shape[-1] != self.n:
            raise ValueError(f"{self.name} expects {self.n} eigenvalues, got {lam.shape[-1]}")
        inside = self.contains(lam)
        if not np.all(inside):
            witness = lam[~inside][0] if lam.ndim > 1 else lam
            raise ConeError(f"{self.name}: eigenvalues {np.array2string(witness, precision=6)} lie outside the cone")
        return lam

    def evaluate(self, lam: np.ndarray) -> np.ndarray:
        """
        f(λ) on Γ.

        Raises:
            ConeError: If some λ lies outside Γ.
        """
        return self._evaluate(self._require(lam))

    def gradient(self, lam: np.ndarray) -> np.ndarray:
        return self._gradient(self._require(lam))

    def log_gradient(self, lam: np.ndarray) -> np.ndarray:
        lam = self._require(lam)
        return self._gradient(lam) / self._evaluate(lam)[..., None]

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        return self.evaluate(lam)

    @property
    def gamma(self) -> float:
        """Π ∂ᵢf at (1, ..., 1), the lower bound constant of the structural conditions."""
        return float(np.prod(self.gradient(np.ones(self.n))))


class GeometricMean(OperatorSpec):
    """(Πλᵢ)^{1/n} on the positive orthant; the quaternionic Monge-Ampère operator."""

    name = "qma"

    def contains(self, lam):
        return np.all(np.asarray(lam) > 0, axis=-1)

    def cone_margin(self, lam):
        return np.asarray(lam, dtype=float).min(axis=-1)

    def _evaluate(self, lam):
        return np.exp(np.log(lam).mean(axis=-1))

    def _gradient(self, lam):
        return self._evaluate(lam)[..., None] / (self.n * lam)


class ArithmeticMean(OperatorSpec):
    """Σλᵢ/n on {Σλᵢ > 0}; the quaternionic Laplacian."""

    name = "laplacian"

    def contains(self, lam):
        return np.asarray(lam).sum(axis=-1) > 0

    def cone_margin(self, lam):
        return np.asarray(lam, dtype=float).mean(axis=-1)

    def _evaluate(self, lam):
        return lam.mean(axis=-1)

    def _gradient(self, lam):
        return np.full(lam.shape, 1.0 / self.n)


class HessianQuotient(OperatorSpec):
    """
    Normalised quotient c (σ_k/σ_l)^{1/(k−l)} on the Gårding cone Γ_k.

    Attributes:
        k (int): Upper index, 1 <= k <= n.
        l (int): Lower index, 0 <= l < k.

    With l = 0 these dominate the geometric mean by the Maclaurin inequalities.
    The quotient σ_n/σ_{n−1} does not: its partial products vanish on the orthant
    boundary, so it fails the lower bound condition.
    """

    def __init__(self, n: int, k: int, l: int = 0):
        super().__init__(n)
        if not 0 <= l < k <= n:
            raise ValueError(f"need 0 <= l < k <= n, got n={n}, k={k}, l={l}")
        self.k = int(k)
        self.l = int(l)
        self.scale = (comb(n, l) / comb(n, k)) ** (1.0 / (k - l))

    @property
    def name(self):
        return f"hessian_quotient_{self.k}_{self.l}"

    def __repr__(self):
        return f"HessianQuotient(n={self.n}, k={self.k}, l={self.l})"

    def contains(self, lam):
        e = elementary_symmetric(lam)
        return np.all(e[..., 1 : self.k + 1] > 0, axis=-1)

    def _evaluate(self, lam):
        e = elementary_symmetric(lam)
        return self.scale * (e[..., self.k] / e[..., self.l]) ** (1.0 / (self.k - self.l))

    def _gradient(self, lam):
        e = elementary_symmetric(lam)
        f = self.scale * (e[..., self.k] / e[..., self.l]) ** (1.0 / (self.k - self.l))
        grad = np.empty_like(lam)
        for i in range(self.n):
            rest = _without(lam, i)
            dk = elementary_symmetric(rest, self.k - 1) / e[..., self.k]
            dl = elementary_symmetric(rest, self.l - 1) / e[..., self.l]
            grad[..., i] = f / (self.k - self.l) * (dk - dl)
        return grad


class LargestEigenvalue(OperatorSpec):
    """max λᵢ on {Σλᵢ > 0}. Not elliptic; kept as the negative control for the structural checks."""

    name = "largest_eigenvalue"

    def contains(self, lam):
        return np.asarray(lam).sum(axis=-1) > 0

    def _evaluate(self, lam):
        return lam.max(axis=-1)

    def _gradient(self, lam):
        grad = np.zeros_like(lam)
        idx = lam.argmax(axis=-1)
        np.put_along_axis(grad, idx[..., None], 1.0, axis=-1)
        return grad


def qma_operator(n: int) -> OperatorSpec:
    return GeometricMean(n)


def laplacian_operator(n: int) -> OperatorSpec:
    return ArithmeticMean(n)


def hessian_quotient_operator(n: int, k: int, l: int = 0) -> OperatorSpec:
    return HessianQuotient(n, k, l)


def operator_zoo(n: int) -> list[OperatorSpec]:
    """
    The shipped admissible operators in dimension n.

    The quotients σ_k^{1/k} run over every k, so σ_1 and σ_n are checked again
    through the elementary symmetric code path.
    """
    zoo = [qma_operator(n), laplacian_operator(n)]
    zoo += [hessian_quotient_operator(n, k) for k in range(1, n + 1)]
    return zoo


def operator_from_name(name: str, n: int) -> OperatorSpec:
    """
    Resolves configuration names: qma, laplacian, largest_eigenvalue,
    hessian_quotient_<k>_<l> (or hessian_quotient_<k>).

    Raises:
        ValueError: On unknown names.
    """
    simple = {"qma": GeometricMean, "laplacian": ArithmeticMean, "largest_eigenvalue": LargestEigenvalue}
    if name in simple:
        return simple[name](n)
    if name.startswith("hessian_quotient_"):
        parts = name.removeprefix("hessian_quotient_").split("_")
        try:
            indices = [int(p) for p in parts]
        except ValueError:
            raise ValueError(f"malformed operator name: {name}") from None
        if len(indices) in (1, 2):
            return HessianQuotient(n, *indices)
    raise ValueError(f"unknown operator: {name}")


def linearization_coeffs(spec: OperatorSpec, lam: EigTuple | np.ndarray) -> np.ndarray:
    """
    Coefficients ∂ᵢf/f = ∂ᵢ log f of the linearised operator at λ.

    Raises:
        ConeError: If λ lies outside Γ.
    """
    values = lam.values if isinstance(lam, EigTuple) else np.asarray(lam, dtype=float)
    return spec.log_gradient(values)


def sample_cone(spec: OperatorSpec, samples: int, rng: np.random.Generator) -> np.ndarray:
    """
    Random points of Γ: Dirichlet(2) directions on the simplex, shifted along the
    diagonal by up to 90% of their cone margin, scaled by a log-uniform radius in [1e-2, 1e2].
    """
    points = []
    while sum(len(p) for p in points) < samples:
        d = rng.dirichlet(np.full(spec.n, 2.0), size=samples)
        shift = rng.uniform(0.0, 0.9, size=samples) * spec.cone_margin(d)
        lam = (d - shift[:, None]) * 10.0 ** rng.uniform(-2.0, 2.0, size=samples)[:, None]
        points.append(lam[spec.contains(lam)])
    return np.concatenate(points)[:samples]


def finite_difference_gradient(spec: OperatorSpec, lam: np.ndarray) -> np.ndarray:
    """Central differences with step 1e-5 max(|λᵢ|, 1e-3 |λ|) per coordinate."""
    lam = np.asarray(lam, dtype=float)
    h = 1e-5 * np.maximum(np.abs(lam), 1e-3 * np.linalg.norm(lam, axis=-1, keepdims=True))
    grad = np.empty_like(lam)
    for i in range(lam.shape[-1]):
        step = np.zeros_like(lam)
        step[..., i] = h[..., i]
        grad[..., i] = (spec.evaluate(lam + step) - spec.evaluate(lam - step)) / (2 * h[..., i])
    return grad


@dataclass
class StructuralReport:
    """
    Result of sampling the structural conditions of an operator.

    Attributes:
        name (str): Operator name.
        samples (int): Number of cone points examined.
        failures (dict): Failure counts per check.
        witnesses (dict): First failing point per check.
        min_product (float): Smallest Π ∂ᵢf seen.
        gamma (float): The operator's lower bound constant.
        expect_failure (bool): Set for negative controls, whose violations are the expected outcome.
    """

    name: str
    samples: int
    gamma: float
    min_product: float = np.inf
    expect_failure: bool = False
    failures: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)

    CHECKS = ("positivity", "lower_bound", "euler", "symmetry", "homogeneity", "finite_difference")

    @property
    def passed(self) -> bool:
        return not any(self.failures.values())

    @property
    def as_expected(self) -> bool:
        return self.passed != self.expect_failure

    def record(self, check: str, bad: np.ndarray, points: np.ndarray) -> None:
        count = int(np.count_nonzero(bad))
        self.failures[check] = self.failures.get(check, 0) + count
        if count and check not in self.witnesses:
            self.witnesses[check] = points[bad][0]

    def summary(self) -> str:
        total = self.samples
        if self.expect_failure:
            status = "expected violation" if not self.passed else "FAIL, control passed"
        else:
            status = "pass" if self.passed else "FAIL"
        failed = ", ".join(f"{k}={v}" for k, v in self.failures.items() if v)
        return f"{self.name}: {status} over {total} samples" + (f" ({failed})" if failed else "")


def check_structural(
    spec: OperatorSpec, samples: int, rng: np.random.Generator | None = None, expect_failure: bool = False
) -> StructuralReport:
    """
    Samples Γ and checks ellipticity, the Π ∂ᵢf ≥ γ bound, the Euler relation,
    permutation symmetry, homogeneity and the gradient against finite differences.

    Args:
        spec (OperatorSpec): Operator under test.
        samples (int): Number of cone points.
        rng (np.random.Generator, optional): Source of randomness. Defaults to seed 0.
        expect_failure (bool): Marks a negative control; its violations are logged as expected.

    Returns:
        StructuralReport: Failure counts and a witness point for each violated check.
    """
    logger = Logger(name="hyperqma.structural").get()
    rng = np.random.default_rng(0) if rng is None else rng
    lam = sample_cone(spec, samples, rng)
    report = StructuralReport(spec.name, len(lam), spec.gamma, expect_failure=expect_failure)

    f = spec.evaluate(lam)
    grad = spec.gradient(lam)
    product = np.prod(grad, axis=-1)
    report.min_product = float(product.min())

    report.record("positivity", ~np.all(grad > 0, axis=-1), lam)
    report.record("lower_bound", product < report.gamma * (1 - 1e-8), lam)
    report.record("euler", np.abs((lam * grad).sum(axis=-1) - f) > 1e-9 * np.abs(f), lam)

    permuted = rng.permuted(lam, axis=-1)
    report.record("symmetry", np.abs(spec.evaluate(permuted) - f) > 1e-12 * np.abs(f), lam)

    t = 10.0 ** rng.uniform(-1.0, 1.0, size=len(lam))
    report.record("homogeneity", np.abs(spec.evaluate(lam * t[:, None]) - t * f) > 1e-9 * t * np.abs(f), lam)

    fd = finite_difference_gradient(spec, lam)
    scale = np.linalg.norm(grad, axis=-1)
    report.record("finite_difference", np.linalg.norm(fd - grad, axis=-1) > 1e-6 * scale, lam)

    if report.as_expected:
        logger.info(report.summary())
    else:
        logger.warning(report.summary())
    return report


@dataclass
class DominationReport:
    name: str
    samples: int
    worst_ratio: float
    witness: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        return self.witness is None

    def summary(self) -> str:
        status = "dominates the geometric mean" if self.passed else f"FAIL (witness {self.witness})"
        return f"{self.name}: {status} over {self.samples} samples, worst ratio {self.worst_ratio:.6f}"


def check_domination(spec: OperatorSpec, samples: int, rng: np.random.Generator | None = None) -> DominationReport:
    """Tests f(λ) ≥ (Πλᵢ)^{1/n} on random points of the positive orthant."""
    rng = np.random.default_rng(0) if rng is None else rng
    d = rng.dirichlet(np.full(spec.n, 2.0), size=samples) * 10.0 ** rng.uniform(-2.0, 2.0, size=samples)[:, None]
    ratio = spec.evaluate(d) / GeometricMean(spec.n).evaluate(d)
    bad = ratio < 1 - 1e-12
    witness = d[bad][0] if bad.any() else None
    return DominationReport(spec.name, samples, float(ratio.min()), witness)
