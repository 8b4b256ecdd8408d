"""
comparison.py

Pointwise comparison between the complex and the quaternionic Monge-Ampère
operators. Everything here acts on coefficient matrices at a single point of
the flat model; the volume form factor is carried by `volume_constant`.

The J-pullback of a (1,1)-form α is α(·J, ·J). Subtracting it gives the
hyperhermitian part α − α(·J, ·J), whose top power dominates the top power of α
whenever α is positive semidefinite.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from hyperqma.core.hypercomplex_linalg import (
    HermitianForm,
    HyperhermitianForm,
    HypercomplexFrame,
    pfaffian,
    random_psd_hermitian,
    volume_constant,
)
from hyperqma.core.logger import Logger

logger = Logger(name="hyperqma.comparison").get()

PSD_TOL = 1e-12
MARGIN_TOL = 1e-10
PFAFFIAN_TOL = 1e-9


def _check_frame(alpha: HermitianForm, frame: HypercomplexFrame) -> None:
    if alpha.n != frame.n:
        raise ValueError(f"form of quaternionic dimension {alpha.n} used with a frame of dimension {frame.n}")


def j_pullback(alpha: HermitianForm, frame: HypercomplexFrame) -> HermitianForm:
    """
    Returns α(·J, ·J).

    Args:
        alpha (HermitianForm): Coefficient matrix of a real (1,1)-form.
        frame (HypercomplexFrame): Flat structure providing J.

    Returns:
        HermitianForm: The pulled back form; callers negate it to obtain β.

    Raises:
        ValueError: If the dimensions of alpha and frame differ.
    """
    _check_frame(alpha, frame)
    S = frame.j_conj
    return HermitianForm(alpha.n, -S.T @ alpha.A.conj() @ S)


def hyperhermitian_part(alpha: HermitianForm, frame: HypercomplexFrame) -> HermitianForm:
    """α + β with β = −α(·J, ·J). The result is J-invariant."""
    return alpha + (-j_pullback(alpha, frame))


def quaternionic_hessian_form(phi_hessian: HermitianForm, frame: HypercomplexFrame) -> HyperhermitianForm:
    """
    Coefficient matrix of the (2,0)-form ∂∂_Jφ built from the complex Hessian φ_{ij̄}.

    Expanding φ_{ij̄} dz_i ∧ J⁻¹dz̄_j in the standard frame gives W = −A S − S Ā,
    which is antisymmetric and J-real for every hermitian A.
    """
    _check_frame(phi_hessian, frame)
    A = phi_hessian.A
    S = frame.j_conj
    return HyperhermitianForm(phi_hessian.n, -A @ S - S @ A.conj())


def mixed_determinant_terms(alpha: HermitianForm, beta: HermitianForm) -> np.ndarray:
    """
    Binomial expansion of det(α + β) by multilinearity in the columns.

    Term j sums the determinants with j columns taken from β and the rest from α;
    it equals C(2n, j) times the mixed discriminant D(α^{2n−j}, β^j) and is
    nonnegative when both forms are positive semidefinite.

    Returns:
        np.ndarray: 2n + 1 real terms; term 0 is det(α) and their sum is det(α + β).
    """
    a, b = alpha.A, beta.A
    m = a.shape[0]
    terms = np.zeros(m + 1)
    for j in range(m + 1):
        for cols in combinations(range(m), j):
            M = a.copy()
            M[:, list(cols)] = b[:, list(cols)]
            terms[j] += np.linalg.det(M).real
    return terms


@dataclass(frozen=True)
class HyperhermitianPartReport:
    lhs_det: float
    rhs_det: float
    margin: float

    @property
    def passed(self) -> bool:
        return self.margin >= -MARGIN_TOL * max(1.0, abs(self.rhs_det))


@dataclass(frozen=True)
class DensityComparisonReport:
    quat_side: float
    complex_side: float
    margin: float
    pfaffian_side: float

    @property
    def passed(self) -> bool:
        return self.margin >= -MARGIN_TOL * max(1.0, abs(self.complex_side))

    @property
    def pfaffian_agrees(self) -> bool:
        scale = max(abs(self.quat_side), abs(self.pfaffian_side))
        return abs(self.quat_side - self.pfaffian_side) <= PFAFFIAN_TOL * scale + 1e-300


def check_hyperhermitian_part(alpha: HermitianForm, frame: HypercomplexFrame) -> HyperhermitianPartReport:
    """
    Compares det(α − α(·J, ·J)) with det(α) for a PSD form α.

    Top wedge powers of (1,1)-forms are determinants times the volume form, so the
    determinant comparison is the pointwise form of (α − α(·J,·J))^{2n} ≥ α^{2n}.

    Raises:
        PositivityError: If alpha is not positive semidefinite.
    """
    alpha.require_psd(PSD_TOL)
    lhs = hyperhermitian_part(alpha, frame).det()
    rhs = alpha.det()
    return HyperhermitianPartReport(lhs_det=lhs, rhs_det=rhs, margin=lhs - rhs)


def check_density_comparison(phi_hessian: HermitianForm, frame: HypercomplexFrame) -> DensityComparisonReport:
    """
    Quaternionic versus complex Monge-Ampère density for a plurisubharmonic Hessian.

    The quaternionic side is computed twice: as c(n) det of the hyperhermitian part
    and as c(n) |Pf|² of the (2,0)-form ∂∂_Jφ.

    Args:
        phi_hessian (HermitianForm): The matrix φ_{ij̄} at a point.
        frame (HypercomplexFrame): Flat structure.

    Returns:
        DensityComparisonReport: Both sides, their margin and the Pfaffian route value.

    Raises:
        PositivityError: If phi_hessian is not positive semidefinite.
    """
    phi_hessian.require_psd(PSD_TOL)
    c = volume_constant(frame.n)
    quat = c * hyperhermitian_part(phi_hessian, frame).det()
    cplx = c * phi_hessian.det()
    pf = pfaffian(quaternionic_hessian_form(phi_hessian, frame))
    return DensityComparisonReport(quat_side=quat, complex_side=cplx, margin=quat - cplx, pfaffian_side=c * pf * pf)


@dataclass
class SuiteReport:
    """
    Outcome of a randomized verification suite.

    Attributes:
        name (str): Suite label used in summaries.
        passed (int): Number of passing trials.
        total (int): Number of trials.
        worst_margin (float): Smallest relative margin observed.
        failures (list): Witnesses of failing trials (at most a handful are kept).
    """

    name: str
    passed: int = 0
    total: int = 0
    worst_margin: float = np.inf
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed == self.total

    def record(self, ok: bool, margin: float, witness=None) -> None:
        self.total += 1
        self.worst_margin = min(self.worst_margin, margin)
        if ok:
            self.passed += 1
        elif len(self.failures) < 5:
            self.failures.append(witness)

    def summary(self) -> str:
        return f"{self.passed}/{self.total} {self.name}"


def _random_rank(n: int, rng: np.random.Generator) -> int:
    return int(rng.integers(1, 2 * n + 1))


def hyperhermitian_part_suite(n: int, trials: int, rng: np.random.Generator, frame: HypercomplexFrame) -> SuiteReport:
    """Random PSD forms, rank deficient ones included, against det(α + β) ≥ det(α) and β ≥ 0."""
    report = SuiteReport("hyperhermitian_part")
    for _ in range(trials):
        alpha = random_psd_hermitian(n, rng, rank=_random_rank(n, rng))
        result = check_hyperhermitian_part(alpha, frame)
        beta = -j_pullback(alpha, frame)
        beta_ok = beta.min_eigenvalue >= -1e-11 * max(1.0, float(np.trace(alpha.A).real))
        terms = mixed_determinant_terms(alpha, beta)
        floor = -MARGIN_TOL * max(1.0, abs(result.lhs_det))
        expansion_ok = bool(np.all(terms >= floor)) and abs(terms.sum() - result.lhs_det) <= 1e-9 * max(
            1.0, abs(result.lhs_det)
        )
        ok = result.passed and beta_ok and expansion_ok
        report.record(ok, result.margin / max(1.0, abs(result.rhs_det)), witness=alpha.A)
    logger.info(f"hyperhermitian_part n={n}: {report.summary()} worst relative margin {report.worst_margin:.3e}")
    return report


def density_comparison_suite(n: int, trials: int, rng: np.random.Generator, frame: HypercomplexFrame) -> SuiteReport:
    """Random PSD complex Hessians; both the inequality and the Pfaffian route agreement must hold."""
    report = SuiteReport("density_comparison")
    for _ in range(trials):
        hess = random_psd_hermitian(n, rng)
        result = check_density_comparison(hess, frame)
        ok = result.passed and result.pfaffian_agrees
        report.record(ok, result.margin / max(1.0, abs(result.complex_side)), witness=hess.A)
    logger.info(f"density_comparison n={n}: {report.summary()} worst relative margin {report.worst_margin:.3e}")
    return report
