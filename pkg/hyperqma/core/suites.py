"""
suites.py

Drivers behind the `verify-inequalities` and `selftest` subcommands.

verify_inequalities runs the randomized comparison suites, the structural
checks of every shipped operator (plus the negative control, which must fail)
and a Pfaffian consistency suite. run_selftest evaluates the closed-form and
oracle examples of every module and reports each one by name.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from hyperqma.core import gp_machinery as gp
from hyperqma.core.comparison import (
    SuiteReport,
    check_density_comparison,
    check_hyperhermitian_part,
    density_comparison_suite,
    hyperhermitian_part,
    hyperhermitian_part_suite,
    j_pullback,
)
from hyperqma.core.families import RhsFamily, norm_entropy
from hyperqma.core.flat_solver import (
    ScalarField,
    SolverOptions,
    TorusGrid,
    forward_mismatch,
    hessian_perturbation,
    solve,
)
from hyperqma.core.hypercomplex_linalg import (
    HermitianForm,
    HyperhermitianForm,
    decompose,
    pfaffian,
    pfaffian_matrix,
    random_hyperhermitian,
    random_quaternion_hermitian,
    recompose,
    standard_frame,
    volume_constant,
    volume_constant_closed_form,
)
from hyperqma.core.logger import Logger
from hyperqma.core.qma_operators import (
    LargestEigenvalue,
    StructuralReport,
    check_domination,
    check_structural,
    eigenvalues,
    linearization_coeffs,
    operator_zoo,
    qma_operator,
)

logger = Logger(name="hyperqma.suites").get()

# labels of the two comparison suites on the summary line
HEADLINE_SUITES = {"hyperhermitian_part": "lemma31", "density_comparison": "prop32"}


@dataclass
class VerifyReport:
    """
    Attributes:
        n (int): Quaternionic dimension.
        suites (list[SuiteReport]): hyperhermitian_part, density_comparison and pfaffian suites.
        structural (list[StructuralReport]): One report per shipped operator.
        domination (list[DominationReport]): Domination of the geometric mean, per shipped operator.
        negative_control (StructuralReport): Report of the operator that must fail.
    """

    n: int
    suites: list = field(default_factory=list)
    structural: list = field(default_factory=list)
    domination: list = field(default_factory=list)
    negative_control: StructuralReport | None = None

    @property
    def passed(self) -> bool:
        control_ok = self.negative_control is None or self.negative_control.as_expected
        checks = all(r.passed for r in self.structural) and all(d.passed for d in self.domination)
        return all(s.ok for s in self.suites) and checks and control_ok

    def summary(self) -> str:
        headline = [s for s in self.suites if s.name in HEADLINE_SUITES]
        return ", ".join(f"{s.passed}/{s.total} {HEADLINE_SUITES[s.name]}" for s in headline)

    def lines(self) -> list[str]:
        out = [self.summary()]
        out += [s.summary() for s in self.suites if s.name not in HEADLINE_SUITES]
        out += [r.summary() for r in self.structural]
        out += [d.summary() for d in self.domination]
        if self.negative_control is not None:
            control = self.negative_control
            witness = control.witnesses.get("positivity")
            out.append(f"{control.summary()} [negative control, witness {witness}]")
        return out


def pfaffian_suite(n: int, trials: int, rng: np.random.Generator) -> SuiteReport:
    """Pf(W)² against det(W) for random complex antisymmetric 2n x 2n matrices."""
    report = SuiteReport("pfaffian")
    m = 2 * n
    for _ in range(trials):
        G = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        W = G - G.T
        pf = pfaffian_matrix(W)
        det = np.linalg.det(W)
        gap = abs(pf * pf - det) / max(abs(det), 1e-300)
        report.record(gap <= 1e-9, -gap, witness=W)
    return report


def verify_inequalities(n: int, trials: int = 1000, seed: int = 7, samples: int = 1000) -> VerifyReport:
    """
    Runs the randomized suites in dimension n from one seeded generator.

    Args:
        n (int): Quaternionic dimension.
        trials (int): Random forms per comparison suite.
        seed (int): Seed of the shared generator.
        samples (int): Cone samples per structural check.

    Returns:
        VerifyReport: Every suite and structural report.
    """
    rng = np.random.default_rng(seed)
    frame = standard_frame(n)
    report = VerifyReport(n)
    report.suites.append(hyperhermitian_part_suite(n, trials, rng, frame))
    report.suites.append(density_comparison_suite(n, trials, rng, frame))
    report.suites.append(pfaffian_suite(n, trials, rng))
    zoo = operator_zoo(n)
    report.structural = [check_structural(spec, samples, rng) for spec in zoo]
    report.domination = [check_domination(spec, samples, rng) for spec in zoo]
    if n >= 2:
        # every operator is λ itself when n = 1
        report.negative_control = check_structural(LargestEigenvalue(n), samples, rng, expect_failure=True)
    logger.info(f"n={n}: {report.summary()}")
    return report


@dataclass
class SelftestResult:
    name: str
    passed: bool
    detail: str = ""


def _close(a, b, tol: float) -> bool:
    return bool(np.allclose(a, b, atol=tol, rtol=0))


def _frame_identities() -> bool:
    one, two = standard_frame(1), standard_frame(2)
    e0 = np.eye(4)[0]
    block = np.kron(np.eye(2), one.J_mat)
    return _close(one.J_mat @ one.J_mat @ e0, -e0, 1e-15) and _close(two.J_mat, block, 0.0)


def _decompose_identity() -> bool:
    frame = standard_frame(2)
    H = np.zeros((2, 2, 4))
    H[0, 0, 0] = H[1, 1, 0] = 1.0
    h, omega = decompose(H, frame)
    return _close(h.A, np.eye(4), 1e-15) and abs(omega.pfaffian - 1.0) < 1e-14


def _decompose_diagonal() -> bool:
    frame = standard_frame(2)
    H = np.zeros((2, 2, 4))
    H[0, 0, 0], H[1, 1, 0] = 2.0, 3.0
    _, omega = decompose(H, frame)
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    expected = np.block([[2 * block, np.zeros((2, 2))], [np.zeros((2, 2)), 3 * block]])
    return _close(omega.W, expected, 1e-15)


def _recompose_round_trip() -> bool:
    frame = standard_frame(2)
    H = random_quaternion_hermitian(2, np.random.default_rng(1))
    return _close(recompose(decompose(H, frame)[0], frame), H, 1e-13)


def _pfaffian_examples() -> bool:
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    W = np.block([[2.0 * block, np.zeros((2, 2))], [np.zeros((2, 2)), 5.0 * block]])
    G = np.random.default_rng(2).standard_normal((4, 4))
    A = G - G.T
    pf = pfaffian_matrix(A).real
    return (
        abs(pfaffian(HyperhermitianForm(1, block)) - 1.0) < 1e-15
        and abs(pfaffian_matrix(W) - 10.0) < 1e-12
        and abs(pf * pf - np.linalg.det(A)) < 1e-10 * max(1.0, abs(np.linalg.det(A)))
    )


def _volume_constant() -> bool:
    return all(abs(volume_constant(n) - volume_constant_closed_form(n)) < 1e-12 for n in (1, 2))


def _j_pullback_examples() -> bool:
    frame = standard_frame(1)
    identity = HermitianForm.identity(1)
    e00 = HermitianForm(1, np.diag([1.0, 0.0]))
    return (
        _close(j_pullback(identity, frame).A, -np.eye(2), 1e-15)
        and _close((-j_pullback(e00, frame)).A, np.diag([0.0, 1.0]), 1e-15)
        and _close(hyperhermitian_part(identity, frame).A, 2 * np.eye(2), 1e-15)
        and _close(hyperhermitian_part(e00, frame).A, np.eye(2), 1e-15)
    )


def _hyperhermitian_part_examples() -> bool:
    frame = standard_frame(1)
    report = check_hyperhermitian_part(HermitianForm.identity(1), frame)
    zero = check_hyperhermitian_part(HermitianForm(1, np.zeros((2, 2))), frame)
    return abs(report.lhs_det - 4) < 1e-12 and abs(report.margin - 3) < 1e-12 and zero.margin == 0.0


def _density_comparison_examples() -> bool:
    ok = True
    for n in (1, 2):
        report = check_density_comparison(HermitianForm.identity(n), standard_frame(n))
        ok &= abs(report.quat_side / report.complex_side - 4**n) < 1e-12 and report.pfaffian_agrees
    return ok


def _eigenvalue_examples() -> bool:
    frame = standard_frame(2)
    omega = HyperhermitianForm.standard(frame)
    scaled = HyperhermitianForm.from_hermitian(HermitianForm(2, np.diag([3.0, 3.0, 0.5, 0.5])), frame)
    perturbed = random_hyperhermitian(2, frame, np.random.default_rng(3))
    independent = np.sort(np.linalg.eigvals(perturbed.to_hermitian(frame).A).real)[::2][::-1]
    return (
        _close(eigenvalues(omega, omega, frame).values, [1.0, 1.0], 1e-14)
        and _close(eigenvalues(scaled, omega, frame).values, [3.0, 0.5], 1e-14)
        and _close(eigenvalues(perturbed, omega, frame).values, independent, 1e-8)
    )


def _operator_examples() -> bool:
    f = qma_operator(2)
    report = check_structural(f, 1000, np.random.default_rng(4))
    control = check_structural(LargestEigenvalue(2), 200, np.random.default_rng(5), expect_failure=True)
    return (
        abs(f(np.array([4.0, 1.0])) - 2.0) < 1e-14
        and _close(linearization_coeffs(f, np.array([4.0, 1.0])), [1 / 8, 1 / 2], 1e-14)
        and _close(linearization_coeffs(f, np.ones(2)), [1 / 2, 1 / 2], 1e-15)
        and report.passed
        and report.min_product >= 0.25 * (1 - 1e-8)
        and "positivity" in control.witnesses
    )


def _spectral_derivative() -> bool:
    grid = TorusGrid(1, 8)
    phi = ScalarField.from_function(grid, lambda *x: 0.1 * np.cos(2 * np.pi * x[0]))
    exact = -((2 * np.pi) ** 2) * phi.values
    return _close(grid.second_derivative(phi.values, 0, 0), exact, 1e-12)


def _quadratic_patch() -> bool:
    frame = standard_frame(2)
    c = np.array([0.5, 2.0])
    R = np.diag(np.repeat(c, 4))
    lam = np.sort(np.linalg.eigvalsh(hessian_perturbation(R, frame)))
    return _close(lam, np.repeat(np.sort(c), 2), 1e-14)


def _zero_rhs_solve() -> bool:
    result = solve(qma_operator(1), ScalarField.constant(TorusGrid(1, 8)))
    return result.neg_inf_phi == 0.0 and result.b == 0.0 and result.newton_iters == 0


def _cosine_solve() -> bool:
    grid = TorusGrid(1, 16)
    F = ScalarField.from_function(grid, lambda *x: 0.1 * np.cos(2 * np.pi * x[0]))
    result = solve(qma_operator(1), F, SolverOptions())
    return (
        result.residual_inf <= 1e-8
        and result.newton_iters <= 30
        and forward_mismatch(result) <= 1e-7
        and result.phi.sup == 0.0
        and result.min_eig_margin > 0
    )


def _tau_examples() -> bool:
    monotone = gp.tau(1, -1.0) > gp.tau(10, -1.0) > gp.tau(100, -1.0) > 0
    bound = all(abs(gp.tau(k, 1.0) - 1.0) <= 1 / (4 * k * k) for k in (1, 10, 100))
    return monotone and bound and all(abs(gp.tau(k, 0.0) - 1 / (2 * k)) < 1e-15 for k in (1, 10, 100))


def _radial_examples() -> bool:
    ball = gp.BallModel(1, 0.2, nodes=4097)
    c = 3.0
    profile = gp.radial_cma_dirichlet(np.full_like(ball.r2, c), ball)
    closed = np.sqrt(c) * (ball.r2 - ball.S)
    instance = gp.constant_instance(ball, 0.5 * 0.2**2)
    g = gp.tau(10, -instance.sublevel.values)
    normalised = gp.radial_cma_dirichlet(g / ball.integrate(g), ball)
    zero = gp.radial_cma_dirichlet(np.zeros_like(ball.r2), ball)
    return (
        _close(profile.values, closed, 1e-10)
        and abs(normalised.mass - 1.0) < 1e-8
        and not np.any(zero.values)
    )


def _claim_scaling() -> bool:
    u = np.array([-0.2, -0.1, 0.3])
    psi = np.array([-1.0, -0.5, 0.0])
    once = gp.verify_claim(u, psi, 1.0, 1).C_empirical
    twice = gp.verify_claim(u, psi, 2.0, 1).C_empirical
    empty = gp.verify_claim(np.abs(u), psi, 1.0, 1)
    return abs(twice - once / 2) <= 1e-15 * once and empty.C_empirical == 0.0


def _entropy_norm_examples() -> bool:
    grid = TorusGrid(1, 8)
    c, p = 0.3, 3.0
    return norm_entropy(ScalarField.constant(grid), p) == 0.0 and abs(
        norm_entropy(ScalarField.constant(grid, c), p) - abs(2 * c) ** p * np.exp(2 * c)
    ) < 1e-14


def _constant_family_probe() -> bool:
    grid = TorusGrid(1, 8)
    F, _ = RhsFamily("constant", amplitude=0.7, mode="fix_lq", target=2.0).generate(grid)
    return solve(qma_operator(1), F).neg_inf_phi == 0.0


SELFTEST_CHECKS: list[tuple[str, Callable[[], bool]]] = [
    ("frame identities", _frame_identities),
    ("decompose identity", _decompose_identity),
    ("decompose diagonal", _decompose_diagonal),
    ("recompose round trip", _recompose_round_trip),
    ("pfaffian examples", _pfaffian_examples),
    ("volume constant", _volume_constant),
    ("j pullback examples", _j_pullback_examples),
    ("hyperhermitian part examples", _hyperhermitian_part_examples),
    ("density comparison examples", _density_comparison_examples),
    ("eigenvalue examples", _eigenvalue_examples),
    ("operator examples", _operator_examples),
    ("spectral derivative", _spectral_derivative),
    ("quadratic patch", _quadratic_patch),
    ("zero right hand side", _zero_rhs_solve),
    ("tau examples", _tau_examples),
    ("radial dirichlet", _radial_examples),
    ("claim scaling", _claim_scaling),
    ("entropy norm", _entropy_norm_examples),
    ("constant family", _constant_family_probe),
]

SLOW_CHECKS: list[tuple[str, Callable[[], bool]]] = [
    ("cosine solve N=16", _cosine_solve),
]


def run_selftest(full: bool = False) -> list[SelftestResult]:
    """
    Runs every example check; the N=16 solve is included only when full is set.

    Returns:
        list[SelftestResult]: One result per check; exceptions count as failures.
    """
    checks = SELFTEST_CHECKS + (SLOW_CHECKS if full else [])
    results = []
    for name, check in checks:
        try:
            passed, detail = bool(check()), ""
        except Exception as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        if passed:
            logger.debug(f"🟢 {name} ...OK")
        else:
            logger.error(f"🔴 {name} failed {detail}".rstrip())
        results.append(SelftestResult(name, passed, detail))
    return results
