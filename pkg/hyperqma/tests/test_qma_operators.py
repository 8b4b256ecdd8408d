# hyperqma/tests/test_qma_operators.py

import pickle

import numpy as np
import pytest

from hyperqma.core.hypercomplex_linalg import HermitianForm, HyperhermitianForm, random_hyperhermitian, standard_frame
from hyperqma.core.logger import Logger
from hyperqma.core.qma_operators import (
    ArithmeticMean,
    EigTuple,
    GeometricMean,
    HessianQuotient,
    LargestEigenvalue,
    check_domination,
    check_structural,
    eigenvalues,
    elementary_symmetric,
    linearization_coeffs,
    operator_from_name,
    operator_zoo,
    pencil_eigenvalues,
    qma_operator,
    sample_cone,
)
from hyperqma.exceptions import ConeError, PairingError, PositivityError

# --- Fixtures ---


@pytest.fixture
def frame2():
    return standard_frame(2)


@pytest.fixture
def omega2(frame2):
    return HyperhermitianForm.standard(frame2)


# --- Eigenvalues ---


def test_eigenvalues_of_base_form(omega2, frame2):
    assert np.allclose(eigenvalues(omega2, omega2, frame2).values, [1.0, 1.0], atol=1e-14)


def test_eigenvalues_of_scaled_blocks(omega2, frame2):
    scaled = HyperhermitianForm.from_hermitian(HermitianForm(2, np.diag([3.0, 3.0, 0.5, 0.5])), frame2)
    lam = eigenvalues(scaled, omega2, frame2)
    assert np.allclose(lam.values, [3.0, 0.5], atol=1e-14)
    assert lam.n == 2 and list(lam) == pytest.approx([3.0, 0.5])


def test_eigenvalues_match_independent_solver(omega2, frame2):
    perturbed = random_hyperhermitian(2, frame2, np.random.default_rng(3))
    independent = np.sort(np.linalg.eigvals(perturbed.to_hermitian(frame2).A).real)[::2][::-1]
    assert np.allclose(eigenvalues(perturbed, omega2, frame2).values, independent, atol=1e-8)


def test_eigenvalues_need_positive_base(omega2, frame2):
    with pytest.raises(PositivityError):
        eigenvalues(omega2, omega2.scaled(-1.0), frame2)


def test_from_spectrum_pairs_and_sorts_descending():
    lam = EigTuple.from_spectrum(np.array([2.0, 5.0, 2.0, 5.0]))
    assert np.array_equal(lam.values, [5.0, 2.0])
    assert lam.pairing_gap == 0.0


def test_from_spectrum_rejects_split_pairs():
    with pytest.raises(PairingError, match="relative gap"):
        EigTuple.from_spectrum(np.array([1.0, 1.1, 2.0, 2.0]))


def test_from_spectrum_rejects_odd_length():
    with pytest.raises(PairingError):
        EigTuple.from_spectrum(np.array([1.0, 1.0, 2.0]))


def test_pencil_eigenvalues_batched():
    mats = np.stack([np.diag([1.0, 1.0, 4.0, 4.0]), 2.0 * np.eye(4)])
    lam, gap = pencil_eigenvalues(mats)
    assert lam.shape == (2, 2)
    assert np.allclose(lam, [[1.0, 4.0], [2.0, 2.0]])
    assert gap == 0.0


def test_elementary_symmetric():
    lam = np.array([1.0, 2.0, 3.0])
    assert np.allclose(elementary_symmetric(lam), [1.0, 6.0, 11.0, 6.0])
    assert elementary_symmetric(lam, 2) == pytest.approx(11.0)
    assert elementary_symmetric(lam, -1) == 0.0
    assert elementary_symmetric(lam, 4) == 0.0


# --- Operators ---


def test_geometric_mean_example():
    f = qma_operator(2)
    assert f(np.array([4.0, 1.0])) == pytest.approx(2.0, abs=1e-14)
    assert np.allclose(f.gradient(np.array([4.0, 1.0])), [0.25, 1.0])


def test_linearization_coefficients():
    f = qma_operator(2)
    assert np.allclose(linearization_coeffs(f, np.array([4.0, 1.0])), [1 / 8, 1 / 2], atol=1e-14)
    assert np.allclose(linearization_coeffs(f, EigTuple.from_spectrum(np.ones(4))), [0.5, 0.5], atol=1e-15)


@pytest.mark.parametrize("spec", [GeometricMean(3), ArithmeticMean(3), HessianQuotient(3, 2), HessianQuotient(3, 3, 1)])
def test_operators_are_normalised(spec):
    assert spec(np.ones(3)) == pytest.approx(1.0, rel=1e-14)
    assert spec.gradient(np.ones(3)) == pytest.approx(np.full(3, 1 / 3), rel=1e-12)


def test_gamma_is_product_of_gradient_at_unit():
    assert GeometricMean(2).gamma == pytest.approx(0.25)
    assert ArithmeticMean(3).gamma == pytest.approx(1 / 27)


def test_evaluation_outside_cone_raises():
    with pytest.raises(ConeError, match="outside the cone"):
        qma_operator(2).evaluate(np.array([1.0, -1.0]))
    with pytest.raises(ConeError):
        HessianQuotient(3, 2).evaluate(np.array([1.0, -1.0, -1.0]))


def test_wrong_length_is_rejected():
    with pytest.raises(ValueError, match="expects 2 eigenvalues"):
        qma_operator(2).evaluate(np.ones(3))


def test_cone_membership():
    lam = np.array([[1.0, 2.0], [3.0, -1.0], [-1.0, -1.0]])
    assert GeometricMean(2).contains(lam).tolist() == [True, False, False]
    assert ArithmeticMean(2).contains(lam).tolist() == [True, True, False]


def test_generic_cone_margin_matches_closed_forms():
    lam = np.array([[3.0, 1.0], [0.5, 0.25]])
    hq = HessianQuotient(2, 2)
    assert np.allclose(hq.cone_margin(lam), GeometricMean(2).cone_margin(lam), atol=1e-12)


def test_hessian_quotient_index_validation():
    with pytest.raises(ValueError, match="0 <= l < k <= n"):
        HessianQuotient(2, 3)
    with pytest.raises(ValueError):
        HessianQuotient(3, 2, 2)


@pytest.mark.parametrize(
    "name, expected",
    [
        ("qma", GeometricMean(2)),
        ("laplacian", ArithmeticMean(2)),
        ("largest_eigenvalue", LargestEigenvalue(2)),
        ("hessian_quotient_2", HessianQuotient(2, 2)),
        ("hessian_quotient_2_1", HessianQuotient(2, 2, 1)),
    ],
)
def test_operator_from_name(name, expected):
    assert operator_from_name(name, 2) == expected


@pytest.mark.parametrize("name", ["monge", "hessian_quotient_x", "hessian_quotient_1_0_0"])
def test_operator_from_name_rejects_unknown(name):
    with pytest.raises(ValueError):
        operator_from_name(name, 2)


def test_operator_zoo_contents():
    assert [s.name for s in operator_zoo(1)] == ["qma", "laplacian", "hessian_quotient_1_0"]
    assert [s.name for s in operator_zoo(2)] == ["qma", "laplacian", "hessian_quotient_1_0", "hessian_quotient_2_0"]
    assert [s.name for s in operator_zoo(3)][-1] == "hessian_quotient_3_0"


def test_extreme_quotients_match_the_means():
    lam = np.random.default_rng(1).uniform(0.1, 3.0, size=(50, 3))
    assert np.allclose(HessianQuotient(3, 1)(lam), ArithmeticMean(3)(lam), rtol=1e-13)
    assert np.allclose(HessianQuotient(3, 3)(lam), GeometricMean(3)(lam), rtol=1e-13)



def test_operators_pickle():
    spec = HessianQuotient(3, 2)
    clone = pickle.loads(pickle.dumps(spec))
    assert clone == spec
    assert clone(np.array([3.0, 2.0, 1.0])) == spec(np.array([3.0, 2.0, 1.0]))


# --- Structural checks ---


def test_sample_cone_stays_inside():
    spec = HessianQuotient(3, 2)
    lam = sample_cone(spec, 500, np.random.default_rng(0))
    assert lam.shape == (500, 3)
    assert spec.contains(lam).all()


@pytest.mark.parametrize("n", [1, 2])
def test_shipped_operators_pass_structural_checks(n):
    rng = np.random.default_rng(4)
    for spec in operator_zoo(n):
        report = check_structural(spec, 1000, rng)
        assert report.passed, report.summary()
        assert report.min_product >= spec.gamma * (1 - 1e-8)


def test_qma_product_bound_is_attained_on_the_diagonal():
    report = check_structural(qma_operator(2), 1000, np.random.default_rng(4))
    assert report.min_product >= 0.25 * (1 - 1e-8)


def test_largest_eigenvalue_is_caught_with_a_witness():
    report = check_structural(LargestEigenvalue(2), 200, np.random.default_rng(5))
    assert not report.passed
    assert report.failures["positivity"] > 0
    assert report.witnesses["positivity"].shape == (2,)
    assert "FAIL" in report.summary()


def test_degenerate_quotient_fails_lower_bound():
    report = check_structural(HessianQuotient(2, 2, 1), 500, np.random.default_rng(6))
    assert report.failures["lower_bound"] > 0
    assert not report.passed


@pytest.mark.parametrize("spec", [ArithmeticMean(3), HessianQuotient(3, 2), GeometricMean(3)])
def test_shipped_operators_dominate_geometric_mean(spec):
    report = check_domination(spec, 500, np.random.default_rng(8))
    assert report.passed
    assert report.worst_ratio >= 1 - 1e-12


def test_negative_control_is_reported_as_expected(mocker):
    log = Logger(name="hyperqma.structural").get()
    info = mocker.patch.object(log, "info")
    warning = mocker.patch.object(log, "warning")
    report = check_structural(LargestEigenvalue(2), 200, np.random.default_rng(5), expect_failure=True)
    assert not report.passed
    assert report.as_expected
    assert "expected violation" in report.summary()
    assert "FAIL" not in report.summary()
    info.assert_called_once_with(report.summary())
    warning.assert_not_called()


def test_domination_summary():
    report = check_domination(HessianQuotient(2, 1), 100, np.random.default_rng(9))
    assert report.summary().startswith("hessian_quotient_1_0: dominates the geometric mean over 100 samples")
