# hyperqma/tests/test_exterior.py

import numpy as np
import pytest

from hyperqma.core import exterior


def test_wedge_is_anticommutative_on_one_forms():
    dz0 = {(0,): 1.0}
    dz1 = {(1,): 1.0}
    assert exterior.wedge(dz0, dz1) == {(0, 1): 1.0}
    assert exterior.wedge(dz1, dz0) == {(0, 1): -1.0}
    assert exterior.wedge(dz0, dz0) == {}


def test_power_zero_is_unit():
    assert exterior.power({(0, 1): 2.0}, 0) == {(): 1}


def test_two_form_squares_to_twice_the_pfaffian_term():
    W = np.array([[0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 3.0], [0.0, 0.0, -3.0, 0.0]])
    square = exterior.power(exterior.two_form_from_matrix(W), 2)
    assert square == {(0, 1, 2, 3): 6.0}


def test_conjugate_swaps_holomorphic_and_antiholomorphic():
    alpha = {(0, 1): 1j}
    conj = exterior.conjugate(alpha, 2)
    assert conj == {(2, 3): -1j}


def test_conjugate_reorders_with_sign():
    # dz_1 ∧ dz̄_0 conjugates to dz̄_1 ∧ dz_0 = −dz_0 ∧ dz̄_1
    alpha = {(1, 2): 1.0}
    assert exterior.conjugate(alpha, 2) == {(0, 3): -1.0}


@pytest.mark.parametrize("m", [1, 2, 3])
def test_kahler_form_top_power(m):
    top = exterior.top_coefficient(exterior.power(exterior.kahler_form(m), m), m)
    sign = (-1) ** (m * (m - 1) // 2)
    expected = sign * np.prod(np.arange(1, m + 1)) * (0.5j) ** m
    assert top == pytest.approx(expected, abs=1e-15)


def test_top_coefficient_of_lower_degree_form_is_zero():
    assert exterior.top_coefficient({(0,): 1.0}, 1) == 0
