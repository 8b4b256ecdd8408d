"""
exterior.py

A small exterior algebra over the complex coframe of C^m. Forms are sparse
dictionaries mapping strictly increasing generator tuples to complex
coefficients. Generator k < m stands for dz_k and generator m + k for dz̄_k.

Only what is needed to evaluate top-degree wedge powers in the standard frame
lives here; the rest of the package works with coefficient matrices.
"""

from itertools import combinations

import numpy as np

Form = dict


def _merge_sign(left: tuple, right: tuple) -> tuple[int, tuple]:
    """Sorts the concatenation of two disjoint increasing tuples and returns (sign, merged)."""
    inversions = 0
    for a in left:
        for b in right:
            if a > b:
                inversions += 1
    return (-1) ** inversions, tuple(sorted(left + right))


def wedge(alpha: Form, beta: Form) -> Form:
    """Wedge product of two forms."""
    out: Form = {}
    for ka, ca in alpha.items():
        for kb, cb in beta.items():
            if set(ka) & set(kb):
                continue
            sign, key = _merge_sign(ka, kb)
            out[key] = out.get(key, 0) + sign * ca * cb
    return {k: v for k, v in out.items() if v != 0}


def power(alpha: Form, k: int) -> Form:
    """k-th wedge power; the zeroth power is the constant 1."""
    out: Form = {(): 1}
    for _ in range(k):
        out = wedge(out, alpha)
    return out


def conjugate(alpha: Form, m: int) -> Form:
    """Complex conjugate: swaps dz_k and dz̄_k and conjugates coefficients."""
    out: Form = {}
    for key, c in alpha.items():
        swapped = tuple(g + m if g < m else g - m for g in key)
        perm = sorted(range(len(swapped)), key=lambda i: swapped[i])
        sign = _permutation_sign(perm)
        ordered = tuple(swapped[i] for i in perm)
        out[ordered] = out.get(ordered, 0) + sign * np.conj(c)
    return out


def _permutation_sign(perm: list) -> int:
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def two_form_from_matrix(W: np.ndarray) -> Form:
    """(2,0)-form Σ_{a<b} W_ab dz_a ∧ dz_b of an antisymmetric coefficient matrix."""
    m = W.shape[0]
    return {(a, b): complex(W[a, b]) for a, b in combinations(range(m), 2) if W[a, b] != 0}


def kahler_form(m: int) -> Form:
    """ω_I = (i/2) Σ dz_k ∧ dz̄_k, the fundamental form of the euclidean metric."""
    return {(k, m + k): 0.5j for k in range(m)}


def top_coefficient(alpha: Form, m: int) -> complex:
    """Coefficient of dz_0 ∧ … ∧ dz_{m-1} ∧ dz̄_0 ∧ … ∧ dz̄_{m-1}."""
    return complex(alpha.get(tuple(range(2 * m)), 0))
