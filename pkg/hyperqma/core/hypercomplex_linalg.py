"""
hypercomplex_linalg.py

Flat hypercomplex structures on R^{4n} = C^{2n} = H^n together with hermitian
and hyperhermitian forms, their conversions, positivity and determinants.

Conventions (fixed here and consumed by every other module):

* real coordinates x_{4i..4i+3} are the (1, i, j, k) components of the
  quaternion coordinate q_i;
* complex coordinates are z_{2i} = x_{4i} + i x_{4i+1} and
  z_{2i+1} = x_{4i+2} + i x_{4i+3}, so that q_i = z_{2i} + z_{2i+1} j;
* I, J, K act as left multiplication by i, j, k on every q_i, which gives the
  composition I J K = -Id. In complex coordinates I is multiplication by i and
  J is the antilinear map z -> S z̄ with S block diagonal in [[0, -1], [1, 0]];
* a hyperhermitian (2,0)-form is stored through its antisymmetric coefficient
  matrix W, Ω = Σ_{a<b} W_ab dz_a ∧ dz_b, related to the associated hermitian
  matrix h̄ by W = Sᵀ h̄.

Quaternions are stored as their 4 real components; quaternion matrices as
arrays of shape (n, n, 4).
"""

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from hyperqma.core import exterior
from hyperqma.exceptions import PositivityError

TOL = 1e-12


def quaternion_multiply(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product of quaternion arrays with components on the last axis."""
    a1, b1, c1, d1 = np.moveaxis(np.asarray(p, dtype=float), -1, 0)
    a2, b2, c2, d2 = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack(
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ],
        axis=-1,
    )


def quaternion_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.array(q, dtype=float)
    q[..., 1:] *= -1
    return q


def _left_multiplication(unit: np.ndarray) -> np.ndarray:
    """4x4 real matrix of x -> unit * x on a single quaternion."""
    basis = np.eye(4)
    return np.stack([quaternion_multiply(unit, e) for e in basis], axis=1)


@dataclass(frozen=True)
class HypercomplexFrame:
    """
    The standard hypercomplex structure on flat R^{4n}.

    Attributes:
        n (int): Quaternionic dimension.
        I_mat, J_mat, K_mat (np.ndarray): Real 4n x 4n matrices of I, J, K.
        complex_basis (np.ndarray): 2n x 4n complex matrix C with z = C x.
        j_conj (np.ndarray): Real 2n x 2n matrix S with J z = S z̄ in complex coordinates.
    """

    n: int
    I_mat: np.ndarray = field(repr=False)
    J_mat: np.ndarray = field(repr=False)
    K_mat: np.ndarray = field(repr=False)
    complex_basis: np.ndarray = field(repr=False)
    j_conj: np.ndarray = field(repr=False)

    @property
    def real_dim(self) -> int:
        return 4 * self.n

    @property
    def complex_dim(self) -> int:
        return 2 * self.n

    def to_complex(self, x: np.ndarray) -> np.ndarray:
        """Complex coordinates of real vectors (last axis of length 4n)."""
        return np.asarray(x) @ self.complex_basis.T

    def to_real(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z)
        x = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
        x[..., 0::2] = z.real
        x[..., 1::2] = z.imag
        return x

    def check(self, tol: float = TOL) -> None:
        """
        Verifies the defining identities of the structure.

        Raises:
            ValueError: If any of I² = J² = K² = -Id, IJK = -Id, the I-antilinearity
                of J, or the J-invariance of the euclidean metric fails.
        """
        eye = np.eye(self.real_dim)
        for name, E in (("I", self.I_mat), ("J", self.J_mat), ("K", self.K_mat)):
            if not np.allclose(E @ E, -eye, atol=tol, rtol=0):
                raise ValueError(f"{name}^2 != -Id")
            if not np.allclose(E.T @ E, eye, atol=tol, rtol=0):
                raise ValueError(f"metric is not {name}-invariant")
        if not np.allclose(self.I_mat @ self.J_mat @ self.K_mat, -eye, atol=tol, rtol=0):
            raise ValueError("IJK != -Id")
        holomorphic = self.holomorphic_vectors()
        image = self.J_mat @ holomorphic
        if not np.allclose(self.I_mat @ image, -1j * image, atol=tol, rtol=0):
            raise ValueError("J does not map T^{1,0} onto T^{0,1}")

    def holomorphic_vectors(self) -> np.ndarray:
        """Basis (columns) of the +i eigenspace of I in C^{4n}."""
        return self.complex_basis.conj().T / 2


def standard_frame(n: int) -> HypercomplexFrame:
    """
    Builds the standard flat hypercomplex structure on H^n.

    Args:
        n (int): Quaternionic dimension, at least 1.

    Returns:
        HypercomplexFrame: The structure with I, J, K left multiplication by i, j, k.

    Raises:
        ValueError: If n < 1.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"quaternionic dimension must be a positive integer, got {n}")
    n = int(n)
    blocks = [_left_multiplication(np.eye(4)[k]) for k in (1, 2, 3)]
    I_mat, J_mat, K_mat = (np.kron(np.eye(n), b) for b in blocks)

    C = np.zeros((2 * n, 4 * n), dtype=complex)
    for k in range(2 * n):
        C[k, 2 * k] = 1.0
        C[k, 2 * k + 1] = 1.0j
    # C J = S C̄ and C̄ Cᵀ = 2 Id
    S = C @ J_mat @ C.T / 2
    if np.abs(S.imag).max() > TOL:
        raise ValueError("J is not antilinear in the chosen complex coordinates")
    frame = HypercomplexFrame(n, I_mat, J_mat, K_mat, C, np.ascontiguousarray(S.real))
    frame.check()
    return frame


def _validate_square(M: np.ndarray, size: int, what: str) -> np.ndarray:
    M = np.asarray(M)
    if M.shape != (size, size):
        raise ValueError(f"{what} must have shape {(size, size)}, got {M.shape}")
    return M


@dataclass(frozen=True)
class HermitianForm:
    """
    Coefficient matrix of a real (1,1)-form in the standard I-holomorphic frame.

    Attributes:
        n (int): Quaternionic dimension.
        A (np.ndarray): 2n x 2n complex hermitian matrix.
    """

    n: int
    A: np.ndarray

    def __post_init__(self):
        A = np.array(_validate_square(self.A, 2 * self.n, "hermitian matrix"), dtype=complex)
        scale = max(1.0, float(np.abs(A).max(initial=0.0)))
        bad = np.argwhere(np.abs(A - A.conj().T) > 1e-10 * scale)
        if bad.size:
            i, j = bad[0]
            raise ValueError(f"matrix is not hermitian at entry ({i}, {j})")
        A = (A + A.conj().T) / 2
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @classmethod
    def identity(cls, n: int) -> "HermitianForm":
        return cls(n, np.eye(2 * n))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.A)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    def is_psd(self, tol: float = TOL) -> bool:
        """PSD up to -tol * max(1, |trace|)."""
        return self.min_eigenvalue >= -tol * max(1.0, abs(float(np.trace(self.A).real)))

    def require_psd(self, tol: float = TOL) -> None:
        if not self.is_psd(tol):
            raise PositivityError(f"form is not positive semidefinite (min eigenvalue {self.min_eigenvalue:.3e})")

    def det(self) -> float:
        return float(np.linalg.det(self.A).real)

    def is_j_invariant(self, frame: HypercomplexFrame, tol: float = 1e-10) -> bool:
        S = frame.j_conj
        return bool(np.allclose(S.T @ self.A.conj() @ S, self.A, atol=tol))

    def __add__(self, other: "HermitianForm") -> "HermitianForm":
        return HermitianForm(self.n, self.A + other.A)

    def __neg__(self) -> "HermitianForm":
        return HermitianForm(self.n, -self.A)

    def scaled(self, t: float) -> "HermitianForm":
        return HermitianForm(self.n, t * self.A)


@dataclass(frozen=True)
class HyperhermitianForm:
    """
    Coefficient matrix W of a (2,0)-form Ω = Σ_{a<b} W_ab dz_a ∧ dz_b.

    Attributes:
        n (int): Quaternionic dimension.
        W (np.ndarray): 2n x 2n complex antisymmetric matrix.
    """

    n: int
    W: np.ndarray

    def __post_init__(self):
        W = np.array(_validate_square(self.W, 2 * self.n, "(2,0) coefficient matrix"), dtype=complex)
        scale = max(1.0, float(np.abs(W).max(initial=0.0)))
        bad = np.argwhere(np.abs(W + W.T) > 1e-10 * scale)
        if bad.size:
            i, j = bad[0]
            raise ValueError(f"matrix is not antisymmetric at entry ({i}, {j})")
        W = (W - W.T) / 2
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @classmethod
    def standard(cls, frame: HypercomplexFrame) -> "HyperhermitianForm":
        return cls.from_hermitian(HermitianForm.identity(frame.n), frame)

    @classmethod
    def from_hermitian(cls, h: HermitianForm, frame: HypercomplexFrame) -> "HyperhermitianForm":
        """Ω = h̄(·J, ·); requires h to be J-invariant for the result to be antisymmetric."""
        return cls(h.n, frame.j_conj.T @ h.A)

    def to_hermitian(self, frame: HypercomplexFrame) -> HermitianForm:
        return HermitianForm(self.n, frame.j_conj @ self.W)

    def is_j_real(self, frame: HypercomplexFrame, tol: float = 1e-10) -> bool:
        """J-pullback of Ω equals its conjugate: Sᵀ W S = W̄."""
        S = frame.j_conj
        return bool(np.allclose(S.T @ self.W @ S, self.W.conj(), atol=tol))

    def evaluate(self, X: np.ndarray, Y: np.ndarray, frame: HypercomplexFrame) -> np.ndarray:
        """Ω(X, Y) for real tangent vectors (batched along leading axes)."""
        z = frame.to_complex(X)
        w = frame.to_complex(Y)
        return np.einsum("...a,ab,...b->...", z, self.W, w)

    def is_positive(self, frame: HypercomplexFrame, tol: float = TOL) -> bool:
        """Ω(X, XJ) >= 0 for all X, i.e. the associated hermitian matrix is PSD."""
        return self.to_hermitian(frame).is_psd(tol)

    @property
    def pfaffian(self) -> float:
        return pfaffian(self)

    def scaled(self, t: float) -> "HyperhermitianForm":
        return HyperhermitianForm(self.n, t * self.W)


def pfaffian_matrix(M: np.ndarray) -> complex:
    """
    Pfaffian of an antisymmetric matrix by Parlett-Reid tridiagonalization.

    The matrix is reduced to antisymmetric tridiagonal form with Gaussian
    elimination and symmetric pivoting; the Pfaffian is the signed product of
    the pivots.

    Args:
        M (np.ndarray): Square antisymmetric matrix.

    Returns:
        complex: Pf(M). Odd sized matrices give 0.
    """
    A = np.array(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"Pfaffian needs a square matrix, got shape {A.shape}")
    size = A.shape[0]
    if size % 2:
        return 0.0 + 0.0j

    pf = 1.0 + 0.0j
    for k in range(0, size - 1, 2):
        kp = k + 1 + int(np.abs(A[k + 1 :, k]).argmax())
        if kp != k + 1:
            A[[k + 1, kp], k:] = A[[kp, k + 1], k:]
            A[k:, [k + 1, kp]] = A[k:, [kp, k + 1]]
            pf = -pf
        if A[k + 1, k] == 0.0:
            return 0.0 + 0.0j
        pf *= A[k, k + 1]
        if k + 2 < size:
            tau = A[k, k + 2 :] / A[k, k + 1]
            A[k + 2 :, k + 2 :] += np.outer(tau, A[k + 2 :, k + 1]) - np.outer(A[k + 2 :, k + 1], tau)
    return pf


def pfaffian(W: HyperhermitianForm) -> float:
    """Pfaffian of a hyperhermitian form; real because Ω is J-real."""
    return float(pfaffian_matrix(W.W).real)


def _quaternion_block(q: np.ndarray) -> np.ndarray:
    """2x2 complex block of right multiplication by q = a + b j."""
    a = q[..., 0] + 1j * q[..., 1]
    b = q[..., 2] + 1j * q[..., 3]
    return np.stack([np.stack([a, -b.conj()], -1), np.stack([b, a.conj()], -1)], -2)


def decompose(H_quat: np.ndarray, frame: HypercomplexFrame) -> tuple[HermitianForm, HyperhermitianForm]:
    """
    Splits a quaternion-hermitian matrix H = h̄ + j Ω.

    Args:
        H_quat (np.ndarray): Array of shape (n, n, 4), H[j][i] the conjugate of H[i][j].
        frame (HypercomplexFrame): The flat structure fixing the conventions.

    Returns:
        tuple[HermitianForm, HyperhermitianForm]: (h̄, Ω).

    Raises:
        ValueError: On shape mismatch or, naming the first violating entry, on non-hermitian input.
    """
    H = np.asarray(H_quat, dtype=float)
    n = frame.n
    if H.shape != (n, n, 4):
        raise ValueError(f"quaternion matrix must have shape {(n, n, 4)}, got {H.shape}")
    gap = np.abs(H - quaternion_conjugate(np.swapaxes(H, 0, 1))).max(axis=-1)
    scale = max(1.0, float(np.abs(H).max(initial=0.0)))
    bad = np.argwhere(gap > 1e-12 * scale)
    if bad.size:
        i, j = bad[0]
        raise ValueError(f"quaternion matrix is not hermitian at entry ({i}, {j})")

    blocks = _quaternion_block(H)
    A = blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)
    h = HermitianForm(n, A)
    return h, HyperhermitianForm.from_hermitian(h, frame)


def recompose(h: HermitianForm, frame: HypercomplexFrame) -> np.ndarray:
    """Inverse of decompose on J-invariant hermitian matrices; returns the (n, n, 4) quaternion matrix."""
    if not h.is_j_invariant(frame):
        raise ValueError("hermitian matrix is not J-invariant, it has no quaternionic counterpart")
    n = h.n
    blocks = h.A.reshape(n, 2, n, 2).transpose(0, 2, 1, 3)
    a = blocks[..., 0, 0]
    b = blocks[..., 1, 0]
    return np.stack([a.real, a.imag, b.real, b.imag], axis=-1)


def moore_determinant(H_quat: np.ndarray, frame: HypercomplexFrame) -> float:
    """Moore determinant of a quaternion-hermitian matrix, realised as Pf(Ω)."""
    return decompose(H_quat, frame)[1].pfaffian


def top_form_ratio(W: HyperhermitianForm | np.ndarray) -> complex:
    """Ratio Ωⁿ ∧ conj(Ωⁿ) / ω_I^{2n} of top-degree forms, evaluated in the exterior algebra."""
    M = W.W if isinstance(W, HyperhermitianForm) else np.asarray(W)
    m = M.shape[0]
    n = m // 2
    omega = exterior.two_form_from_matrix(M)
    omega_n = exterior.power(omega, n)
    lhs = exterior.wedge(omega_n, exterior.conjugate(omega_n, m))
    rhs = exterior.power(exterior.kahler_form(m), m)
    return exterior.top_coefficient(lhs, m) / exterior.top_coefficient(rhs, m)


_volume_cache: dict = {}


def volume_constant(n: int) -> float:
    """
    Dimensional constant c(n) of Ωⁿ ∧ conj(Ωⁿ) = c(n) ω_I^{2n} for the standard Ω.

    Computed by expanding the wedge powers in the standard frame; ω_I is taken to
    the top degree 2n.
    """
    if n < 1:
        raise ValueError(f"quaternionic dimension must be positive, got {n}")
    if n not in _volume_cache:
        value = top_form_ratio(HyperhermitianForm.standard(standard_frame(n)))
        if abs(value.imag) > 1e-12 * abs(value):
            raise ArithmeticError("volume constant is not real")
        _volume_cache[n] = float(value.real)
    return _volume_cache[n]


def volume_constant_closed_form(n: int) -> float:
    """4ⁿ (n!)² / (2n)!, the value the exterior expansion produces."""
    return 4**n * factorial(n) ** 2 / factorial(2 * n)


def random_psd_hermitian(n: int, rng: np.random.Generator, rank: int | None = None) -> HermitianForm:
    """Random PSD 2n x 2n hermitian form G G*, optionally rank deficient, with trace 2n e^{U(-1,1)}."""
    m = 2 * n
    rank = m if rank is None else rank
    G = rng.standard_normal((m, rank)) + 1j * rng.standard_normal((m, rank))
    G *= np.sqrt(m * np.exp(rng.uniform(-1.0, 1.0))) / np.linalg.norm(G)
    return HermitianForm(n, G @ G.conj().T)


def random_hyperhermitian(
    n: int, frame: HypercomplexFrame, rng: np.random.Generator, positive: bool = True
) -> HyperhermitianForm:
    """Random J-real (2,0)-form; positive ones come from hyperhermitian parts of PSD forms."""
    if positive:
        base = random_psd_hermitian(n, rng)
        A = base.A + frame.j_conj.T @ base.A.conj() @ frame.j_conj
        A = A + 1e-3 * np.eye(2 * n)
    else:
        G = rng.standard_normal((2 * n, 2 * n)) + 1j * rng.standard_normal((2 * n, 2 * n))
        B = G + G.conj().T
        A = B + frame.j_conj.T @ B.conj() @ frame.j_conj
    return HyperhermitianForm.from_hermitian(HermitianForm(n, A), frame)


def random_quaternion_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random (n, n, 4) quaternion-hermitian matrix with real diagonal."""
    H = rng.standard_normal((n, n, 4))
    H = (H + quaternion_conjugate(np.swapaxes(H, 0, 1))) / 2
    for i in range(n):
        H[i, i, 1:] = 0.0
    return H
