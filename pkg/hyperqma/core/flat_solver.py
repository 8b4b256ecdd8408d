"""
flat_solver.py

Spectral Newton solver for f(λ(φ)) = e^{F+b} on the flat quaternionic torus
ℍⁿ/ℤ^{4n}, together with the checks run on its solutions.

The torus is [0, 1)^{4n} sampled on a uniform grid with N points per axis. All
derivatives are Fourier spectral. With the base form Ω normalised so that
½∂∂_J|z|² = Ω, the hermitian matrix of Ω + ∂∂_Jφ at a point is
Id + hyperhermitian_part(φ_{ij̄}), and λ(φ) are its paired eigenvalues.

Newton runs on G(φ, b) = log f(λ(φ)) − F − b with φ kept at mean zero. The
linearised operator is applied matrix-free and inverted with GMRES, using the
exact inverse of a constant coefficient Laplacian as preconditioner. Accepted
solutions are shifted so that sup φ = 0.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.fft
from scipy.sparse.linalg import LinearOperator, gmres

from hyperqma.core.hypercomplex_linalg import (
    HermitianForm,
    HypercomplexFrame,
    pfaffian_matrix,
    standard_frame,
    volume_constant,
)
from hyperqma.core.logger import Logger
from hyperqma.core.qma_operators import GeometricMean, OperatorSpec, pencil_eigh
from hyperqma.exceptions import ConeError, SolverDivergence
from hyperqma.utils import read_raw_grid, write_raw_grid, write_sidecar


class TorusGrid:
    """
    Uniform periodic grid on [0, 1)^{4n} with Fourier second derivatives.

    Attributes:
        n (int): Quaternionic dimension.
        N (int): Points per axis, even and at least 8.
        dim (int): Number of real axes, 4n.
        shape (tuple): Grid shape (N,) * 4n.
        size (int): Number of grid points.
        frame (HypercomplexFrame): Standard structure for this dimension.
    """

    def __init__(self, n: int, N: int):
        if n < 1:
            raise ValueError(f"quaternionic dimension must be positive, got {n}")
        if N < 8 or N % 2:
            raise ValueError(f"grid size must be even and at least 8, got {N}")
        self.n = int(n)
        self.N = int(N)
        self.dim = 4 * self.n
        self.shape = (self.N,) * self.dim
        self.size = self.N**self.dim
        self.spacing = 1.0 / self.N
        self.frame = standard_frame(self.n)

        full = 2 * np.pi * scipy.fft.fftfreq(self.N, d=self.spacing)
        half = 2 * np.pi * scipy.fft.rfftfreq(self.N, d=self.spacing)
        self._k = []
        self._k_mixed = []
        for a in range(self.dim):
            k = half if a == self.dim - 1 else full
            mixed = k.copy()
            mixed[self.N // 2] = 0.0
            view = [1] * self.dim
            view[a] = -1
            self._k.append(k.reshape(view))
            self._k_mixed.append(mixed.reshape(view))
        self._laplacian = -sum(k**2 for k in self._k)

    def __repr__(self):
        return f"TorusGrid(n={self.n}, N={self.N})"

    def __eq__(self, other):
        return isinstance(other, TorusGrid) and (self.n, self.N) == (other.n, other.N)

    def __hash__(self):
        return hash((self.n, self.N))

    def __getstate__(self):
        return {"n": self.n, "N": self.N}

    def __setstate__(self, state):
        self.__init__(state["n"], state["N"])

    def coordinates(self) -> list[np.ndarray]:
        """Sparse broadcastable coordinate arrays x_0, ..., x_{4n-1}."""
        x = np.arange(self.N) * self.spacing
        return np.meshgrid(*([x] * self.dim), indexing="ij", sparse=True)

    def periodic_offsets(self, center: np.ndarray) -> list[np.ndarray]:
        """Componentwise periodic displacement x − center folded into [−½, ½)."""
        return [((x - c + 0.5) % 1.0) - 0.5 for x, c in zip(self.coordinates(), center)]

    def point(self, flat_index: int) -> np.ndarray:
        return np.array(np.unravel_index(flat_index, self.shape), dtype=float) * self.spacing

    def transform(self, values: np.ndarray) -> np.ndarray:
        return scipy.fft.rfftn(np.reshape(values, self.shape))

    def _multiplier(self, a: int, b: int) -> np.ndarray:
        if a == b:
            return -(self._k[a] ** 2)
        return -self._k_mixed[a] * self._k_mixed[b]

    def second_derivative(
        self, values: np.ndarray, a: int, b: int, transformed: np.ndarray | None = None
    ) -> np.ndarray:
        """∂²/∂x_a∂x_b of a periodic field; the Nyquist mode is dropped for mixed derivatives."""
        vh = self.transform(values) if transformed is None else transformed
        return scipy.fft.irfftn(vh * self._multiplier(a, b), s=self.shape)

    def complex_hessian(self, values: np.ndarray) -> np.ndarray:
        """
        Complex Hessian φ_{ij̄} at every grid point.

        Returns:
            np.ndarray: Hermitian matrices of shape (size, 2n, 2n).
        """
        vh = self.transform(values)
        cache: dict = {}

        def R(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                cache[key] = self.second_derivative(values, *key, transformed=vh).ravel()
            return cache[key]

        m = 2 * self.n
        A = np.empty((self.size, m, m), dtype=complex)
        for i in range(m):
            for j in range(m):
                real = R(2 * i, 2 * j) + R(2 * i + 1, 2 * j + 1)
                imag = R(2 * i, 2 * j + 1) - R(2 * i + 1, 2 * j)
                A[:, i, j] = 0.25 * (real + 1j * imag)
        return A

    def inverse_laplacian(self, values: np.ndarray, sigma: float = 1.0) -> np.ndarray:
        """Mean-zero solution of σΔu = values − mean(values)."""
        vh = self.transform(values)
        lap = sigma * self._laplacian
        with np.errstate(divide="ignore", invalid="ignore"):
            uh = np.where(lap != 0.0, vh / lap, 0.0)
        return scipy.fft.irfftn(uh, s=self.shape)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """
    Real function sampled on a torus grid.

    Attributes:
        grid (TorusGrid): The grid.
        values (np.ndarray): Finite values of shape grid.shape.
    """

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: TorusGrid, func: Callable[..., np.ndarray]) -> "ScalarField":
        """Samples func(x_0, ..., x_{4n-1}) on broadcastable coordinate arrays."""
        return cls(grid, np.broadcast_to(func(*grid.coordinates()), grid.shape))

    @classmethod
    def constant(cls, grid: TorusGrid, c: float = 0.0) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def sup(self) -> float:
        return float(self.values.max())

    @property
    def inf(self) -> float:
        return float(self.values.min())

    @property
    def l1_norm(self) -> float:
        """Grid quadrature of |φ| over the unit volume torus."""
        return float(np.abs(self.values).mean())

    def __add__(self, other: "ScalarField | float") -> "ScalarField":
        other_values = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values + other_values)

    def scaled(self, t: float) -> "ScalarField":
        return ScalarField(self.grid, t * self.values)


def complex_hessian_from_real(R: np.ndarray) -> np.ndarray:
    """φ_{ij̄} from a real Hessian (..., 4n, 4n), with z_k = x_{2k} + i x_{2k+1}."""
    R = np.asarray(R, dtype=float)
    re, im = slice(0, None, 2), slice(1, None, 2)
    real = R[..., re, re] + R[..., im, im]
    imag = R[..., re, im] - R[..., im, re]
    return 0.25 * (real + 1j * imag)


def hyperhermitian_batch(A: np.ndarray, frame: HypercomplexFrame) -> np.ndarray:
    """Batched α + β, β = −α(·J, ·J), for hermitian matrices on the last two axes."""
    S = frame.j_conj
    return A + S.T @ A.conj() @ S


def hessian_perturbation(R: np.ndarray, frame: HypercomplexFrame) -> np.ndarray:
    """Hermitian matrix of ∂∂_Jφ at points where the real Hessian R of φ is known."""
    return hyperhermitian_batch(complex_hessian_from_real(R), frame)


@dataclass(frozen=True, eq=False)
class HessianField:
    """
    Complex Hessians and their hyperhermitian parts over a grid.

    Attributes:
        grid (TorusGrid): The grid.
        complex_hessian (np.ndarray): φ_{ij̄}, shape (size, 2n, 2n).
        perturbation (np.ndarray): Hyperhermitian parts, the perturbation of the base hermitian matrix.
    """

    grid: TorusGrid
    complex_hessian: np.ndarray
    perturbation: np.ndarray

    def at(self, index: int) -> HermitianForm:
        return HermitianForm(self.grid.n, self.perturbation[index])

    def metric(self) -> np.ndarray:
        """Hermitian matrices of Ω + ∂∂_Jφ."""
        return np.eye(2 * self.grid.n) + self.perturbation


def quaternionic_hessian_field(phi: ScalarField, frame: HypercomplexFrame | None = None) -> HessianField:
    """
    Spectral complex Hessian of φ and its hyperhermitian part at every grid point.

    Args:
        phi (ScalarField): The potential.
        frame (HypercomplexFrame, optional): Defaults to the grid's standard frame.

    Returns:
        HessianField: Both matrix fields.
    """
    frame = phi.grid.frame if frame is None else frame
    A = phi.grid.complex_hessian(phi.values)
    return HessianField(phi.grid, A, hyperhermitian_batch(A, frame))


@dataclass
class SolverOptions:
    """
    Newton solver settings.

    Attributes:
        tol (float): Target sup-norm residual.
        max_iter (int): Newton iteration cap.
        gmres_rtol (float): Relative tolerance of the inner linear solves.
        gmres_restart (int): GMRES restart length.
        gmres_maxiter (int): GMRES restart cycles.
        min_step (float): Damping floor of the line search.
        dynamic_range_limit (float): Largest accepted max e^F / min e^F.
        force (bool): Solve even beyond the dynamic range limit.
        initial_phi (np.ndarray, optional): Starting potential.
    """

    tol: float = 1e-8
    max_iter: int = 30
    gmres_rtol: float = 1e-10
    gmres_restart: int = 40
    gmres_maxiter: int = 20
    min_step: float = 2.0**-10
    dynamic_range_limit: float = 1e6
    force: bool = False
    initial_phi: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_dict(cls, data: dict) -> "SolverOptions":
        keys = {"tol", "max_iter", "gmres_rtol", "force"}
        return cls(**{k: v for k, v in data.items() if k in keys})


@dataclass
class SolveResult:
    """
    Accepted solution of f(λ(φ)) = e^{F+b} with sup φ = 0.

    Attributes:
        phi (ScalarField): Solution, shifted so that sup φ = 0.
        b (float): Normalisation constant.
        residual_inf (float): Sup-norm of log f(λ(φ)) − F − b.
        newton_iters (int): Newton steps taken.
        min_eig_margin (float): Smallest distance of λ(φ) to ∂Γ along the diagonal.
        eigenvalues (np.ndarray): λ(φ) per grid point, descending, shape (size, n).
        F (ScalarField): Right hand side.
        spec (OperatorSpec): Operator solved for.
        pairing_gap (float): Worst relative splitting of eigenvalue pairs over all evaluations.
        history (list): Residual per Newton iteration.
    """

    phi: ScalarField
    b: float
    residual_inf: float
    newton_iters: int
    min_eig_margin: float
    eigenvalues: np.ndarray = field(repr=False)
    F: ScalarField = field(repr=False)
    spec: OperatorSpec = None
    pairing_gap: float = 0.0
    history: list = field(default_factory=list)

    @property
    def grid(self) -> TorusGrid:
        return self.phi.grid

    @property
    def neg_inf_phi(self) -> float:
        return 0.0 - self.phi.inf


class FlatSolver:
    """
    Damped Newton solver on a torus grid.

    Attributes:
        spec (OperatorSpec): Operator f.
        grid (TorusGrid): Discretisation.
        opts (SolverOptions): Settings.
        logger (logging.Logger): Per-class logger.
    """

    def __init__(self, spec: OperatorSpec, grid: TorusGrid, opts: SolverOptions | None = None):
        if spec.n != grid.n:
            raise ValueError(f"operator of dimension {spec.n} on a grid of dimension {grid.n}")
        self.spec = spec
        self.grid = grid
        self.opts = opts or SolverOptions()
        self.frame = grid.frame
        self.logger = Logger(name=self.__class__.__name__).get()
        self.pairing_gap = 0.0

    def metric(self, phi_values: np.ndarray) -> np.ndarray:
        return quaternionic_hessian_field(ScalarField(self.grid, phi_values), self.frame).metric()

    def state(self, phi_values: np.ndarray):
        """(λ ascending, eigenvectors) at every point, or None if λ leaves Γ somewhere."""
        if not np.all(np.isfinite(phi_values)):
            return None
        lam, vectors, gap = pencil_eigh(self.metric(phi_values))
        self.pairing_gap = max(self.pairing_gap, gap)
        if not np.all(self.spec.contains(lam)):
            return None
        return lam, vectors

    def residual(self, lam: np.ndarray, F: np.ndarray, b: float) -> np.ndarray:
        return np.log(self.spec.evaluate(lam)) - F - b

    def _linearization(self, lam: np.ndarray, vectors: np.ndarray):
        w = np.repeat(self.spec.log_gradient(lam) / 2, 2, axis=-1)
        M = np.einsum("pik,pk,pjk->pij", vectors, w, vectors.conj())
        sigma = float(w.sum(axis=-1).mean()) / (4 * self.grid.n)
        return M, sigma

    def _newton_step(self, lam, vectors, G, phi):
        P = self.grid.size
        M, sigma = self._linearization(lam, vectors)

        def matvec(v):
            v = np.ravel(v)
            dphi = v[:P]
            dH = hyperhermitian_batch(self.grid.complex_hessian(dphi), self.frame)
            out = np.empty(P + 1)
            out[:P] = np.einsum("pij,pji->p", M, dH).real - v[P]
            out[P] = dphi.mean()
            return out

        def precondition(r):
            r = np.ravel(r)
            out = np.empty(P + 1)
            rho = r[:P].mean()
            out[:P] = self.grid.inverse_laplacian(r[:P], sigma).ravel() + r[P]
            out[P] = -rho
            return out

        op = LinearOperator((P + 1, P + 1), matvec=matvec, dtype=float)
        prec = LinearOperator((P + 1, P + 1), matvec=precondition, dtype=float)
        rhs = np.concatenate([-G, [-phi.mean()]])
        x, info = gmres(
            op,
            rhs,
            M=prec,
            rtol=self.opts.gmres_rtol,
            atol=0.0,
            restart=self.opts.gmres_restart,
            maxiter=self.opts.gmres_maxiter,
        )
        if info > 0:
            self.logger.warning(f"GMRES stopped before reaching rtol={self.opts.gmres_rtol:.1e}; using inexact step")
        return x[:P], float(x[P])

    def _check_dynamic_range(self, F: np.ndarray) -> None:
        spread = float(F.max() - F.min())
        limit = np.log(self.opts.dynamic_range_limit)
        if spread > limit:
            message = f"e^F dynamic range e^{spread:.2f} exceeds {self.opts.dynamic_range_limit:.0e}"
            if not self.opts.force:
                raise ValueError(message + "; pass force to solve anyway")
            self.logger.warning(message + " (forced)")

    def solve(self, F: ScalarField) -> SolveResult:
        """
        Runs damped Newton from opts.initial_phi (or zero).

        Args:
            F (ScalarField): Right hand side on this grid.

        Returns:
            SolveResult: The accepted solution.

        Raises:
            ValueError: On grid mismatch or excessive dynamic range without force.
            ConeError: If the initial guess is not admissible.
            SolverDivergence: If the damping floor or the iteration cap is hit.
        """
        if F.grid != self.grid:
            raise ValueError(f"right hand side lives on {F.grid}, solver on {self.grid}")
        Fv = F.values.ravel()
        self._check_dynamic_range(Fv)
        self.pairing_gap = 0.0

        phi = np.zeros(self.grid.size)
        if self.opts.initial_phi is not None:
            phi = np.array(self.opts.initial_phi, dtype=float).ravel()
            phi -= phi.mean()
        current = self.state(phi)
        if current is None:
            raise ConeError("initial potential is not admissible")
        lam, vectors = current
        b = float(np.mean(np.log(self.spec.evaluate(lam)) - Fv))
        G = self.residual(lam, Fv, b)

        history = []
        it = 0
        while True:
            res = float(np.abs(G).max())
            history.append(res)
            self.logger.debug(f"[{self.spec.name}] Newton {it}: residual {res:.3e}, b {b:+.6e}")
            if res <= self.opts.tol:
                break
            if it >= self.opts.max_iter:
                self.logger.warning(f"[{self.spec.name}] no convergence after {it} Newton steps")
                raise SolverDivergence("Newton iteration cap reached", res, it)

            dphi, db = self._newton_step(lam, vectors, G, phi)
            t = 1.0
            reason = "residual did not decrease"
            while True:
                trial_phi = phi + t * dphi
                trial_b = b + t * db
                trial = self.state(trial_phi)
                if trial is None:
                    reason = "step leaves the admissible cone"
                else:
                    trial_G = self.residual(trial[0], Fv, trial_b)
                    if np.abs(trial_G).max() <= (1 - 1e-4 * t) * res:
                        break
                t /= 2
                if t < self.opts.min_step:
                    self.logger.warning(f"[{self.spec.name}] line search failed at step {it}: {reason}")
                    raise SolverDivergence(f"damping floor reached, {reason}", res, it)
            if t < 1.0:
                self.logger.debug(f"[{self.spec.name}] damped step t={t:g}")
            phi, b = trial_phi, trial_b
            (lam, vectors), G = trial, trial_G
            it += 1

        phi = phi - phi.max()
        margin = float(self.spec.cone_margin(lam).min())
        self.logger.info(
            f"[{self.spec.name}] converged in {it} Newton steps: residual {history[-1]:.3e}, "
            f"b {b:+.6e}, -inf phi {-phi.min():.6e}"
        )
        return SolveResult(
            phi=ScalarField(self.grid, phi),
            b=b,
            residual_inf=history[-1],
            newton_iters=it,
            min_eig_margin=margin,
            eigenvalues=lam[:, ::-1].copy(),
            F=F,
            spec=self.spec,
            pairing_gap=self.pairing_gap,
            history=history,
        )


def solve(spec: OperatorSpec, F: ScalarField, opts: SolverOptions | None = None) -> SolveResult:
    """Solves f(λ(φ)) = e^{F+b}, sup φ = 0, on F's grid."""
    return FlatSolver(spec, F.grid, opts).solve(F)


def solve_continuation(
    spec: OperatorSpec, F: ScalarField, ts: list[float], opts: SolverOptions | None = None
) -> list[SolveResult]:
    """
    Path following in t: solves for t·F along ts, starting each solve from the previous solution.
    """
    opts = opts or SolverOptions()
    results = []
    for t in ts:
        step_opts = replace(opts, initial_phi=results[-1].phi.values if results else opts.initial_phi)
        results.append(solve(spec, F.scaled(t), step_opts))
    return results


def forward_residual(result: SolveResult) -> float:
    """Recomputes ‖log f(λ(φ)) − F − b‖∞ from the stored potential."""
    solver = FlatSolver(result.spec, result.grid)
    lam, _, _ = pencil_eigh(solver.metric(result.phi.values.ravel()))
    return float(np.abs(solver.residual(lam, result.F.values.ravel(), result.b)).max())


def forward_mismatch(result: SolveResult) -> float:
    """sup |f(λ(φ)) e^{−b} − e^F| over the grid."""
    solver = FlatSolver(result.spec, result.grid)
    lam, _, _ = pencil_eigh(solver.metric(result.phi.values.ravel()))
    f = result.spec.evaluate(lam)
    return float(np.abs(f * np.exp(-result.b) - np.exp(result.F.values.ravel())).max())


@dataclass(frozen=True)
class L1Report:
    """
    Attributes:
        l1_norm (float): ‖φ‖_{L¹} by grid quadrature.
        laplacian_lower_bound_margin (float): min over the grid of Σλᵢ(φ); nonnegative on admissible solutions.
    """

    l1_norm: float
    laplacian_lower_bound_margin: float

    @property
    def passed(self) -> bool:
        return self.laplacian_lower_bound_margin >= 0.0


def l1_check(result: SolveResult) -> L1Report:
    """L¹ norm of φ and the pointwise trace bound Σᵢ(λᵢ − 1) ≥ −n."""
    margin = float(result.eigenvalues.sum(axis=-1).min())
    return L1Report(l1_norm=result.phi.l1_norm, laplacian_lower_bound_margin=margin)


@dataclass(frozen=True)
class SolutionComparisonReport:
    points: int
    psd_points: int
    min_relative_margin: float

    @property
    def passed(self) -> bool:
        return self.min_relative_margin >= -1e-8


def comparison_on_solution(result: SolveResult) -> SolutionComparisonReport:
    """
    Compares the quaternionic and complex Monge-Ampère densities of ½|z|² + φ at
    every grid point where its complex Hessian is positive semidefinite.
    """
    grid = result.grid
    frame = grid.frame
    alpha = 0.5 * np.eye(2 * grid.n) + quaternionic_hessian_field(result.phi, frame).complex_hessian
    eig = np.linalg.eigvalsh(alpha)
    trace = np.abs(np.trace(alpha, axis1=-2, axis2=-1).real)
    psd = eig[:, 0] >= -1e-12 * np.maximum(trace, 1.0)
    c = volume_constant(grid.n)
    quat = c * np.linalg.det(hyperhermitian_batch(alpha[psd], frame)).real
    cplx = c * np.linalg.det(alpha[psd]).real
    margins = (quat - cplx) / np.maximum(1.0, np.abs(cplx))
    return SolutionComparisonReport(
        points=grid.size, psd_points=int(psd.sum()), min_relative_margin=float(margins.min(initial=np.inf))
    )


def qma_determinant_identity(result: SolveResult, max_points: int = 4096) -> float:
    """
    Worst relative error of Pf(Ω_φ)/Pf(Ω) = e^{n(F+b)} on up to max_points evenly strided grid points.

    Raises:
        ValueError: If the result was not produced by the quaternionic Monge-Ampère operator.
    """
    if not isinstance(result.spec, GeometricMean):
        raise ValueError("the Pfaffian identity only holds for the quaternionic Monge-Ampère operator")
    grid = result.grid
    S = grid.frame.j_conj
    stride = max(1, grid.size // max_points)
    idx = np.arange(0, grid.size, stride)
    metric = FlatSolver(result.spec, grid).metric(result.phi.values.ravel())[idx]
    base = pfaffian_matrix(S.T).real
    pf = np.array([pfaffian_matrix(S.T @ g).real for g in metric]) / base
    target = np.exp(grid.n * (result.F.values.ravel()[idx] + result.b))
    return float(np.max(np.abs(pf - target) / target))


def save_result(result: SolveResult, path: str | Path) -> Path:
    """Writes φ as a raw grid file plus a '<file>.meta.yaml' sidecar."""
    path = write_raw_grid(path, result.grid.n, result.phi.values)
    write_sidecar(
        path,
        {
            "n": result.grid.n,
            "N": result.grid.N,
            "operator": result.spec.name,
            "b": float(result.b),
            "residual_inf": float(result.residual_inf),
            "newton_iters": int(result.newton_iters),
            "min_eig_margin": float(result.min_eig_margin),
            "neg_inf_phi": float(result.neg_inf_phi),
            "pairing_gap": float(result.pairing_gap),
        },
    )
    return path


def load_field(path: str | Path) -> ScalarField:
    """Reads a raw grid file into a field on the matching torus grid."""
    n, N, values = read_raw_grid(path)
    return ScalarField(TorusGrid(n, N), values)
