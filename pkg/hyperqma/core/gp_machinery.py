"""
gp_machinery.py

Radial reenactment of the auxiliary equation argument behind the C⁰ estimate.

For a minimum point z₀ of φ and a level s the test function

    u_s(z) = φ(z) − φ(z₀) + ½|z − z₀|² − s

is negative near z₀ and positive on the sphere |z − z₀| = 2r. The masses

    A_{s,k} = ∫ τ_k(−u_s) e^{2nF}

converge to A_s = ∫_{u_s<0} (−u_s) e^{2nF} as k grows, and the solution ψ of
the complex Monge-Ampère Dirichlet problem with right hand side
τ_k(−u_s) e^{2nF} / A_{s,k} bounds −u_s from above by a power of −ψ.

Everything here lives on the radial model: functions of r2 = |z − z₀|² on
[0, (2r)²], integrated against dμ = m r2^{m−1} dr2 with m = 2n (the volume of
{r2 < S} is S^m). The Dirichlet problem is solved in its radial reduction, so
for instances built from torus solutions the product τ_k(−u_s) e^{2nF} is
averaged over spheres around z₀ before it is normalised.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from hyperqma.core.flat_solver import SolveResult, TorusGrid
from hyperqma.core.job import Job
from hyperqma.core.job_engine import JobEngine
from hyperqma.core.logger import Logger
from hyperqma.exceptions import ClaimError
from hyperqma.utils import atomic_write

logger = Logger(name="hyperqma.gp").get()


class BallModel:
    """
    Radial grid on the coordinate ball B(z₀, 2r).

    Attributes:
        n (int): Quaternionic dimension; the complex dimension is m = 2n.
        radius (float): r, at most ½.
        center (np.ndarray, optional): z₀ in real coordinates, when the ball sits on a torus.
        nodes (int): Number of radial nodes M_s.
        r2 (np.ndarray): Nodes in r2 = |z − z₀|², uniform on [0, (2r)²].
        v (np.ndarray): r2^m, the variable in which quadratures are trapezoidal.
    """

    def __init__(self, n: int, radius: float = 0.2, center: np.ndarray | None = None, nodes: int = 4097):
        if n < 1:
            raise ValueError(f"quaternionic dimension must be positive, got {n}")
        if not 0 < radius <= 0.5:
            raise ValueError(f"ball radius must lie in (0, 1/2], got {radius}")
        if nodes < 3:
            raise ValueError(f"radial grid needs at least 3 nodes, got {nodes}")
        self.n = int(n)
        self.m = 2 * self.n
        self.radius = float(radius)
        self.center = None if center is None else np.asarray(center, dtype=float)
        self.nodes = int(nodes)
        self.S = (2 * self.radius) ** 2
        self.r2 = np.linspace(0.0, self.S, self.nodes)
        self.v = self.r2**self.m

    def __repr__(self):
        return f"BallModel(n={self.n}, radius={self.radius}, nodes={self.nodes})"

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights in v, so that Σ w f = ∫ f dμ."""
        dv = np.diff(self.v)
        w = np.zeros_like(self.v)
        w[:-1] += dv / 2
        w[1:] += dv / 2
        return w

    def integrate(self, values: np.ndarray) -> float:
        """∫ f dμ over the ball."""
        return float(trapezoid(values, x=self.v))

    def cumulative(self, values: np.ndarray) -> np.ndarray:
        """∫_{r2' < r2} f dμ at every node."""
        return cumulative_trapezoid(values, x=self.v, initial=0.0)


class TauFamily:
    """τ_k(x) = (x + √(x² + k⁻²)) / 2: smooth, positive, decreasing in k towards max(x, 0)."""

    def __init__(self, k: float):
        if k < 1:
            raise ValueError(f"smoothing index must be at least 1, got {k}")
        self.k = float(k)

    def __repr__(self):
        return f"TauFamily(k={self.k:g})"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return tau(self.k, x)


def tau(k: float, x: np.ndarray | float) -> np.ndarray | float:
    """τ_k(x), evaluated as k⁻² / (2(√(x² + k⁻²) − x)) for x < 0 to avoid cancellation."""
    x = np.asarray(x, dtype=float)
    eps2 = 1.0 / (float(k) ** 2)
    root = np.sqrt(x * x + eps2)
    with np.errstate(divide="ignore"):
        out = np.where(x >= 0, (x + root) / 2, eps2 / (2 * (root - x)))
    return out if out.ndim else float(out)


@dataclass
class SublevelData:
    """
    u_s on an evaluation set.

    Attributes:
        s (float): Level.
        values (np.ndarray): u_s at the evaluation points.
        r2 (np.ndarray): |z − z₀|² at the same points.
        boundary_margin (float): min of u_s on the boundary shell; positive when B_s is compactly contained.
    """

    s: float
    values: np.ndarray
    r2: np.ndarray
    boundary_margin: float

    @property
    def sublevel(self) -> np.ndarray:
        return self.values < 0


def _check_level(s: float, radius: float) -> None:
    if not 0 < s < 2 * radius**2:
        raise ValueError(f"level s={s} outside (0, 2r^2) = (0, {2 * radius**2})")


def _sublevel(s, values, r2, shell) -> SublevelData:
    margin = float(values[shell].min())
    if margin <= 0:
        raise ValueError(f"u_s is not positive on the boundary (min {margin:.3e}); check z0 and the radius")
    return SublevelData(s=s, values=values, r2=r2, boundary_margin=margin)


def u_s_radial(phi_profile: np.ndarray | None, ball: BallModel, s: float) -> SublevelData:
    """
    u_s on the radial model for a radial potential sampled on ball.r2 (None means φ constant).

    Raises:
        ValueError: If s is out of range or u_s fails to be positive on the boundary.
    """
    _check_level(s, ball.radius)
    phi = np.zeros_like(ball.r2) if phi_profile is None else np.asarray(phi_profile, dtype=float)
    values = phi - phi[0] + 0.5 * ball.r2 - s
    return _sublevel(s, values, ball.r2, np.array([ball.nodes - 1]))


@dataclass
class PatchData:
    """
    Torus grid points inside B(z₀, 2r).

    Attributes:
        ball (BallModel): The ball, centered at z₀ = argmin φ.
        r2 (np.ndarray): Periodic squared distances to z₀.
        phi (np.ndarray): φ at the points.
        F (np.ndarray): F at the points.
        shell (np.ndarray): Mask of the outermost layer of points, one grid spacing thick.
        phi_min (float): φ(z₀).
    """

    ball: BallModel
    r2: np.ndarray
    phi: np.ndarray
    F: np.ndarray
    shell: np.ndarray
    phi_min: float


def extract_patch(result: SolveResult, radius: float = 0.2, nodes: int = 4097) -> PatchData:
    """Restricts a torus solution to the ball of radius 2r around its minimum point."""
    grid: TorusGrid = result.grid
    phi = result.phi.values
    index = int(np.argmin(phi))
    z0 = grid.point(index)
    ball = BallModel(grid.n, radius, z0, nodes)
    r2 = sum(d**2 for d in grid.periodic_offsets(z0))
    r2 = np.broadcast_to(r2, grid.shape).ravel()
    inside = r2 <= ball.S
    outer = (2 * radius - grid.spacing) ** 2
    return PatchData(
        ball=ball,
        r2=r2[inside],
        phi=phi.ravel()[inside],
        F=result.F.values.ravel()[inside],
        shell=r2[inside] >= outer,
        phi_min=float(phi.ravel()[index]),
    )


def u_s(patch: PatchData, s: float) -> SublevelData:
    """u_s at the patch points; raises ValueError when boundary positivity fails."""
    _check_level(s, patch.ball.radius)
    values = patch.phi - patch.phi_min + 0.5 * patch.r2 - s
    return _sublevel(s, values, patch.r2, patch.shell)


def _shells(r2: np.ndarray, ball: BallModel, bins: int):
    edges = np.linspace(0.0, ball.S, bins + 1)
    which = np.clip(np.digitize(r2, edges) - 1, 0, bins - 1)
    counts = np.bincount(which, minlength=bins)
    filled = counts > 0
    centers = np.bincount(which, weights=r2, minlength=bins)[filled] / counts[filled]
    return which, counts, filled, centers


def spherical_average(values: np.ndarray, r2: np.ndarray, ball: BallModel, bins: int = 64) -> np.ndarray:
    """
    Averages scattered samples over spherical shells and interpolates onto ball.r2.

    Shells are equal width in r2; empty shells are skipped.
    """
    which, counts, filled, centers = _shells(r2, ball, bins)
    sums = np.bincount(which, weights=values, minlength=bins)
    return np.interp(ball.r2, centers, sums[filled] / counts[filled])


def spherical_weights(r2: np.ndarray, ball: BallModel, bins: int = 64) -> np.ndarray:
    """Point weights W with Σ W f = ball.integrate(spherical_average(f, r2, ball, bins))."""
    which, counts, filled, centers = _shells(r2, ball, bins)
    shell = np.zeros(bins)
    shell[filled] = [ball.integrate(np.interp(ball.r2, centers, e)) for e in np.eye(len(centers))]
    return shell[which] / counts[which]


def mass_A(u_values: np.ndarray, F_values: np.ndarray, k: float, n: int, weights: np.ndarray) -> float:
    """A_{s,k} = ∫ τ_k(−u_s) e^{2nF} by the quadrature weights of the evaluation set."""
    return float(np.sum(weights * tau(k, -np.asarray(u_values)) * np.exp(2 * n * np.asarray(F_values))))


def mass_limit(u_values: np.ndarray, F_values: np.ndarray, n: int, weights: np.ndarray) -> float:
    """A_s = ∫_{u_s<0} (−u_s) e^{2nF}, the k → ∞ limit of A_{s,k}."""
    return float(np.sum(weights * np.maximum(-np.asarray(u_values), 0.0) * np.exp(2 * n * np.asarray(F_values))))


@dataclass
class RadialProfile:
    """
    Radial solution ψ(z) = u(|z|²) of the Dirichlet problem.

    Attributes:
        r2 (np.ndarray): Radial nodes.
        values (np.ndarray): u, zero on the boundary and nonpositive.
        derivative (np.ndarray): u'.
        mass (float): Total Monge-Ampère mass S^m u'(S)^m.
    """

    r2: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    mass: float
    m: int

    def is_plurisubharmonic(self, tol: float = 1e-12) -> bool:
        """u' ≥ 0 and (r2 u')' = u' + r2 u'' ≥ 0 on the grid."""
        scale = max(1.0, float(np.abs(self.derivative).max(initial=0.0)))
        radial = np.diff(self.r2 * self.derivative)
        return bool(self.derivative.min(initial=0.0) >= -tol * scale and radial.min(initial=0.0) >= -tol * scale)


def radial_cma_dirichlet(g: np.ndarray, ball: BallModel) -> RadialProfile:
    """
    Solves (i∂∂̄ψ)^m = g dμ in the ball, ψ = 0 on the boundary, for radial g ≥ 0.

    In the radial reduction d/dr2[r2^m u'^m] = m r2^{m−1} g, so
    u'(r2) = (r2^{−m} ∫_0^{r2} g dμ)^{1/m} with u'(0) = g(0)^{1/m}.

    Args:
        g (np.ndarray): Right hand side on ball.r2.
        ball (BallModel): Radial grid.

    Returns:
        RadialProfile: ψ, its derivative and its Monge-Ampère mass.

    Raises:
        ValueError: If g is negative, not finite or of the wrong length.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != ball.r2.shape:
        raise ValueError(f"right hand side has shape {g.shape}, radial grid {ball.r2.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("right hand side is not integrable: non-finite values")
    if g.min() < 0:
        raise ValueError(f"right hand side must be nonnegative, min {g.min():.3e}")

    m = ball.m
    cum = ball.cumulative(g)
    derivative = np.empty_like(g)
    derivative[0] = g[0] ** (1.0 / m)
    derivative[1:] = (cum[1:] / ball.v[1:]) ** (1.0 / m)
    primitive = cumulative_trapezoid(derivative, x=ball.r2, initial=0.0)
    values = primitive - primitive[-1]
    mass = float(ball.v[-1] * derivative[-1] ** m)
    return RadialProfile(r2=ball.r2, values=values, derivative=derivative, mass=mass, m=m)


@dataclass
class ClaimReport:
    """
    Attributes:
        C_empirical (float): Smallest C with −u_s ≤ (C A)^{1/(2n+1)} (−ψ)^{2n/(2n+1)} on the set.
        points (int): Number of points with u_s < 0.
        witness (int, optional): Index attaining C_empirical.
    """

    C_empirical: float
    points: int
    witness: int | None = None

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.C_empirical))


def verify_claim(u_values: np.ndarray, psi_values: np.ndarray, A_sk: float, n: int) -> ClaimReport:
    """
    Measures the constant in −u_s ≤ ε (−ψ)^{2n/(2n+1)}, ε^{2n+1} = C A_{s,k}.

    Raises:
        ValueError: If A_sk is not positive.
        ClaimError: If ψ ≥ 0 somewhere in {u_s < 0}.
    """
    if A_sk <= 0:
        raise ValueError(f"A_sk must be positive, got {A_sk}")
    u = np.asarray(u_values, dtype=float)
    psi = np.asarray(psi_values, dtype=float)
    inside = u < 0
    if not inside.any():
        return ClaimReport(C_empirical=0.0, points=0)
    if np.any(psi[inside] >= 0):
        raise ClaimError("auxiliary solution is nonnegative inside the sublevel set")
    ratio = (-u[inside]) ** (2 * n + 1) / ((-psi[inside]) ** (2 * n) * A_sk)
    best = int(np.argmax(ratio))
    witness = int(np.flatnonzero(inside)[best])
    return ClaimReport(C_empirical=float(ratio[best]), points=int(inside.sum()), witness=witness)


@dataclass
class RadialInstance:
    """
    One claim instance: u_s and F on an evaluation set inside the ball.

    For the constant model the evaluation set is ball.r2 itself. For torus
    patches it is the grid points, and the right hand side τ_k(−u_s) e^{2nF}
    is averaged over spheres before it reaches the radial Dirichlet problem.

    Attributes:
        ball (BallModel): Radial grid.
        sublevel (SublevelData): u_s at the evaluation points.
        F (np.ndarray): F at the same points.
        weights (np.ndarray): Quadrature weights of the points for ∫ · dμ.
        source (str): "constant" or "patch".
    """

    ball: BallModel
    sublevel: SublevelData
    F: np.ndarray
    weights: np.ndarray
    source: str = "constant"

    @property
    def radial(self) -> bool:
        return self.source == "constant"

    def rhs(self, k: float) -> np.ndarray:
        """τ_k(−u_s) e^{2nF} on ball.r2."""
        product = tau(k, -self.sublevel.values) * np.exp(2 * self.ball.n * self.F)
        if self.radial:
            return product
        return spherical_average(product, self.sublevel.r2, self.ball)

    def psi_at_points(self, profile: RadialProfile) -> np.ndarray:
        if self.radial:
            return profile.values
        return np.interp(self.sublevel.r2, self.ball.r2, profile.values)


def constant_instance(ball: BallModel, s: float) -> RadialInstance:
    """φ ≡ const, F ≡ 0."""
    return RadialInstance(ball, u_s_radial(None, ball, s), np.zeros_like(ball.r2), ball.weights, "constant")


def patch_instance(patch: PatchData, s: float) -> RadialInstance:
    """u_s and F at the grid points of a torus patch; the pipeline averages their product over spheres."""
    return RadialInstance(patch.ball, u_s(patch, s), patch.F, spherical_weights(patch.r2, patch.ball), "patch")


@dataclass
class ClaimRow:
    s: float
    k: float
    A_sk: float
    C_empirical: float
    min_margin: float
    mass: float = field(default=np.nan, repr=False)
    plurisubharmonic: bool = field(default=True, repr=False)
    A_s: float = field(default=np.nan, repr=False)


def claim_pipeline(instance: RadialInstance, k: float) -> ClaimRow:
    """
    Runs one (s, k) instance: A_{s,k}, the normalised radial Dirichlet solution and the claim constant.
    """
    ball = instance.ball
    u = instance.sublevel.values
    A_sk = mass_A(u, instance.F, k, ball.n, instance.weights)
    profile = radial_cma_dirichlet(instance.rhs(k) / A_sk, ball)
    report = verify_claim(u, instance.psi_at_points(profile), A_sk, ball.n)
    logger.debug(
        f"[{instance.source}] s={instance.sublevel.s:.4g} k={k:g}: A={A_sk:.6e} "
        f"C={report.C_empirical:.6e} mass={profile.mass:.10f}"
    )
    return ClaimRow(
        s=instance.sublevel.s,
        k=float(k),
        A_sk=A_sk,
        C_empirical=report.C_empirical,
        min_margin=instance.sublevel.boundary_margin,
        mass=profile.mass,
        plurisubharmonic=profile.is_plurisubharmonic(),
    )


def claim_rows_for_level(instance: RadialInstance, ks: list[float]) -> list[ClaimRow]:
    """Rows for one level, each carrying A_s, the k → ∞ limit its A_{s,k} decreases to."""
    A_s = mass_limit(instance.sublevel.values, instance.F, instance.ball.n, instance.weights)
    logger.debug(f"[{instance.source}] s={instance.sublevel.s:.4g}: A_s={A_s:.6e}")
    rows = [claim_pipeline(instance, k) for k in ks]
    for row in rows:
        row.A_s = A_s
    return rows


def claim_sweep(
    n: int,
    s_fractions: list[float],
    ks: list[float],
    radius: float = 0.2,
    nodes: int = 4097,
    result: SolveResult | None = None,
    engine=None,
) -> list[ClaimRow]:
    """
    Sweeps the claim over levels s = fraction·r² and smoothing indices k.

    Args:
        n (int): Quaternionic dimension.
        s_fractions (list[float]): Levels as multiples of r².
        ks (list[float]): Smoothing indices.
        radius (float): Ball radius r.
        nodes (int): Radial nodes.
        result (SolveResult, optional): Torus solution to patch; the constant model is used when absent.
        engine (JobEngine, optional): Executes one job per level.

    Returns:
        list[ClaimRow]: Rows ordered by level, then k.
    """
    if result is not None:
        patch = extract_patch(result, radius, nodes)
        instances = [patch_instance(patch, f * radius**2) for f in s_fractions]
    else:
        ball = BallModel(n, radius, nodes=nodes)
        instances = [constant_instance(ball, f * radius**2) for f in s_fractions]

    engine = engine or JobEngine()
    jobs = [
        Job(claim_rows_for_level, {"instance": inst, "ks": list(ks)}, name=f"claim s={inst.sublevel.s:g}")
        for inst in instances
    ]
    rows = []
    for outcome in engine.run_all(jobs):
        if outcome.error is not None:
            raise outcome.error
        rows.extend(outcome.value or [])
    return rows


CLAIM_COLUMNS = ("s", "k", "A_sk", "C_empirical", "min_margin")


def claim_csv(rows: list[ClaimRow]) -> str:
    lines = [",".join(CLAIM_COLUMNS)]
    for row in rows:
        lines.append(",".join(f"{getattr(row, c):.12e}" for c in CLAIM_COLUMNS))
    return "\n".join(lines) + "\n"


def write_claim_csv(rows: list[ClaimRow], path: str | Path) -> Path:
    return atomic_write(path, claim_csv(rows))
