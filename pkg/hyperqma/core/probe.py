"""
probe.py

Sweeps a right hand side family over concentration scales, solves each
instance and records how far below zero the normalised potential reaches.

With the entropy norm of the right hand side held fixed, −inf φ should stay
bounded as the family concentrates; in raw mode it grows with the amplitude.
Rows are solved as independent jobs and assembled in sweep order, so the CSV
is byte-identical for identical inputs whatever the worker count.
"""

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

from hyperqma.core.families import RhsFamily, norm_entropy, norm_lq
from hyperqma.core.flat_solver import SolverOptions, TorusGrid, forward_residual, solve
from hyperqma.core.job import Job
from hyperqma.core.job_engine import JobEngine
from hyperqma.core.logger import Logger
from hyperqma.core.qma_operators import OperatorSpec
from hyperqma.exceptions import SolverDivergence
from hyperqma.utils import atomic_write

__all__ = [
    "PROBE_COLUMNS",
    "ProbeReport",
    "ProbeRow",
    "norm_entropy",
    "norm_lq",
    "run_probe",
    "write_probe_csv",
    "write_probe_svg",
]

logger = Logger(name="hyperqma.probe").get()

PROBE_COLUMNS = ("family", "sigma", "N", "entropy_norm_p", "Lq_norm", "amplitude", "b", "neg_inf_phi", "residual")


@dataclass
class ProbeRow:
    """
    One converged solve of the sweep.

    Attributes:
        family (str): Family name.
        sigma (float): Concentration scale.
        N (int): Grid points per axis.
        entropy_norm_p (float): Entropy norm of e^{2nF̃} with exponent p.
        Lq_norm (float): L^q norm of e^{nF̃}.
        amplitude (float): Amplitude used after normalisation.
        b (float): Normalisation constant of the solution.
        neg_inf_phi (float): −inf φ with sup φ = 0.
        residual (float): Sup-norm residual, recomputed from the stored potential.
        runtime (float): Wall-clock seconds; logged, never written to the CSV.
    """

    family: str
    sigma: float
    N: int
    entropy_norm_p: float
    Lq_norm: float
    amplitude: float
    b: float
    neg_inf_phi: float
    residual: float
    runtime: float = 0.0


@dataclass
class ProbeReport:
    """
    Attributes:
        rows (list[ProbeRow]): Converged rows in sweep order.
        flagged (list[tuple[float, str]]): (sigma, reason) for every solve left out of rows.
        p (float): Entropy exponent of the sweep.
        mode (str): Normalisation mode of the family.
    """

    rows: list = field(default_factory=list)
    flagged: list = field(default_factory=list)
    p: float = 3.0
    mode: str = "raw"

    @property
    def converged(self) -> bool:
        return not self.flagged

    @property
    def empirical_constant(self) -> float | None:
        """Largest −inf φ over the rows; only meaningful with the entropy norm held fixed."""
        if self.mode != "fix_entropy" or not self.rows:
            return None
        return max(row.neg_inf_phi for row in self.rows)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(PROBE_COLUMNS)
        for row in self.rows:
            writer.writerow(
                [
                    row.family,
                    f"{row.sigma:.12e}",
                    row.N,
                    *(f"{getattr(row, c):.12e}" for c in PROBE_COLUMNS[3:]),
                ]
            )
        return buffer.getvalue()


def _solve_row(family: RhsFamily, spec: OperatorSpec, N: int, p: float, q: float, opts: SolverOptions) -> ProbeRow:
    grid = TorusGrid(spec.n, N)
    F, amplitude = family.generate(grid)
    result = solve(spec, F, opts)
    n = spec.n
    return ProbeRow(
        family=family.name,
        sigma=family.sigma,
        N=N,
        entropy_norm_p=norm_entropy(F, p, scale=2 * n),
        Lq_norm=norm_lq(F, q, scale=n),
        amplitude=amplitude,
        b=result.b,
        neg_inf_phi=result.neg_inf_phi,
        residual=forward_residual(result),
    )


def run_probe(
    family: RhsFamily,
    sigmas: list[float],
    spec: OperatorSpec,
    p: float = 3.0,
    q: float = 3.0,
    N: int = 16,
    opts: SolverOptions | None = None,
    engine: JobEngine | None = None,
) -> ProbeReport:
    """
    Renormalises the family at every σ, solves, and records −inf φ.

    Args:
        family (RhsFamily): Family and normalisation mode.
        sigmas (list[float]): Concentration scales, in sweep order.
        spec (OperatorSpec): Operator to solve for.
        p (float): Entropy exponent, must exceed 2n.
        q (float): Lebesgue exponent of the reported L^q norm.
        N (int): Grid points per axis.
        opts (SolverOptions, optional): Newton settings.
        engine (JobEngine, optional): Runs one job per σ.

    Returns:
        ProbeReport: Converged rows plus the σ values whose solves were flagged.

    Raises:
        ValueError: If p <= 2n or sigmas is empty.
    """
    if p <= 2 * spec.n:
        raise ValueError(f"entropy exponent must exceed 2n = {2 * spec.n}, got {p}")
    if not sigmas:
        raise ValueError("no concentration scales given")
    opts = opts or SolverOptions()
    engine = engine or JobEngine(title="probe")

    jobs = [
        Job(
            _solve_row,
            {"family": family.with_sigma(s), "spec": spec, "N": N, "p": p, "q": q, "opts": opts},
            name=f"{family.name} sigma={s:g}",
        )
        for s in sigmas
    ]
    report = ProbeReport(p=p, mode=family.mode)
    for sigma, outcome in zip(sigmas, engine.run_all(jobs)):
        if isinstance(outcome.error, SolverDivergence):
            logger.warning(f"🔴 sigma={sigma:g} flagged: {outcome.error}")
            report.flagged.append((float(sigma), str(outcome.error)))
            continue
        if outcome.error is not None:
            raise outcome.error
        if outcome.skipped:
            report.flagged.append((float(sigma), "skipped"))
            continue
        row = outcome.value
        row.runtime = outcome.runtime
        if row.residual > max(10 * opts.tol, 1e-12):
            logger.warning(f"🔴 sigma={sigma:g} flagged: forward residual {row.residual:.3e} above tolerance")
            report.flagged.append((float(sigma), f"forward residual {row.residual:.3e}"))
            continue
        logger.info(
            f"🟢 sigma={sigma:g}: -inf phi {row.neg_inf_phi:.6e}, entropy norm {row.entropy_norm_p:.6e} "
            f"({row.runtime:.1f}s)"
        )
        report.rows.append(row)

    if report.empirical_constant is not None:
        logger.info(f"Empirical constant over {len(report.rows)} row(s): {report.empirical_constant:.6e}")
    return report


def write_probe_csv(report: ProbeReport, path: str | Path) -> Path:
    return atomic_write(path, report.to_csv())


def write_probe_svg(report: ProbeReport, path: str | Path) -> Path:
    """
    Scatter of −inf φ against σ and against the entropy norm, as a deterministic SVG.
    """
    fig = Figure(figsize=(9, 4))
    ax_sigma, ax_norm = fig.subplots(1, 2)
    sigmas = [row.sigma for row in report.rows]
    norms = [row.entropy_norm_p for row in report.rows]
    depth = [row.neg_inf_phi for row in report.rows]

    ax_sigma.plot(sigmas, depth, marker="o", linestyle="-")
    ax_sigma.set_xlabel("sigma")
    ax_sigma.set_ylabel("-inf phi")
    ax_norm.scatter(norms, depth)
    ax_norm.set_xlabel(f"entropy norm (p={report.p:g})")
    ax_norm.set_ylabel("-inf phi")
    if sigmas:
        ax_sigma.set_xscale("log")
    fig.tight_layout()

    buffer = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": "hyperqma", "svg.fonttype": "path"}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return atomic_write(path, buffer.getvalue())
