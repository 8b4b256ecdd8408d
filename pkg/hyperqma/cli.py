# hyperqma/cli.py

import importlib
import logging
import math
from contextlib import contextmanager
from pathlib import Path
from types import ModuleType
from typing import Optional

import typer

from hyperqma.core.config import LabConfig
from hyperqma.core.flat_solver import (
    TorusGrid,
    forward_mismatch,
    l1_check,
    load_field,
    save_result,
    solve,
    solve_continuation,
)
from hyperqma.core.gp_machinery import claim_sweep, write_claim_csv
from hyperqma.core.job_engine import JobEngine
from hyperqma.core.logger import Logger, set_default_level, set_log_file
from hyperqma.core.probe import run_probe, write_probe_csv, write_probe_svg
from hyperqma.core.suites import run_selftest, verify_inequalities
from hyperqma.exceptions import (
    ClaimError,
    ConeError,
    ConfigError,
    NormalizationError,
    PairingError,
    PositivityError,
    SolverDivergence,
)
from hyperqma.utils import write_raw_grid

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3

# --- Typer App Initialization ---
app = typer.Typer(help="hyperqma: numerical lab for quaternionic Monge-Ampère type equations on flat tori.")

log = Logger(name="hyperqma.cli").get()


@app.callback()
def configure(
    verbose: bool = typer.Option(False, "--verbose", "-v", is_flag=True, help="Enable verbose logging (DEBUG level)."),
    log_file: Optional[Path] = typer.Option(None, "--log-file", dir_okay=False, help="Also write logs to this file."),
):
    if log_file is not None:
        set_log_file(str(log_file))
    if verbose:
        set_default_level(logging.DEBUG)
        log.debug("Verbose logging enabled.")


@contextmanager
def _exit_codes():
    """Maps package exceptions onto the documented exit codes."""
    try:
        yield
    except SolverDivergence as e:
        typer.secho(f"Solver did not converge: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_DIVERGENCE)
    except (ConeError, PairingError, PositivityError) as e:
        typer.secho(f"Numerical failure: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_DIVERGENCE)
    except (NormalizationError, ClaimError) as e:
        typer.secho(f"Check failed: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_CHECK_FAILED)
    except (ConfigError, FileNotFoundError, ValueError) as e:
        typer.secho(f"Error: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_USAGE)


def _load(command: str, config: Optional[Path], overrides: Optional[dict] = None) -> LabConfig:
    cfg = LabConfig(command, None if config is None else str(config), overrides)
    typer.echo(cfg.render().rstrip())
    return cfg


def _finish(passed: bool, message: str) -> None:
    if passed:
        typer.secho(message, fg=typer.colors.GREEN)
        return
    typer.secho(message, fg=typer.colors.RED, err=True)
    raise typer.Exit(code=EXIT_CHECK_FAILED)


def _config_option():
    return typer.Option(
        None, "--config", "-c", dir_okay=False, help="Path to the configuration file (key = value lines)."
    )


@app.command(name="verify-inequalities", help="Randomized comparison, structural and Pfaffian suites.")
def verify_inequalities_command(
    n: Optional[int] = typer.Option(None, "--n", help="Quaternionic dimension."),
    trials: Optional[int] = typer.Option(None, "--trials", help="Random forms per comparison suite."),
    samples: Optional[int] = typer.Option(None, "--samples", help="Cone samples per structural check."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed of the random generator."),
    config: Optional[Path] = _config_option(),
):
    with _exit_codes():
        cfg = _load("verify-inequalities", config, {"n": n, "trials": trials, "samples": samples, "seed": seed})
        report = verify_inequalities(cfg.n, cfg["trials"], cfg.seed, cfg["samples"])
    for line in report.lines()[1:]:
        typer.echo(line)
    _finish(report.passed, report.summary())


@app.command(name="solve", help="Solve one instance from a configuration file and write φ with its metadata.")
def solve_command(config: Optional[Path] = _config_option()):
    with _exit_codes():
        cfg = _load("solve", config)
        spec = cfg.operator()
        grid = TorusGrid(cfg.n, cfg["N"])
        if cfg["rhs_file"]:
            F = load_field(cfg["rhs_file"])
            if F.grid != grid:
                raise ConfigError(f"rhs_file holds {F.grid}, configuration asks for {grid}")
        else:
            F, amplitude = cfg.family().generate(grid)
            log.info(f"Right hand side '{cfg['family']}' at amplitude {amplitude:.9g}")

        opts = cfg.solver_options()
        if cfg["continuation"]:
            result = solve_continuation(spec, F, cfg["continuation"], opts)[-1]
        else:
            result = solve(spec, F, opts)

        output = save_result(result, cfg["output"])
        write_raw_grid(output.with_suffix(".rhs.grid"), grid.n, result.F.values)
        mismatch = forward_mismatch(result)
        l1 = l1_check(result)

    typer.echo(f"Wrote {output} and {output.with_suffix('.rhs.grid')}")
    typer.echo(
        f"newton_iters={result.newton_iters} residual={result.residual_inf:.3e} b={result.b:+.9e} "
        f"-inf_phi={result.neg_inf_phi:.9e} min_eig_margin={result.min_eig_margin:.3e} "
        f"pairing_gap={result.pairing_gap:.1e} l1={l1.l1_norm:.6e}"
    )
    passed = result.phi.sup == 0.0 and l1.passed and mismatch <= 1e-7
    _finish(passed, f"forward mismatch {mismatch:.3e}")


@app.command(name="probe", help="Sweep a right hand side family over concentration scales.")
def probe_command(config: Optional[Path] = _config_option()):
    with _exit_codes():
        cfg = _load("probe", config)
        engine = JobEngine(workers=cfg["workers"], title="probe")
        report = run_probe(
            cfg.family(),
            cfg["sigmas"],
            cfg.operator(),
            p=cfg["p"],
            q=cfg["q"],
            N=cfg["N"],
            opts=cfg.solver_options(),
            engine=engine,
        )
        write_probe_csv(report, cfg["output_csv"])
        write_probe_svg(report, cfg["output_svg"])

    typer.echo(report.to_csv().rstrip())
    typer.echo(f"Wrote {cfg['output_csv']} and {cfg['output_svg']}")
    if report.empirical_constant is not None:
        typer.echo(f"empirical C = {report.empirical_constant:.9e}")
    for sigma, reason in report.flagged:
        typer.secho(f"[FLAGGED] sigma={sigma:g}: {reason}", fg=typer.colors.YELLOW, err=True)
    if not report.rows:
        typer.secho("No solve converged.", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_DIVERGENCE)


@app.command(name="gp-claim", help="Sweep the auxiliary claim over levels and smoothing indices.")
def gp_claim_command(config: Optional[Path] = _config_option()):
    with _exit_codes():
        cfg = _load("gp-claim", config)
        source = cfg["source"]
        if source not in ("constant", "patch"):
            raise ConfigError(f"source must be 'constant' or 'patch', got '{source}'")
        result = None
        if source == "patch":
            grid = TorusGrid(cfg.n, cfg["N"])
            F, _ = cfg.family().generate(grid)
            result = solve(cfg.operator(), F, cfg.solver_options())
        rows = claim_sweep(
            cfg.n,
            cfg["s_fractions"],
            cfg["ks"],
            radius=cfg["radius"],
            nodes=cfg["nodes"],
            result=result,
            engine=JobEngine(workers=cfg["workers"], title="gp-claim"),
        )
        path = write_claim_csv(rows, cfg["output"])

    for row in rows:
        typer.echo(f"s={row.s:.6g} k={row.k:g} A={row.A_sk:.9e} C={row.C_empirical:.9e} mass={row.mass:.10f}")
    typer.echo(f"Wrote {path}")
    finite = all(math.isfinite(row.C_empirical) for row in rows)
    psh = all(row.plurisubharmonic for row in rows)
    _finish(finite and psh, f"{len(rows)} claim instance(s): finite={finite} plurisubharmonic={psh}")


@app.command(name="selftest", help="Run every closed-form and oracle example check.")
def selftest_command(
    full: bool = typer.Option(False, "--full", is_flag=True, help="Include the N=16 solver run."),
):
    results = run_selftest(full=full)
    for result in results:
        mark = "ok" if result.passed else f"FAIL {result.detail}".rstrip()
        typer.echo(f"{result.name}: {mark}")
    passed = sum(r.passed for r in results)
    _finish(passed == len(results), f"{passed}/{len(results)} selftest")


def _click_exceptions(command) -> ModuleType:
    """The exceptions module of the click build the typer command is made of."""
    base = next(cls for cls in type(command).__mro__ if not cls.__module__.startswith("typer.core"))
    return importlib.import_module(base.__module__.rpartition(".")[0] + ".exceptions")


def main(argv: Optional[list[str]] = None) -> int:
    """
    Runs the CLI without exiting the interpreter.

    Returns:
        int: 0 pass, 1 failed check, 2 usage or configuration error, 3 solver non-convergence.
    """
    command = typer.main.get_command(app)
    errors = _click_exceptions(command)
    try:
        rv = command.main(args=argv, prog_name="hyperqma", standalone_mode=False)
    except errors.ClickException as e:
        e.show()
        return EXIT_USAGE
    except errors.Abort:
        return EXIT_CHECK_FAILED
    return rv if isinstance(rv, int) else EXIT_OK


# --- Entry point for running the Typer app ---
if __name__ == "__main__":
    app()
