# hyperqma/tests/test_cli.py

import pytest
import yaml
from typer.testing import CliRunner

from hyperqma.cli import EXIT_CHECK_FAILED, EXIT_DIVERGENCE, EXIT_OK, EXIT_USAGE, app, main
from hyperqma.exceptions import ConeError, NormalizationError, SolverDivergence

runner = CliRunner()


@pytest.fixture
def config_file(tmp_path):
    def _write(values: dict, name: str = "config.yaml") -> str:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(values, sort_keys=False))
        return str(path)

    return _write


# --- verify-inequalities ---


def test_verify_inequalities_in_dimension_one():
    result = runner.invoke(app, ["verify-inequalities", "--n", "1", "--trials", "100", "--samples", "200"])
    assert result.exit_code == EXIT_OK, result.output
    assert "100/100 lemma31, 100/100 prop32" in result.output
    assert "rng_state_sha256" in result.output


def test_verify_inequalities_in_dimension_two():
    result = runner.invoke(app, ["verify-inequalities", "--n", "2", "--trials", "1000", "--seed", "7"])
    assert result.exit_code == EXIT_OK, result.output
    assert "1000/1000 lemma31, 1000/1000 prop32" in result.output
    assert "hessian_quotient_1_0: dominates the geometric mean" in result.output
    assert "largest_eigenvalue: expected violation" in result.output
    assert "negative control" in result.output
    assert "FAIL" not in result.output


def test_missing_config_is_a_usage_error():
    result = runner.invoke(app, ["verify-inequalities", "--config", "/nonexistent/verify.yaml"])
    assert result.exit_code == EXIT_USAGE


def test_unknown_key_is_a_usage_error(tmp_path):
    path = tmp_path / "verify.yaml"
    path.write_text("n: 1\ncolour: blue\n")
    result = runner.invoke(app, ["verify-inequalities", "--config", str(path)])
    assert result.exit_code == EXIT_USAGE
    assert "line 2" in result.output


# --- solve ---


def test_solve_writes_potential_and_metadata(config_file, tmp_path):
    output = tmp_path / "phi.grid"
    path = config_file({"n": 1, "N": 8, "family": "cosine", "amplitude": 0.1, "output": str(output)})
    result = runner.invoke(app, ["solve", "--config", path])
    assert result.exit_code == EXIT_OK, result.output
    assert output.exists()
    assert (tmp_path / "phi.rhs.grid").exists()
    meta = yaml.safe_load((tmp_path / "phi.grid.meta.yaml").read_text())
    assert meta["operator"] == "qma"
    assert meta["residual_inf"] <= 1e-8
    assert "forward mismatch" in result.output


def test_solve_divergence_exits_with_three(config_file, tmp_path, mocker):
    mocker.patch("hyperqma.cli.solve", side_effect=SolverDivergence("stalled", 0.5, 30))
    path = config_file({"n": 1, "N": 8, "output": str(tmp_path / "phi.grid")})
    result = runner.invoke(app, ["solve", "--config", path])
    assert result.exit_code == EXIT_DIVERGENCE


def test_solve_reads_assignment_lines(tmp_path):
    output = tmp_path / "phi.grid"
    path = tmp_path / "solve.cfg"
    path.write_text(f"# cosine instance\nn = 1\nN = 8\nfamily = cosine\namplitude = 0.1\noutput = {output}\n")
    result = runner.invoke(app, ["solve", "--config", str(path)])
    assert result.exit_code == EXIT_OK, result.output
    assert output.exists()


def test_solve_cone_failure_exits_with_three(config_file, tmp_path, mocker):
    mocker.patch("hyperqma.cli.solve", side_effect=ConeError("qma: eigenvalues [-0.1] lie outside the cone"))
    path = config_file({"n": 1, "N": 8, "output": str(tmp_path / "phi.grid")})
    result = runner.invoke(app, ["solve", "--config", path])
    assert result.exit_code == EXIT_DIVERGENCE
    assert "Numerical failure" in result.output


def test_solve_normalisation_failure_exits_with_one(config_file, tmp_path):
    path = config_file(
        {
            "n": 1,
            "N": 8,
            "family": "gaussian_bump",
            "mode": "fix_lq",
            "target": 0.5,
            "output": str(tmp_path / "phi.grid"),
        }
    )
    result = runner.invoke(app, ["solve", "--config", path])
    assert result.exit_code == EXIT_CHECK_FAILED


def test_solve_rejects_unknown_operator(config_file, tmp_path):
    path = config_file({"n": 1, "N": 8, "operator": "monge", "output": str(tmp_path / "phi.grid")})
    result = runner.invoke(app, ["solve", "--config", path])
    assert result.exit_code == EXIT_USAGE


# --- probe ---


def probe_config(tmp_path) -> dict:
    return {
        "n": 1,
        "N": 8,
        "family": "constant",
        "amplitude": 0.0,
        "mode": "fix_lq",
        "target": 1.0,
        "sigmas": [0.4, 0.2],
        "output_csv": str(tmp_path / "probe.csv"),
        "output_svg": str(tmp_path / "probe.svg"),
    }


def test_probe_writes_csv_and_svg(config_file, tmp_path):
    result = runner.invoke(app, ["probe", "--config", config_file(probe_config(tmp_path))])
    assert result.exit_code == EXIT_OK, result.output
    lines = (tmp_path / "probe.csv").read_text().splitlines()
    assert lines[0].startswith("family,sigma,N")
    assert len(lines) == 3
    assert (tmp_path / "probe.svg").stat().st_size > 0


def test_probe_without_converged_rows_exits_with_three(config_file, tmp_path, mocker):
    mocker.patch("hyperqma.core.probe.solve", side_effect=SolverDivergence("stalled", 0.5, 30))
    result = runner.invoke(app, ["probe", "--config", config_file(probe_config(tmp_path))])
    assert result.exit_code == EXIT_DIVERGENCE
    assert "FLAGGED" in result.output


def test_probe_normalisation_failure(config_file, tmp_path, mocker):
    mocker.patch("hyperqma.cli.run_probe", side_effect=NormalizationError("could not bracket"))
    result = runner.invoke(app, ["probe", "--config", config_file(probe_config(tmp_path))])
    assert result.exit_code == EXIT_CHECK_FAILED


# --- gp-claim ---


def test_gp_claim_on_constant_model(config_file, tmp_path):
    output = tmp_path / "claim.csv"
    path = config_file({"s_fractions": [0.5], "ks": [10], "nodes": 1025, "output": str(output)})
    result = runner.invoke(app, ["gp-claim", "--config", path])
    assert result.exit_code == EXIT_OK, result.output
    assert "1 claim instance(s): finite=True plurisubharmonic=True" in result.output
    assert output.read_text().splitlines()[0] == "s,k,A_sk,C_empirical,min_margin"


def test_gp_claim_rejects_unknown_source(config_file, tmp_path):
    path = config_file({"source": "sphere", "output": str(tmp_path / "claim.csv")})
    result = runner.invoke(app, ["gp-claim", "--config", path])
    assert result.exit_code == EXIT_USAGE
    assert "source" in result.output


# --- selftest and main ---


def test_selftest_passes():
    result = runner.invoke(app, ["selftest"])
    assert result.exit_code == EXIT_OK, result.output
    assert "frame identities: ok" in result.output
    assert "FAIL" not in result.output


def test_main_returns_exit_codes():
    assert main(["verify-inequalities", "--n", "1", "--trials", "20", "--samples", "50"]) == EXIT_OK
    assert main(["solve", "--config", "/nonexistent/solve.yaml"]) == EXIT_USAGE
    assert main(["no-such-command"]) == EXIT_USAGE
