# hyperqma/tests/test_probe.py

import numpy as np
import pytest

from hyperqma.core import probe
from hyperqma.core.families import RhsFamily
from hyperqma.core.job_engine import JobEngine
from hyperqma.core.probe import PROBE_COLUMNS, ProbeReport, ProbeRow, run_probe, write_probe_csv, write_probe_svg
from hyperqma.core.qma_operators import qma_operator
from hyperqma.exceptions import SolverDivergence

# --- Fixtures ---


@pytest.fixture(scope="module")
def constant_report():
    family = RhsFamily("constant", amplitude=0.0, mode="fix_lq", target=1.0)
    return run_probe(family, [0.4, 0.2], qma_operator(1), N=8)


def row(sigma: float, depth: float) -> ProbeRow:
    return ProbeRow("gaussian_bump", sigma, 8, 0.5, 1.1, 1.0, 0.0, depth, 1e-12)


# --- Sweeps ---


def test_constant_family_has_flat_solutions(constant_report):
    assert constant_report.converged
    assert [r.sigma for r in constant_report.rows] == [0.4, 0.2]
    assert all(r.neg_inf_phi == 0.0 for r in constant_report.rows)
    assert all(r.N == 8 for r in constant_report.rows)
    assert constant_report.empirical_constant is None


def test_entropy_exponent_must_exceed_twice_the_dimension():
    with pytest.raises(ValueError, match="must exceed 2n"):
        run_probe(RhsFamily("cosine"), [0.2], qma_operator(1), p=2.0, N=8)


def test_sweep_needs_scales():
    with pytest.raises(ValueError, match="no concentration scales"):
        run_probe(RhsFamily("cosine"), [], qma_operator(1), N=8)


def test_divergent_solves_are_flagged(mocker):
    mocker.patch("hyperqma.core.probe.solve", side_effect=SolverDivergence("stalled", 1.0, 3))
    warning = mocker.patch.object(probe.logger, "warning")
    report = run_probe(RhsFamily("cosine", amplitude=0.1), [0.4, 0.2], qma_operator(1), N=8)
    assert report.rows == []
    assert [sigma for sigma, _ in report.flagged] == [0.4, 0.2]
    assert "stalled" in report.flagged[0][1]
    assert not report.converged
    assert warning.call_count == 2


def test_dry_run_rows_are_flagged():
    report = run_probe(RhsFamily("cosine"), [0.2], qma_operator(1), N=8, engine=JobEngine(dry_run=True))
    assert report.rows == []
    assert report.flagged == [(0.2, "skipped")]


def test_raw_depth_grows_with_amplitude():
    depths = []
    for amplitude in (0.05, 0.1):
        report = run_probe(RhsFamily("cosine", amplitude=amplitude), [0.2], qma_operator(1), N=8)
        assert report.converged
        depths.append(report.rows[0].neg_inf_phi)
    assert 0 < depths[0] < depths[1]


def test_empirical_constant_needs_fixed_entropy():
    rows = [row(0.4, 0.02), row(0.2, 0.05), row(0.1, 0.03)]
    assert ProbeReport(rows=rows, mode="fix_entropy").empirical_constant == 0.05
    assert ProbeReport(rows=rows, mode="raw").empirical_constant is None
    assert ProbeReport(mode="fix_entropy").empirical_constant is None


# --- Output files ---


def test_csv_layout(constant_report):
    lines = constant_report.to_csv().splitlines()
    assert lines[0] == ",".join(PROBE_COLUMNS)
    assert "runtime" not in lines[0]
    assert len(lines) == 3
    fields = lines[1].split(",")
    assert fields[0] == "constant"
    assert fields[1] == "4.000000000000e-01"
    assert fields[2] == "8"


def test_csv_is_deterministic(constant_report, tmp_path):
    family = RhsFamily("constant", amplitude=0.0, mode="fix_lq", target=1.0)
    again = run_probe(family, [0.4, 0.2], qma_operator(1), N=8)
    first = write_probe_csv(constant_report, tmp_path / "a.csv").read_bytes()
    second = write_probe_csv(again, tmp_path / "b.csv").read_bytes()
    assert first == second


def test_svg_is_byte_identical(tmp_path):
    report = ProbeReport(rows=[row(0.4, 0.02), row(0.2, 0.05)], mode="fix_entropy")
    first = write_probe_svg(report, tmp_path / "a.svg").read_bytes()
    second = write_probe_svg(report, tmp_path / "b.svg").read_bytes()
    assert first.lstrip().startswith(b"<?xml")
    assert first == second


def test_svg_of_empty_report(tmp_path):
    path = write_probe_svg(ProbeReport(), tmp_path / "empty.svg")
    assert path.stat().st_size > 0


# --- Acceptance runs ---


@pytest.mark.slow
def test_fixed_entropy_depth_stays_bounded():
    family = RhsFamily("gaussian_bump", mode="fix_entropy", target=0.5)
    report = run_probe(family, [0.4, 0.2, 0.1], qma_operator(1), N=16)
    assert report.converged
    depths = np.array([r.neg_inf_phi for r in report.rows])
    assert np.all(depths > 0)
    assert depths.max() / depths.min() < 3
    assert all(r.entropy_norm_p == pytest.approx(0.5, rel=1e-6) for r in report.rows)
    assert report.empirical_constant == depths.max()
