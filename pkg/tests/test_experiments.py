import csv
import math

import numpy as np
import pytest

from kerrcat import InvalidParameter, OracleMismatch
from kerrcat.closed_forms import sm_first_moment
from kerrcat.experiments import (
    ContrastParams,
    Fig1Params,
    SweepParams,
    ValidationParams,
    assert_strictly_decreasing,
    default_dim,
    format_value,
    params_from_entries,
    read_manifest,
    run_chi_sweep,
    run_damping_contrast,
    run_fig1,
    run_from_manifest,
    run_moment_validation,
    write_manifest,
)

PI = math.pi


def test_default_dims_follow_truncation_rule_with_margin():
    assert default_dim(1.0) == 32
    assert default_dim(4.0) == 64
    assert default_dim(9.0) == 64
    assert default_dim(25.0) == 128


def test_format_value_round_trips():
    for v in (0.1, 1 / 3, math.pi, 1e-300, -2.5e17):
        assert float(format_value(v)) == v
    assert format_value(3) == "3"
    assert format_value(True) == "true"


def test_manifest_round_trip(tmp_path):
    p = Fig1Params(chi=0.25, alpha0_sq=(2.0, 0.5), dims=(48, 32), samples=7)
    write_manifest(tmp_path / "m.manifest", {"experiment": "fig1", **{f"param.{k}": v for k, v in vars(p).items()}})
    entries = read_manifest(tmp_path / "m.manifest")
    assert params_from_entries(Fig1Params, entries) == p
    (tmp_path / "bad.manifest").write_text("no equals sign here\n")
    with pytest.raises(InvalidParameter):
        read_manifest(tmp_path / "bad.manifest")


def test_default_manifests_carry_paper_parameters(tmp_path):
    res = run_chi_sweep(SweepParams(chis=(0.3,), dim=32, alpha0_sq=1.0, wigner_resolution=21), out_dir=tmp_path)
    text = (tmp_path / "chi_sweep.manifest").read_text()
    assert "param.chis = 0.3\n" in text
    assert "param.alpha0_sq = 1.0\n" in text
    assert "alpha0_phase = 0.0" in text
    assert "x2_tilde_convention = theta(tau) = arg(alpha0) + chi*tau + pi/2" in text
    assert "variance_convention = vacuum quadrature variance 1/4" in text
    for key in ("tolerance.trace", "tolerance.truncation_leak", "code_version", "csv"):
        assert key in read_manifest(tmp_path / "chi_sweep.manifest")
    assert res.paths["csv"].exists()
    fig1 = Fig1Params()
    assert fig1.chi == 0.3 and fig1.alpha0_sq == (4.0, 1.0) and fig1.dims == (64, 32) and fig1.samples == 601
    assert SweepParams().chis == (0.1, 0.2, 0.3, 0.5, 1.0)
    assert ContrastParams().alpha0_sq == (1.0, 4.0, 9.0)
    assert ValidationParams().chis == (0.1, 0.3)


def test_param_validation():
    with pytest.raises(InvalidParameter):
        run_fig1(Fig1Params(alpha0_sq=(4.0,), dims=(64, 32)))
    with pytest.raises(InvalidParameter):
        run_fig1(Fig1Params(dt_safety=1.5))
    with pytest.raises(InvalidParameter):
        run_chi_sweep(SweepParams(chis=(0.3, 0.1)))
    with pytest.raises(InvalidParameter):
        run_chi_sweep(SweepParams(chis=(0.0, 0.1)))
    with pytest.raises(InvalidParameter):
        run_damping_contrast(ContrastParams(gamma=-0.1))
    with pytest.raises(InvalidParameter):
        run_moment_validation(ValidationParams(alpha0_sq=(-1.0,)))


@pytest.mark.slow
def test_fig1_rows(fig1_dir):
    out, res = fig1_dir
    assert res.columns == ["alpha0_sq", "chi_tau", "var_x2_tilde", "abs_mean_a", "ys_fidelity", "negativity_volume"]
    assert len(res.rows) == 2 * 601
    a2 = res.column("alpha0_sq")
    ct = res.column("chi_tau")
    var = res.column("var_x2_tilde")
    am = res.column("abs_mean_a")
    ys = res.column("ys_fidelity")
    for a in (4.0, 1.0):
        sel = a2 == a
        assert ct[sel][0] == 0.0
        assert ct[sel][-1] == pytest.approx(3 * PI)
        assert var[sel][0] == pytest.approx(0.25, abs=1e-10)
        # samples every 3 pi / 600, so chi tau = pi is index 200
        assert ct[sel][200] == pytest.approx(PI)
        assert am[sel][200] == pytest.approx(math.sqrt(a) * math.exp(-0.3 * PI), abs=1e-6)
        assert ys[sel][100] > ys[sel][300]
    assert var[a2 == 4.0][100] == pytest.approx(2.5536716039612974, abs=1e-6)
    assert ys[a2 == 4.0][100] == pytest.approx(0.34660874140796005, abs=1e-6)
    assert res.max_sanity_defect <= 1e-8


@pytest.mark.slow
def test_fig1_files(fig1_dir):
    out, res = fig1_dir
    assert sorted(p.name for p in out.iterdir()) == ["fig1.csv", "fig1.gp", "fig1.manifest"]
    with open(out / "fig1.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == res.columns
    assert len(rows) == 1 + len(res.rows)
    assert float(rows[5][2]) == res.rows[4][2]
    assert "'fig1.csv'" in (out / "fig1.gp").read_text()
    entries = read_manifest(out / "fig1.manifest")
    assert entries["param.chi"] == "0.3"
    assert entries["param.alpha0_sq"] == "4.0, 1.0"
    assert entries["model"] == "kerr_dephasing"


def test_single_chi_sweep():
    res = run_chi_sweep(SweepParams(chis=(0.5,), alpha0_sq=1.0, wigner_resolution=51))
    assert len(res.rows) == 1
    assert res.column("dim")[0] == 32
    assert res.column("envelope")[0] == pytest.approx(math.exp(-0.25 * PI))
    assert 0 < res.column("ys_fidelity")[0] < 1


def test_sweep_parallel_matches_serial():
    p = SweepParams(chis=(0.5, 1.0), alpha0_sq=1.0, wigner_resolution=31)
    assert run_chi_sweep(p, jobs=2).csv_text() == run_chi_sweep(p, jobs=1).csv_text()


def test_contrast_without_damping_is_pure_kerr():
    res = run_damping_contrast(ContrastParams(gamma=0.0, alpha0_sq=(1.0, 2.0)))
    models = list(res.column("model"))
    assert models == ["kerr_dephasing", "kerr_dephasing", "kerr_damping", "kerr_damping"]
    ratios = res.column("ratio")
    assert np.all(np.abs(ratios[2:] - 1.0) <= 1e-8)
    assert np.all(np.abs(ratios[:2] - math.exp(-0.3 * PI)) <= 1e-8)


def test_moment_validation_small(tmp_path):
    p = ValidationParams(chis=(0.3,), alpha0_sq=(1.0,), samples=21, chi_tau_end=PI)
    res = run_moment_validation(p, out_dir=tmp_path)
    assert res.column("deviation").max() <= 1e-6
    assert res.column("sm_re")[0] == 1.0 and res.column("sm_im")[0] == 0.0
    sm = res.column("sm_re") + 1j * res.column("sm_im")
    tau = res.column("chi_tau") / 0.3
    assert np.all(np.abs(sm) <= np.exp(-0.09 * tau) + 1e-14)
    assert sm[-1] == pytest.approx(sm_first_moment(1.0, 0.3, PI / 0.3).value, abs=1e-13)
    assert float(read_manifest(tmp_path / "moment_validation.manifest")["max_deviation"]) <= 1e-6


def test_moment_validation_reports_mismatch(tmp_path):
    p = ValidationParams(chis=(0.3,), alpha0_sq=(1.0,), samples=5, chi_tau_end=PI, tolerance=1e-18)
    with pytest.raises(OracleMismatch):
        run_moment_validation(p, out_dir=tmp_path)
    assert (tmp_path / "moment_validation.csv").exists()


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    p = ValidationParams(chis=(0.5,), alpha0_sq=(1.0,), samples=9, chi_tau_end=PI / 2)
    run_moment_validation(p, out_dir=tmp_path / "a")
    run_from_manifest(tmp_path / "a" / "moment_validation.manifest", out_dir=tmp_path / "b")
    assert (tmp_path / "a" / "moment_validation.csv").read_bytes() == (tmp_path / "b" / "moment_validation.csv").read_bytes()
    (tmp_path / "x.manifest").write_text("experiment = nonsense\n")
    with pytest.raises(InvalidParameter):
        run_from_manifest(tmp_path / "x.manifest")


def test_assert_strictly_decreasing():
    assert_strictly_decreasing([3, 2, 1])
    assert_strictly_decreasing([1])
    with pytest.raises(AssertionError):
        assert_strictly_decreasing([3, 3, 1])
