import shutil

import numpy as np
import pytest

from rotphase import __version__
from rotphase.cli import main
from rotphase.config import bundled_config_path
from rotphase.datasets import read_csv_columns
from rotphase.runner import read_manifest

ECHO = """
[rig]
theta_nv_deg = 54.7
phi_cal_deg = 228.5
[experiment]
kind = fringe-scan
theta_mw_list_deg = 40, 60
phi_start_deg = 160
b_points = 11
trials = {trials}
shared_f0 = true
float_contrast = {floating}
pulse_mode = {mode}
{extra}
[output]
figures = false
"""


def write_cfg(tmp_path, name="run.cfg", trials=0, mode="instantaneous", extra="", floating="false"):
    path = tmp_path / name
    path.write_text(ECHO.format(trials=trials, mode=mode, extra=extra, floating=floating))
    return path


def simulate(cfg, out, *flags):
    return main(["simulate", str(cfg), "--out-dir", str(out), *flags])


def test_malformed_config_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[rig]\ntheta_mw_deg = 200\n[experiment]\nkind = spin-echo\n")
    assert simulate(bad, tmp_path / "o") == 1
    assert "theta_mw" in capsys.readouterr().err


def test_degenerate_drive_exits_2(tmp_path, capsys):
    cfg = tmp_path / "deg.cfg"
    cfg.write_text("[rig]\ntheta_mw_deg = 54.7\n[experiment]\nkind = phase-trace\n[output]\nfigures = false\n")
    assert simulate(cfg, tmp_path / "o") == 2
    assert "DegenerateDrive" in capsys.readouterr().err


def test_fit_failure_exits_3(tmp_path):
    data = tmp_path / "short.csv"
    data.write_text("b_x_tesla,population,sigma\n0,1,\n1e-9,0.99,\n2e-9,0.98,\n")
    assert main(["fit", str(data), "--f0-init", "8e4", "--out-dir", str(tmp_path / "o")]) == 3


def test_manifest_contents(tmp_path):
    cfg = write_cfg(tmp_path)
    assert simulate(cfg, tmp_path / "a", "--seed", "9") == 0
    run, outputs = read_manifest(tmp_path / "a")
    assert run["kind"] == "fringe-scan"
    assert run["toolkit_version"] == __version__
    assert run["seed"] == "9"
    assert len(run["config_hash"]) == 40
    names = {p.name for p in outputs}
    assert {"fringe_mw40.csv", "fringe_mw60.csv", "fit_mw40.txt", "fringe_summary.csv"} <= names
    assert all(p.exists() for p in outputs)
    summary = read_csv_columns(tmp_path / "a" / "fringe_summary.csv")
    assert np.allclose(summary["delta_phi_rad"], summary["delta_phi_model_rad"], atol=1e-6)


def test_deterministic_outputs(tmp_path):
    cfg = write_cfg(tmp_path, trials=1000, floating="true")
    assert simulate(cfg, tmp_path / "a", "--seed", "4") == 0
    assert simulate(cfg, tmp_path / "b", "--seed", "4", "--threads", "2") == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == 0


def test_compare_detects_seed_difference_only_with_noise(tmp_path):
    noisy = write_cfg(tmp_path, trials=1000, floating="true")
    simulate(noisy, tmp_path / "n1", "--seed", "1")
    simulate(noisy, tmp_path / "n2", "--seed", "2")
    assert main(["compare", str(tmp_path / "n1"), str(tmp_path / "n2")]) == 1
    clean = write_cfg(tmp_path, name="clean.cfg")
    simulate(clean, tmp_path / "c1", "--seed", "1")
    simulate(clean, tmp_path / "c2", "--seed", "2")
    assert main(["compare", str(tmp_path / "c1"), str(tmp_path / "c2"), "--tol", "0"]) == 0


def test_compare_dt_halving_within_integrator_tolerance(tmp_path):
    # brackets the default free-evolution step (about 2.3e-8 s here)
    coarse = write_cfg(tmp_path, name="coarse.cfg", extra="dt_max_s = 4e-8")
    fine = write_cfg(tmp_path, name="fine.cfg", extra="dt_max_s = 2e-8")
    assert simulate(coarse, tmp_path / "coarse") == 0
    assert simulate(fine, tmp_path / "fine") == 0
    assert main(["compare", str(tmp_path / "coarse"), str(tmp_path / "fine"), "--tol", "1e-6"]) == 0


def test_compare_missing_output(tmp_path):
    cfg = write_cfg(tmp_path)
    simulate(cfg, tmp_path / "a")
    shutil.copytree(tmp_path / "a", tmp_path / "b")
    (tmp_path / "b" / "fringe_mw40.csv").unlink()
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == 2
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "nowhere")]) == 2


def test_fit_subcommand(tmp_path):
    cfg = write_cfg(tmp_path)
    simulate(cfg, tmp_path / "a")
    files = [str(tmp_path / "a" / f"fringe_mw{t}.csv") for t in (40, 60)]
    assert main(["fit", *files, "--shared-f0", "--out-dir", str(tmp_path / "fit")]) == 0
    fitted = read_csv_columns(tmp_path / "fit" / "fit_summary.csv")
    reference = read_csv_columns(tmp_path / "a" / "fringe_summary.csv")
    # without an f0 hint the fit picks the positive-frequency convention: phases agree mod pi up to sign
    assert np.allclose(np.abs(fitted["f0_per_tesla"]), np.abs(reference["f0_per_tesla"]), rtol=1e-6)
    assert (tmp_path / "fit" / "fit_fringe_mw40.txt").exists()


def test_bundled_rabi_config(tmp_path):
    out = tmp_path / "fig2"
    assert main(["simulate", "fig2_rabi.cfg", "--out-dir", str(out)]) == 0
    rows = read_csv_columns(out / "rabi_scan.csv")
    assert set(rows["theta_mw_deg"]) == {28.0, 45.0, 67.0}
    assert np.allclose(rows["rabi_hz"], rows["model_hz"], rtol=5e-3)
    model = read_csv_columns(out / "rabi_model.csv")
    assert np.all(model["model_normalized"] <= 1 + 1e-12)
    assert (out / "fig2_rabi.png").stat().st_size > 0


def test_bundled_nonlinear_config(tmp_path):
    out = tmp_path / "fig3"
    assert main(["simulate", str(bundled_config_path("fig3_nonlinear.cfg")), "--out-dir", str(out)]) == 0
    summary = read_csv_columns(out / "fringe_summary.csv")
    assert list(summary) [:3] == ["theta_mw_deg", "delta_phi_rad", "stderr_rad"]
    assert np.allclose(summary["delta_phi_rad"], summary["delta_phi_model_rad"], atol=1e-6)
    assert (out / "fig3_fringes.png").exists()


@pytest.mark.parametrize("name, expected", [
    ("fig1d_phase.cfg", "windings.csv"),
    ("fig3_linear.cfg", "fringe_summary.csv"),
])
def test_other_bundles(tmp_path, name, expected):
    assert main(["simulate", name, "--out-dir", str(tmp_path), "--no-figures"]) == 0
    assert (tmp_path / expected).exists()


def test_spin_echo_and_reconstruct_kinds(tmp_path):
    echo = tmp_path / "echo.cfg"
    echo.write_text("[rig]\nphi_cal_deg = 228.5\n[experiment]\nkind = spin-echo\n"
                    "theta_mw_list_deg = 30, 60\nphi_start_deg = 160\n")
    assert simulate(echo, tmp_path / "e") == 0
    rows = read_csv_columns(tmp_path / "e" / "spin_echo.csv")
    assert np.allclose(rows["population"], rows["cos2_delta_phi"], atol=1e-9)

    rec = tmp_path / "rec.cfg"
    rec.write_text("[rig]\ntheta_mw_deg = 67\nphi_cal_deg = 40\n[experiment]\nkind = reconstruct\n"
                   "park_angles_deg = 0, 30, 60, 90, 120, 150, 180, 210, 240, 270, 300, 330\n"
                   "[output]\nfigures = true\n")
    assert simulate(rec, tmp_path / "r") == 0
    text = (tmp_path / "r" / "calibration.txt").read_text()
    offset = float(text.split("offset_deg = ")[1].split()[0])
    assert offset == pytest.approx(40, abs=0.1)


def test_configs_listing(capsys):
    assert main(["configs"]) == 0
    assert "fig2_rabi.cfg" in capsys.readouterr().out
