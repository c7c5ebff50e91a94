import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from rotphase.effphase import (PhaseTrace, drive_offdiag, drive_sample, effective_phase, nonlinear_phase,
                               offdiag, phase_distance, phase_trace, rabi_amplitude, winding_number,
                               wrap_half_pi)
from rotphase.errors import DegenerateDrive
from rotphase.frames import EXPERIMENT_TAU, RigConfig

NV = np.radians(54.7)


def cfg(theta_mw_deg, theta_nv=NV, **kw):
    return RigConfig(theta_nv=theta_nv, theta_mw=np.radians(theta_mw_deg), **kw)


def brute_winding(c, n=200_000):
    """Oracle: count branch crossings of the principal argument on a very fine grid."""
    phi = np.linspace(0, 2 * np.pi, n)
    z = offdiag(c, phi)
    return int(round(np.sum(np.angle(z[1:] / z[:-1])) / (2 * np.pi)))


def test_rabi_amplitude_bounds_and_extremes():
    c = cfg(30)
    phi = np.linspace(0, 2 * np.pi, 721)
    w = rabi_amplitude(c, phi)
    assert np.all(w <= c.omega0 / 2 + 1e-6)
    # |z| at phi = 0 and pi from the closed form: |sin(th_mw -/+ th_nv)| / 2
    assert w[0] == pytest.approx(c.omega0 / 2 * abs(np.sin(c.theta_mw - NV)))
    assert w[360] == pytest.approx(c.omega0 / 2 * abs(np.sin(c.theta_mw + NV)))


def test_parallel_drive_is_degenerate_on_axis():
    c = cfg(np.degrees(NV))
    with pytest.raises(DegenerateDrive, match="rotation angle 0"):
        effective_phase(c, 0.0)
    with pytest.raises(DegenerateDrive):
        winding_number(c)


def test_drive_sample_fields():
    s = drive_sample(cfg(40), 1.0)
    assert s.omega == pytest.approx(rabi_amplitude(cfg(40), 1.0))
    assert s.phi_eff == pytest.approx(np.angle(offdiag(cfg(40), 1.0)))


def test_effective_phase_principal_branch():
    # negative real drive maps to +pi, not -pi
    c = cfg(10)
    assert effective_phase(c, 0.0) == pytest.approx(np.pi)


def test_phase_trace_matches_dense_oracle():
    c = cfg(60)
    tr = phase_trace(c, 0.0, 2 * np.pi, 181)
    dense = np.linspace(0, 2 * np.pi, 180 * 200 + 1)
    z = offdiag(c, dense)
    oracle = np.concatenate([[0], np.cumsum(np.angle(z[1:] / z[:-1]))])[::200]
    assert np.allclose(tr.phi_eff, oracle, atol=1e-12)
    assert isinstance(tr, PhaseTrace)
    assert len(tr) == 181
    assert tr.phi_eff[0] == 0.0


def test_phase_trace_densifies_sharp_turns():
    # barely above the boundary: the phase swings by ~pi within a small angular window
    c = cfg(55.5)
    tr = phase_trace(c, 0.0, 2 * np.pi, 9)
    assert tr.net_change == pytest.approx(2 * np.pi)


def test_phase_trace_validation():
    with pytest.raises(ValueError):
        phase_trace(cfg(40), 1.0, 0.5)
    with pytest.raises(ValueError):
        phase_trace(cfg(40), 0.0, 1.0, 1)


def test_trace_csv(tmp_path):
    tr = phase_trace(cfg(40), 0, 1, 5)
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "phi_deg,omega_normalized,phi_eff_rad"
    assert len(lines) == 6
    assert [s.phi for s in tr] == pytest.approx(tr.phi)


@pytest.mark.parametrize("deg, expected", [(10, 0), (30, 0), (50, 0), (54, 0), (56, 1), (60, 1),
                                            (75, 1), (85, 1)])
def test_winding_matches_brute_force(deg, expected):
    c = cfg(deg)
    assert brute_winding(c) == expected
    assert winding_number(c) == expected


@pytest.mark.parametrize("deg", [100, 120, 150])
def test_winding_past_horizontal_matches_brute_force(deg):
    assert winding_number(cfg(deg)) == brute_winding(cfg(deg))


def test_winding_dichotomy_random_pairs(rng):
    """Winding is 1 exactly when theta_mw > theta_nv (both below 90 deg)."""
    tn = rng.uniform(0.02, np.pi / 2 - 0.02, 10_000)
    tm = rng.uniform(0.02, np.pi / 2 - 0.02, 10_000)
    keep = np.abs(tn - tm) > 1e-3
    tn, tm = tn[keep], tm[keep]
    phi = np.linspace(0, 2 * np.pi, 4097)
    z = drive_offdiag(tn[:, None], tm[:, None], phi[None, :])
    wind = np.round(np.sum(np.angle(z[:, 1:] / z[:, :-1]), axis=1) / (2 * np.pi)).astype(int)
    assert np.array_equal(wind, (tm > tn).astype(int))
    for k in range(0, len(tn), 997):
        assert winding_number(RigConfig(theta_nv=tn[k], theta_mw=tm[k])) == wind[k]


def test_winding_independent_of_calibration_and_phase():
    for p0, cal in [(0.0, 0.0), (1.3, 2.0), (-2.0, 4.5)]:
        assert winding_number(cfg(70, phi_mw0=p0, phi_cal=cal)) == 1
        assert winding_number(cfg(30, phi_mw0=p0, phi_cal=cal)) == 0


@given(st.floats(0.1, 1.4), st.floats(0.1, 1.4), st.floats(-np.pi, np.pi), st.floats(0, 2 * np.pi))
def test_microwave_phase_only_rotates_the_drive(tn, tm, p0, phi):
    assume(abs(tn - tm) > 1e-2)
    a = RigConfig(theta_nv=tn, theta_mw=tm)
    b = a.replace(phi_mw0=p0)
    assert offdiag(b, phi) == pytest.approx(offdiag(a, phi) * np.exp(-1j * p0))
    # the phase trace, referenced to its start, is unchanged
    ta, tb = phase_trace(a, phi, phi + 2.0, 33), phase_trace(b, phi, phi + 2.0, 33)
    assert np.allclose(ta.phi_eff, tb.phi_eff, atol=1e-9)


@given(st.floats(0.1, 1.4), st.floats(0.1, 1.4), st.floats(0, 2 * np.pi))
def test_reflection_symmetry(tn, tm, phi):
    """phi -> -phi conjugates the drive: same amplitude, opposite phase."""
    a = RigConfig(theta_nv=tn, theta_mw=tm)
    assert offdiag(a, -phi) == pytest.approx(np.conj(offdiag(a, phi)))
    assert rabi_amplitude(a, -phi) == pytest.approx(rabi_amplitude(a, phi))


@given(st.floats(0.1, 1.4), st.floats(0.1, 1.4), st.floats(0, 2 * np.pi), st.floats(0.1, 3.0))
def test_nonlinear_phase_vanishes_for_linear_phase(tn, tm, phi0, span):
    """A phase advancing linearly in angle leaves no echo residue; check against the definition."""
    assume(abs(tn - tm) > 0.05)
    c = RigConfig(theta_nv=tn, theta_mw=tm, omega_rot=1.0)
    tr = phase_trace(c, phi0, phi0 + span, 2001)
    expected = tr.phi_eff[-1] / 2 - tr.phi_eff[1000]
    assert nonlinear_phase(c, phi0, span) == pytest.approx(expected, abs=1e-9)


def test_nonlinear_phase_zero_for_pure_rotation():
    # theta_nv = 0, theta_mw = pi/2: z is proportional to e^{i phi}
    c = RigConfig(theta_nv=0.0, theta_mw=np.pi / 2)
    assert nonlinear_phase(c, 0.3, EXPERIMENT_TAU) == pytest.approx(0.0, abs=1e-12)
    assert nonlinear_phase(c.replace(omega_rot=0.0), 0.3, EXPERIMENT_TAU) == 0.0


def test_nonlinear_phase_reference_configurations():
    lin = [nonlinear_phase(RigConfig.experiment(np.radians(d)), np.radians(357), EXPERIMENT_TAU)
           for d in np.arange(28, 68, 3)]
    nonlin = [nonlinear_phase(RigConfig.experiment(np.radians(d)), np.radians(160), EXPERIMENT_TAU)
              for d in np.arange(28, 68, 3)]
    assert np.ptp(wrap_half_pi(np.array(lin))) < 0.05
    assert np.ptp(np.array(nonlin)) > 5 * np.ptp(np.array(lin))


@given(st.floats(-10, 10))
def test_wrap_half_pi(x):
    w = wrap_half_pi(x)
    assert -np.pi / 2 < w <= np.pi / 2 + 1e-12
    assert np.sin(w - x) == pytest.approx(0.0, abs=1e-9)


def test_phase_distance_mod_pi():
    assert phase_distance(1.5, -1.6) == pytest.approx(np.pi - 3.1)
    assert phase_distance(0.2, 0.2 + np.pi) == pytest.approx(0.0, abs=1e-12)


def test_offdiag_without_tilt_is_constant():
    c = cfg(0, phi_mw0=0.7)
    z = offdiag(c, np.linspace(0, 2 * np.pi, 9))
    assert np.allclose(z, -c.omega0 * np.exp(-0.7j) * np.sin(NV) / 2)
    assert np.allclose(rabi_amplitude(c, [0.0, 2.0]), c.omega0 * np.sin(NV) / 2)


def test_offdiag_horizontal_drive_quarter_turn():
    c = cfg(90)
    assert offdiag(c, np.pi / 2) == pytest.approx(1j * c.omega0 / 2)
    assert effective_phase(c, np.pi / 2) == pytest.approx(np.pi / 2)


def test_offdiag_scalar_arithmetic():
    c = cfg(30)
    tn, tm, phi = NV, np.radians(30), np.radians(45)
    direct = c.omega0 * complex(np.cos(tn) * np.cos(phi) * np.sin(tm) - np.cos(tm) * np.sin(tn),
                                np.sin(tm) * np.sin(phi)) / 2
    assert offdiag(c, phi) == pytest.approx(direct, rel=1e-14)


def test_drive_zero_at_parallel_tilt():
    assert rabi_amplitude(cfg(np.degrees(NV)), 0.0) == pytest.approx(0.0, abs=1e-6)


def test_amplitude_extremes_against_dense_scan():
    c = cfg(67)
    dense = rabi_amplitude(c, np.linspace(0, 2 * np.pi, 100_000))
    # analytic extremes: |z|^2 is quadratic in cos(phi); check the closed-form turning values
    a, b = np.cos(NV) * np.sin(c.theta_mw), np.cos(c.theta_mw) * np.sin(NV)
    s2 = np.sin(c.theta_mw) ** 2
    cos_grid = np.clip(np.array([-1.0, 1.0, -a * b / (s2 - a * a)]), -1, 1)
    vals = c.omega0 / 2 * np.sqrt((a * cos_grid - b) ** 2 + s2 * (1 - cos_grid ** 2))
    assert dense.max() == pytest.approx(vals.max(), rel=1e-9)
    assert dense.min() == pytest.approx(vals.min(), rel=1e-9)
