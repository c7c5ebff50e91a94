"""Effective drive amplitude and phase of a tilted microwave field seen by a rotating NV.

Under the rotating-wave approximation the drive reduces to the complex number

    z(phi) = Omega0 exp(-i phi0) (cos th_nv cos phi sin th_mw
                                  - cos th_mw sin th_nv + i sin th_mw sin phi) / 2

whose modulus is the Rabi angular frequency and whose argument is the
effective drive phase. As ``phi`` advances the point z traces an ellipse;
the ellipse encloses the origin (winding 1) only when th_mw > th_nv.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDrive, UnwrapFailure

AMPLITUDE_FLOOR = 1e-9
"""Fraction of Omega0 below which the drive phase is treated as undefined."""

MAX_DENSIFY = 10


def drive_offdiag(theta_nv, theta_mw, phi, omega0=1.0, phi_mw0=0.0):
    """Analytic RWA drive element for raw angles (``phi`` is the NV azimuth)."""
    phi = np.asarray(phi, dtype=float)
    bracket = (np.cos(theta_nv) * np.cos(phi) * np.sin(theta_mw)
               - np.cos(theta_mw) * np.sin(theta_nv)
               + 1j * np.sin(theta_mw) * np.sin(phi))
    return omega0 * np.exp(-1j * phi_mw0) * bracket / 2


def offdiag(cfg, phi):
    """Drive element z at motor angle ``phi`` (vectorised)."""
    return drive_offdiag(cfg.theta_nv, cfg.theta_mw, cfg.azimuth(phi), cfg.omega0, cfg.phi_mw0)


def rabi_amplitude(cfg, phi):
    """Rabi angular frequency |z| (rad/s)."""
    return np.abs(offdiag(cfg, phi))


def _checked_offdiag(cfg, phi):
    z = offdiag(cfg, phi)
    small = np.abs(z) < AMPLITUDE_FLOOR * cfg.omega0
    if np.any(small):
        angles = np.broadcast_to(np.asarray(phi, dtype=float), z.shape)
        bad = np.degrees(angles[small].flat[0])
        raise DegenerateDrive(f"drive amplitude vanishes at rotation angle {bad:.6g} deg")
    return z


def effective_phase(cfg, phi):
    """Principal-value drive phase Arg z in (-pi, pi]."""
    z = _checked_offdiag(cfg, phi)
    out = np.angle(z)
    # np.angle returns -pi on the negative real axis
    return np.where(out == -np.pi, np.pi, out)


@dataclass(frozen=True)
class DriveSample:
    phi: float
    omega: float
    phi_eff: float


def drive_sample(cfg, phi):
    return DriveSample(float(phi), float(rabi_amplitude(cfg, phi)), float(effective_phase(cfg, phi)))


@dataclass(frozen=True)
class PhaseTrace:
    """Continuous effective phase on an increasing grid of rotation angles.

    ``phi_eff`` is shifted so the first sample is zero; ``unwrap_reference``
    is the principal phase that was subtracted.
    """

    phi: np.ndarray
    omega: np.ndarray
    phi_eff: np.ndarray
    unwrap_reference: float
    omega0: float = 1.0

    def __len__(self):
        return len(self.phi)

    def __iter__(self):
        for p, w, e in zip(self.phi, self.omega, self.phi_eff):
            yield DriveSample(float(p), float(w), float(e))

    @property
    def net_change(self):
        return float(self.phi_eff[-1] - self.phi_eff[0])

    def to_csv(self, path):
        """Write ``phi_deg, omega_normalized, phi_eff_rad``; omega is scaled by Omega0/2, its upper bound."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["phi_deg", "omega_normalized", "phi_eff_rad"])
            for p, w, e in zip(self.phi, self.omega, self.phi_eff):
                writer.writerow([f"{np.degrees(p):.17g}", f"{w / (self.omega0 / 2):.17g}", f"{e:.17g}"])


def _unwrapped(cfg, phi_start, phi_end, n):
    phi = np.linspace(phi_start, phi_end, n)
    z = _checked_offdiag(cfg, phi)
    raw = np.angle(z)
    return phi, z, raw


def phase_trace(cfg, phi_start, phi_end, n=513):
    """Unwrapped effective phase over ``[phi_start, phi_end]`` with ``n`` samples.

    Nearest-branch continuation; the grid is densified (each interval
    halved) until adjacent principal phases differ by less than pi/2, and
    the continuous phase is then read back on the requested grid.
    """
    if n < 2:
        raise ValueError("phase_trace needs at least two samples")
    if not phi_end > phi_start:
        raise ValueError("phase_trace needs phi_end > phi_start")
    level = 0
    while True:
        dense_n = (n - 1) * 2 ** level + 1
        phi, z, raw = _unwrapped(cfg, phi_start, phi_end, dense_n)
        jumps = np.abs(np.angle(z[1:] / z[:-1]))
        if jumps.max() < np.pi / 2:
            break
        if level == MAX_DENSIFY:
            if jumps.max() >= np.pi * (1 - 1e-12):
                raise UnwrapFailure(
                    f"phase jump of {jumps.max():.3f} rad between adjacent samples near "
                    f"{np.degrees(phi[np.argmax(jumps)]):.4f} deg")
            break
        level += 1
    cont = raw[0] + np.concatenate([[0.0], np.cumsum(np.angle(z[1:] / z[:-1]))])
    step = 2 ** level
    phi, z, cont = phi[::step], z[::step], cont[::step]
    return PhaseTrace(phi=phi, omega=np.abs(z), phi_eff=cont - cont[0],
                      unwrap_reference=float(raw[0]), omega0=cfg.omega0)


def winding_number(cfg, n=1025):
    """Net 2 pi wraps of the drive phase over one full rotation.

    Positive for counter-clockwise motion of z in the complex plane as
    ``phi`` increases. Zero when the ellipse traced by z misses the origin.
    """
    start = cfg.phi_cal
    trace = phase_trace(cfg, start, start + 2 * np.pi, n)
    return int(round(trace.net_change / (2 * np.pi)))


def nonlinear_phase(cfg, phi_start, tau, n=513):
    """Echo-sampled phase nonlinearity phi_eff(tau)/2 - phi_eff(tau/2), phi_eff(0) = 0.

    The phase is unwrapped along the rotation from ``phi_start`` to
    ``phi_start + omega_rot tau``; ``n`` is forced odd so the midpoint is a
    grid sample.
    """
    span = cfg.omega_rot * tau
    if span == 0:
        _checked_offdiag(cfg, phi_start)
        return 0.0
    if n % 2 == 0:
        n += 1
    trace = phase_trace(cfg, phi_start, phi_start + span, n)
    return float(trace.phi_eff[-1] / 2 - trace.phi_eff[n // 2])


def wrap_half_pi(x):
    """Representative of ``x`` modulo pi in (-pi/2, pi/2]."""
    x = np.asarray(x, dtype=float)
    out = np.pi / 2 - np.mod(np.pi / 2 - x, np.pi)
    return float(out) if out.ndim == 0 else out


def phase_distance(a, b):
    """Distance between two phases defined modulo pi."""
    return np.abs(wrap_half_pi(np.asarray(a) - np.asarray(b)))
