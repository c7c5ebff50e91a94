"""Time-domain simulation of rotation-synchronised pulse sequences on the NV pseudospin.

All dynamics run in the frame rotating at the microwave carrier. Two drive
models are available:

``rwa``
    the analytic rotating-wave drive H = [[0, z/2], [z*/2, 0]] with z from
    :func:`rotphase.effphase.offdiag`;
``full``
    the complete interaction Hamiltonian R_NV^-1 H_mw R_NV carried into the
    carrier frame, counter-rotating and longitudinal terms included.

Time t = 0 is the centre of the first pulse, where the rotation angle is
``phi_start``; the angle advances as phi(t) = phi_start + omega_rot t.
"""

from dataclasses import dataclass, field

import numpy as np

from . import effphase
from .datasets import FringeDataset
from .errors import StepTooCoarse
from .frames import free_evolution_hamiltonian, interaction_hamiltonian
from .spinalg import IDENTITY, bloch_vector, expm_skew_hermitian, ket0

STEP_GUARD = 0.1
"""Largest allowed ||H|| dt per step (rad)."""

STEPS_PER_ROTATION = 10_000
STEPS_PER_CARRIER = 64
DEFAULT_TRIALS = 100_000

PULSE_MODES = ("instantaneous", "finite")
DRIVE_MODELS = ("rwa", "full")


def _hnorm(h):
    """Spectral norm of a stack of Hermitian 2x2 matrices."""
    a = 0.5 * np.abs(h[..., 0, 0].real + h[..., 1, 1].real)
    r = np.sqrt(np.abs(h[..., 0, 1]) ** 2 + 0.25 * (h[..., 0, 0].real - h[..., 1, 1].real) ** 2)
    return a + r


def _evaluate(hamiltonian, t):
    try:
        h = np.asarray(hamiltonian(t), dtype=complex)
    except (TypeError, ValueError):
        h = None
    if h is None or h.shape != t.shape + (2, 2):
        h = np.stack([np.asarray(hamiltonian(ti), dtype=complex) for ti in t])
    return h


def _ordered_product(steps):
    """U_n ... U_2 U_1 for a stack ordered in time, by pairwise reduction."""
    u = steps
    while len(u) > 1:
        if len(u) % 2:
            u = np.concatenate([u, IDENTITY[None]])
        u = u[1::2] @ u[0::2]
    return u[0] if len(u) else IDENTITY.copy()


def _steps(hamiltonian, t0, t1, dt_max):
    if t1 < t0:
        raise ValueError("propagate needs t1 >= t0")
    if not dt_max > 0:
        raise ValueError("dt_max must be positive")
    if t1 == t0:
        return np.empty(0), np.empty((0, 2, 2), dtype=complex)
    n = int(np.ceil((t1 - t0) / dt_max * (1 - 1e-12)))
    dt = (t1 - t0) / n
    mid = t0 + (np.arange(n) + 0.5) * dt
    h = _evaluate(hamiltonian, mid)
    worst = float(np.max(_hnorm(h))) * dt
    if worst > STEP_GUARD:
        raise StepTooCoarse(f"||H|| dt = {worst:.3g} rad exceeds {STEP_GUARD} rad; reduce dt_max")
    return t0 + np.arange(1, n + 1) * dt, expm_skew_hermitian(h, dt)


def propagator(hamiltonian, t0, t1, dt_max):
    """Time-ordered propagator from t0 to t1 by exponential midpoint stepping.

    ``hamiltonian(t)`` may accept an array of times and return ``(n, 2, 2)``;
    scalar-only callables are evaluated point by point.
    """
    _, steps = _steps(hamiltonian, t0, t1, dt_max)
    return _ordered_product(steps)


def propagate(state, hamiltonian, t0, t1, dt_max):
    """Evolve ``state`` from t0 to t1; second-order accurate, exactly unitary per step."""
    return propagator(hamiltonian, t0, t1, dt_max) @ np.asarray(state, dtype=complex)


def rwa_drive(cfg, phi):
    """Rotating-wave drive Hamiltonian (microwave term only) at rotation angle ``phi``."""
    half = effphase.offdiag(cfg, phi) / 2
    h = np.zeros(np.shape(half) + (2, 2), dtype=complex)
    h[..., 0, 1] = half
    h[..., 1, 0] = np.conj(half)
    return h


def full_drive(cfg, phi, t):
    """Complete drive in the carrier frame: exp(-i w S_z t) H_I exp(i w S_z t)."""
    h = interaction_hamiltonian(cfg, phi, t)
    rot = np.exp(-1j * cfg.omega_mw * np.asarray(t, dtype=float))
    h[..., 0, 1] *= rot
    h[..., 1, 0] *= np.conj(rot)
    return h


@dataclass(frozen=True)
class PulseEvent:
    """One microwave pulse; ``angle`` and ``time`` refer to the pulse centre."""

    angle: float
    time: float
    area: float
    duration: float
    drive_model: str = "rwa"


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple
    tau: float
    phi_start: float

    @property
    def angles(self):
        return [p.angle for p in self.pulses]


@dataclass
class SimResult:
    state: np.ndarray
    population_ms0: float
    propagator: np.ndarray
    times: np.ndarray = None
    bloch: np.ndarray = field(default=None, repr=False)


def calibrate_durations(cfg, sequence_angles, areas=None):
    """Pulse durations area / Omega(phi) from the local analytic Rabi frequency."""
    angles = np.asarray(sequence_angles, dtype=float)
    if areas is None:
        areas = np.full(angles.shape, np.pi / 2)
    areas = np.broadcast_to(np.asarray(areas, dtype=float), angles.shape)
    z = effphase._checked_offdiag(cfg, angles)
    return areas / np.abs(z)


def spin_echo_sequence(cfg, phi_start, tau, drive_model="rwa"):
    """pi/2 - tau/2 - pi - tau/2 - pi/2 with pulse centres at 0, tau/2, tau."""
    times = np.array([0.0, tau / 2, tau])
    angles = phi_start + cfg.omega_rot * times
    areas = np.array([np.pi / 2, np.pi, np.pi / 2])
    durations = calibrate_durations(cfg, angles, areas)
    pulses = tuple(PulseEvent(float(a), float(t), float(ar), float(d), drive_model)
                   for a, t, ar, d in zip(angles, times, areas, durations))
    return PulseSequence(pulses=pulses, tau=float(tau), phi_start=float(phi_start))


def _default_dt(cfg, norm_bound, carrier=False):
    dt = STEP_GUARD / 10 / norm_bound if norm_bound > 0 else np.inf
    if cfg.omega_rot > 0:
        dt = min(dt, cfg.rotation_period / STEPS_PER_ROTATION)
    if carrier:
        dt = min(dt, 2 * np.pi / cfg.omega_mw / STEPS_PER_CARRIER)
    if not np.isfinite(dt):
        dt = 1e-6
    return dt


def _free_norm(cfg):
    return 0.5 * (abs(cfg.detuning) + abs(cfg.gyromagnetic_ratio * cfg.b_transverse) * np.sin(cfg.theta_nv))


def _segments(cfg, seq, pulse_mode, dt_max):
    """Yield (t0, t1, hamiltonian, dt) for integrated pieces and (t, t, U, None) for kicks."""
    phi0 = seq.phi_start

    def angle(t):
        return phi0 + cfg.omega_rot * np.asarray(t, dtype=float)

    def free(t):
        return free_evolution_hamiltonian(cfg, angle(t))

    free_dt = dt_max or _default_dt(cfg, _free_norm(cfg))
    if pulse_mode == "instantaneous":
        edges = [(p.time, p.time) for p in seq.pulses]
    else:
        edges = [(p.time - p.duration / 2, p.time + p.duration / 2) for p in seq.pulses]
        for (_, a_end), (b_start, _) in zip(edges, edges[1:]):
            if b_start < a_end:
                raise ValueError("pulses overlap; increase tau or the Rabi frequency")
    out = []
    for k, (pulse, (start, end)) in enumerate(zip(seq.pulses, edges)):
        if pulse_mode == "instantaneous":
            u = expm_skew_hermitian(rwa_drive(cfg, pulse.angle), pulse.duration)
            out.append((start, end, u, None))
        elif pulse.drive_model == "full":
            def ham(t):
                return full_drive(cfg, angle(t), t) + free(t)
            bound = cfg.omega0 / 2 + _free_norm(cfg)
            out.append((start, end, ham, dt_max or _default_dt(cfg, bound, carrier=True)))
        else:
            def ham(t):
                return rwa_drive(cfg, angle(t)) + free(t)
            bound = 0.5 * cfg.omega0 / 2 + _free_norm(cfg)
            out.append((start, end, ham, dt_max or _default_dt(cfg, bound)))
        if k + 1 < len(seq.pulses):
            out.append((end, edges[k + 1][0], free, free_dt))
    return out


def run_sequence(cfg, seq, pulse_mode="instantaneous", dt_max=None, trajectory=False, state=None):
    """Apply a pulse sequence to ``state`` (default |m_S=0>)."""
    if pulse_mode not in PULSE_MODES:
        raise ValueError(f"pulse_mode must be one of {PULSE_MODES}")
    if pulse_mode == "instantaneous" and any(p.drive_model == "full" for p in seq.pulses):
        raise ValueError("the full drive model needs finite pulses")
    psi = ket0() if state is None else np.asarray(state, dtype=complex)
    u_total = IDENTITY.copy()
    segments = _segments(cfg, seq, pulse_mode, dt_max)
    times, states = [], []
    if trajectory:
        times.append(segments[0][0])
        states.append(psi)
    for t0, t1, piece, dt in segments:
        if dt is None:
            u_total = piece @ u_total
            if trajectory:
                times.append(t1)
                states.append(u_total @ psi)
            continue
        if trajectory:
            stamps, steps = _steps(piece, t0, t1, dt)
            for t, u in zip(stamps, steps):
                u_total = u @ u_total
                times.append(t)
                states.append(u_total @ psi)
        else:
            u_total = propagator(piece, t0, t1, dt) @ u_total
    final = u_total @ psi
    result = SimResult(state=final, population_ms0=float(abs(final[0]) ** 2), propagator=u_total)
    if trajectory:
        result.times = np.array(times)
        result.bloch = bloch_vector(np.array(states))
    return result


def spin_echo(cfg, phi_start, tau, pulse_mode="instantaneous", drive_model="rwa",
              dt_max=None, trajectory=False):
    """Rotation-synchronised spin echo; each pulse's axis follows the local effective phase.

    With no field or detuning, population_ms0 = cos^2 of
    :func:`rotphase.effphase.nonlinear_phase` in instantaneous mode.
    """
    if drive_model not in DRIVE_MODELS:
        raise ValueError(f"drive_model must be one of {DRIVE_MODELS}")
    if drive_model == "full":
        pulse_mode = "finite"
    seq = spin_echo_sequence(cfg, phi_start, tau, drive_model)
    return run_sequence(cfg, seq, pulse_mode, dt_max, trajectory)


def rabi_scan(cfg, park_angle, t_max, n_samples):
    """Population of |m_S=0> versus drive duration with the rotor parked at ``park_angle``.

    Returns ``(times, populations)``. The drive is stationary, so the
    propagator is one exact exponential per sample; on resonance the
    population is cos^2(Omega t / 2) with Omega = |z|.
    """
    t = np.linspace(0.0, t_max, n_samples)
    h = rwa_drive(cfg, park_angle) + free_evolution_hamiltonian(cfg, park_angle)
    u = expm_skew_hermitian(h, t)
    return t, np.abs(u[:, 0, 0]) ** 2


def fringe_frequency(cfg, phi_start, tau):
    """Fringe frequency f0 (per tesla) of the echo signal cos^2(2 pi f0 B_x - dphi).

    A static B_x seen by the spinning NV gives a detuning proportional to
    cos(azimuth); the echo responds to half the difference between the
    phases gathered before and after the refocusing pulse.
    """
    if cfg.omega_rot == 0:
        return 0.0
    az = cfg.azimuth(phi_start + cfg.omega_rot * np.array([0.0, tau / 2, tau]))
    scale = cfg.gyromagnetic_ratio * np.sin(cfg.theta_nv) / cfg.omega_rot
    first = scale * (np.sin(az[1]) - np.sin(az[0]))
    second = scale * (np.sin(az[2]) - np.sin(az[1]))
    return float((first - second) / 2 / (2 * np.pi))


def shot_noise(populations, trials, rng):
    """Binomial readout; sigma is the posterior s.d. under a flat prior, never zero."""
    k = rng.binomial(trials, np.clip(populations, 0.0, 1.0))
    n = trials
    sigma = np.sqrt((k + 1) * (n - k + 1) / ((n + 2) ** 2 * (n + 3)))
    return k / n, sigma


def fringe_scan(cfg, phi_start, tau, b_values, trials=0, seed=None,
                pulse_mode="instantaneous", drive_model="rwa", dt_max=None):
    """Spin-echo population versus applied B_x.

    ``trials`` > 0 replaces each population by a binomial estimate from
    that many repetitions, drawn from ``numpy.random.default_rng(seed)``.
    """
    b_values = np.asarray(b_values, dtype=float)
    pops = np.array([
        spin_echo(cfg.replace(b_transverse=float(b)), phi_start, tau,
                  pulse_mode=pulse_mode, drive_model=drive_model, dt_max=dt_max).population_ms0
        for b in b_values
    ])
    pops = np.clip(pops, 0.0, 1.0)
    if trials:
        pops, sigma = shot_noise(pops, int(trials), np.random.default_rng(seed))
        return FringeDataset(b_values, pops, sigma)
    return FringeDataset(b_values, pops)


def unitarity_defect(u):
    return float(np.max(np.abs(u @ np.conj(u.T) - IDENTITY)))
