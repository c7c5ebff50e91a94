"""Spin-1/2 algebra: Pauli matrices, SU(2) rotations and a closed-form 2x2 exponential.

Every function broadcasts over leading axes, so arrays of angles give stacks
of ``(..., 2, 2)`` matrices. States are length-2 complex arrays ordered
``(|m_S=0>, |m_S=-1>)``.
"""

import numpy as np

from .errors import RotPhaseError

IDENTITY = np.eye(2, dtype=complex)

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

HERMITIAN_TOL = 1e-9


def pauli(axis):
    """Return the Pauli matrix for ``axis`` in ``{'x', 'y', 'z'}``."""
    try:
        return _PAULI[axis].copy()
    except KeyError:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}") from None


def spin(axis):
    """Spin-1/2 operator S_axis = sigma_axis / 2."""
    return 0.5 * pauli(axis)


def rotation(axis, angle):
    """R_axis(angle) = exp(-i S_axis angle), broadcasting over ``angle``."""
    angle = np.asarray(angle, dtype=float)
    if not np.all(np.isfinite(angle)):
        raise ValueError("rotation angle must be finite")
    c = np.cos(angle / 2)[..., None, None]
    s = np.sin(angle / 2)[..., None, None]
    return c * IDENTITY - 1j * s * _PAULI[axis]


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def is_hermitian(h, tol=HERMITIAN_TOL):
    h = np.asarray(h)
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    return bool(np.max(np.abs(h - dagger(h)), initial=0.0) <= tol * scale)


def expm_skew_hermitian(h, t):
    """Closed-form exp(-i H t) for Hermitian 2x2 ``h``.

    Writes H = a I + b.sigma and uses
    exp(-i H t) = exp(-i a t) [cos(|b| t) I - i sin(|b| t) (b/|b|).sigma].
    ``h`` may be a stack ``(..., 2, 2)``; ``t`` broadcasts against the stack.
    The Hermiticity check is relative to the largest entry, so Hamiltonians
    in rad/s with roundoff-level asymmetry are accepted.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise RotPhaseError("expm_skew_hermitian requires a Hermitian generator")
    t = np.asarray(t, dtype=float)
    a = 0.5 * (h[..., 0, 0].real + h[..., 1, 1].real)
    bx = h[..., 0, 1].real
    by = -h[..., 0, 1].imag
    bz = 0.5 * (h[..., 0, 0].real - h[..., 1, 1].real)
    r = np.sqrt(bx * bx + by * by + bz * bz)
    cos_rt = np.cos(r * t)
    # sin(r t) / r, finite at r = 0
    sinc_t = t * np.sinc(r * t / np.pi)
    phase = np.exp(-1j * a * t)
    out = np.empty(np.broadcast(a, t).shape + (2, 2), dtype=complex)
    out[..., 0, 0] = phase * (cos_rt - 1j * sinc_t * bz)
    out[..., 1, 1] = phase * (cos_rt + 1j * sinc_t * bz)
    out[..., 0, 1] = phase * (-1j * sinc_t) * (bx - 1j * by)
    out[..., 1, 0] = phase * (-1j * sinc_t) * (bx + 1j * by)
    return out


def ket0():
    """|m_S = 0>, the optically pumped initial state."""
    return np.array([1.0, 0.0], dtype=complex)


def ket1():
    """|m_S = -1>."""
    return np.array([0.0, 1.0], dtype=complex)


def population0(state):
    return float(abs(state[0]) ** 2)


def fidelity(psi, phi):
    """Projective overlap |<psi|phi>|^2, blind to global phase."""
    return float(abs(np.vdot(psi, phi)) ** 2)


def bloch_vector(state):
    """Expectation values (<sigma_x>, <sigma_y>, <sigma_z>) of a state or stack of states."""
    state = np.asarray(state)
    c0, c1 = state[..., 0], state[..., 1]
    cross = np.conj(c0) * c1
    return np.stack([2 * cross.real, 2 * cross.imag, abs(c0) ** 2 - abs(c1) ** 2], axis=-1)
