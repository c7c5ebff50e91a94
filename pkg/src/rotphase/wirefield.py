"""Microwave delivery wire geometry.

The wire runs along lab x at height ``standoff`` above the NV and is displaced
along y. Its field at the NV is taken to be purely azimuthal about the wire,
so the polarization lies in the y-z plane at angle theta_mw from z with
tan(theta_mw) = standoff / |y|.
"""

from dataclasses import dataclass

import numpy as np

from .errors import OnAxis

MU0 = 4e-7 * np.pi
ON_AXIS_TOL = 1e-9
WIRE_AXIS = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class WireGeometry:
    """Wire position relative to the NV (metres).

    The wire's y coordinate is ``offset_origin + lateral_offset``; the origin
    absorbs the unknown zero of the translation stage.
    """

    standoff: float
    lateral_offset: float = 0.0
    offset_origin: float = 0.0

    def __post_init__(self):
        if not self.standoff > 0:
            raise ValueError(f"standoff must be > 0, got {self.standoff!r}")

    @property
    def wire_y(self):
        return self.offset_origin + self.lateral_offset

    @classmethod
    def calibrated(cls, theta_max=np.radians(67.0), theta_min=np.radians(28.0),
                   travel=100e-6, lateral_offset=0.0):
        """Geometry whose ``travel`` of lateral motion sweeps theta_mw from theta_max to theta_min.

        Solves standoff = y0 tan(theta_max) = (y0 + travel) tan(theta_min).
        """
        if not 0 < theta_min < theta_max < np.pi / 2:
            raise ValueError("need 0 < theta_min < theta_max < 90 deg")
        t_hi, t_lo = np.tan(theta_max), np.tan(theta_min)
        y0 = travel * t_lo / (t_hi - t_lo)
        return cls(standoff=float(y0 * t_hi), lateral_offset=lateral_offset, offset_origin=float(y0))

    def at(self, lateral_offset):
        return WireGeometry(self.standoff, lateral_offset, self.offset_origin)

    def radial_vector(self):
        """Vector from the wire axis to the NV (at the origin), perpendicular to x."""
        return np.array([0.0, -self.wire_y, -self.standoff])

    def field_magnitude(self, current):
        """Biot-Savart |B| = mu0 I / (2 pi r) of an infinite wire. Not used by the drive model."""
        return MU0 * current / (2 * np.pi * self._distance())

    def _distance(self):
        r = float(np.linalg.norm(self.radial_vector()))
        if r < ON_AXIS_TOL:
            raise OnAxis("NV lies on the wire axis")
        return r


def field_direction(geom):
    """Unit azimuthal vector x-hat cross r-hat of the wire's cylindrical frame at the NV."""
    r = geom._distance()
    return np.cross(WIRE_AXIS, geom.radial_vector() / r)


def tilt_angle(geom):
    """Polar angle of the polarization from z, folded into [0, pi/2]."""
    b = field_direction(geom)
    return float(np.arccos(min(1.0, abs(b[2]))))


def tilt_sweep(geom, offsets):
    return np.array([tilt_angle(geom.at(o)) for o in offsets])
