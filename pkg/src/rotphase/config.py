"""Experiment configuration files.

Flat ``key = value`` text with ``[rig]``, ``[experiment]`` and ``[output]``
sections, no nesting. Angles are in degrees and frequencies in Hz on disk;
:meth:`ExperimentConfig.rig` converts to the radian / rad/s units used by
the library. Unknown sections or keys are rejected.
"""

import configparser
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .frames import RigConfig

KINDS = ("rabi-scan", "phase-trace", "spin-echo", "fringe-scan", "reconstruct", "fit")


def _float_list(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _str_list(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


# field name -> (section, parser)
_SCHEMA = {
    "theta_nv_deg": ("rig", float),
    "theta_mw_deg": ("rig", float),
    "rotation_hz": ("rig", float),
    "omega0_hz": ("rig", float),
    "phi_mw0_deg": ("rig", float),
    "carrier_hz": ("rig", float),
    "detuning_hz": ("rig", float),
    "b_transverse_tesla": ("rig", float),
    "b_axial_tesla": ("rig", float),
    "gyromagnetic_hz_per_tesla": ("rig", float),
    "phi_cal_deg": ("rig", float),
    "kind": ("experiment", str),
    "seed": ("experiment", int),
    "theta_mw_list_deg": ("experiment", _float_list),
    "theta_nv_list_deg": ("experiment", _float_list),
    "phi_start_deg": ("experiment", float),
    "phi_end_deg": ("experiment", float),
    "n_points": ("experiment", int),
    "tau_us": ("experiment", float),
    "park_angles_deg": ("experiment", _float_list),
    "t_max_us": ("experiment", float),
    "rabi_periods": ("experiment", float),
    "n_samples": ("experiment", int),
    "rabi_noise": ("experiment", float),
    "pulse_mode": ("experiment", str),
    "drive_model": ("experiment", str),
    "dt_max_s": ("experiment", float),
    "b_min_tesla": ("experiment", float),
    "b_max_tesla": ("experiment", float),
    "b_points": ("experiment", int),
    "trials": ("experiment", int),
    "shared_f0": ("experiment", _bool),
    "float_contrast": ("experiment", _bool),
    "f0_init": ("experiment", float),
    "datasets": ("experiment", _str_list),
    "dir": ("output", str),
    "figures": ("output", _bool),
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    theta_nv_deg: float = 54.7
    theta_mw_deg: float = 45.0
    rotation_hz: float = 3.33e3
    omega0_hz: float = 10e6
    phi_mw0_deg: float = 0.0
    carrier_hz: float = 2.870e9
    detuning_hz: float = 0.0
    b_transverse_tesla: float = 0.0
    b_axial_tesla: float = 0.0
    gyromagnetic_hz_per_tesla: float = 28.024951e9
    phi_cal_deg: float = 0.0
    seed: int = 0
    theta_mw_list_deg: tuple = None
    theta_nv_list_deg: tuple = None
    phi_start_deg: float = 0.0
    phi_end_deg: float = None
    n_points: int = 721
    tau_us: float = 100.0
    park_angles_deg: tuple = None
    t_max_us: float = None
    rabi_periods: float = 16.0
    n_samples: int = 512
    rabi_noise: float = 0.0
    pulse_mode: str = "instantaneous"
    drive_model: str = "rwa"
    dt_max_s: float = None
    b_min_tesla: float = None
    b_max_tesla: float = None
    b_points: int = 21
    trials: int = 0
    shared_f0: bool = True
    float_contrast: bool = False
    f0_init: float = None
    datasets: tuple = None
    dir: str = "out"
    figures: bool = True
    source: str = field(default=None, compare=False)

    def __post_init__(self):
        self.validate()

    # -- validation -----------------------------------------------------------
    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind: expected one of {', '.join(KINDS)}, got {self.kind!r}")
        _in_range("theta_nv_deg", self.theta_nv_deg, 0, 180)
        _in_range("theta_mw_deg", self.theta_mw_deg, 0, 180)
        for name in ("theta_mw_list_deg", "theta_nv_list_deg"):
            for v in getattr(self, name) or ():
                _in_range(name, v, 0, 180)
        if self.rotation_hz < 0:
            raise ConfigError(f"rotation_hz: must be >= 0, got {self.rotation_hz}")
        if not self.omega0_hz > 0:
            raise ConfigError(f"omega0_hz: must be > 0, got {self.omega0_hz}")
        if not self.carrier_hz > 0:
            raise ConfigError(f"carrier_hz: must be > 0, got {self.carrier_hz}")
        if not self.tau_us > 0:
            raise ConfigError(f"tau_us: must be > 0, got {self.tau_us}")
        if self.pulse_mode not in ("instantaneous", "finite"):
            raise ConfigError(f"pulse_mode: expected instantaneous or finite, got {self.pulse_mode!r}")
        if self.drive_model not in ("rwa", "full"):
            raise ConfigError(f"drive_model: expected rwa or full, got {self.drive_model!r}")
        if self.dt_max_s is not None and not self.dt_max_s > 0:
            raise ConfigError(f"dt_max_s: must be > 0, got {self.dt_max_s}")
        if self.b_points < 2:
            raise ConfigError(f"b_points: need at least 2, got {self.b_points}")
        if self.trials < 0:
            raise ConfigError(f"trials: must be >= 0, got {self.trials}")
        if self.n_points < 2:
            raise ConfigError(f"n_points: need at least 2, got {self.n_points}")
        if self.n_samples < 8:
            raise ConfigError(f"n_samples: need at least 8, got {self.n_samples}")
        if self.rabi_noise < 0:
            raise ConfigError(f"rabi_noise: must be >= 0, got {self.rabi_noise}")
        if self.t_max_us is not None and not self.t_max_us > 0:
            raise ConfigError(f"t_max_us: must be > 0, got {self.t_max_us}")
        if self.kind in ("rabi-scan", "reconstruct") and not self.park_angles_deg:
            raise ConfigError("park_angles_deg: required for rabi-scan and reconstruct")
        if self.kind == "reconstruct" and len(self.park_angles_deg) < 8:
            raise ConfigError("park_angles_deg: reconstruct needs at least 8 park angles")
        if self.kind == "fit" and not self.datasets:
            raise ConfigError("datasets: required for kind = fit")
        if (self.b_min_tesla is None) != (self.b_max_tesla is None):
            raise ConfigError("b_min_tesla/b_max_tesla: give both or neither")
        if self.b_min_tesla is not None and not self.b_max_tesla > self.b_min_tesla:
            raise ConfigError("b_max_tesla: must exceed b_min_tesla")

    # -- conversions ----------------------------------------------------------
    def rig(self, theta_mw_deg=None, theta_nv_deg=None):
        """RigConfig in library units, optionally overriding the tilt angles."""
        tm = self.theta_mw_deg if theta_mw_deg is None else theta_mw_deg
        tn = self.theta_nv_deg if theta_nv_deg is None else theta_nv_deg
        return RigConfig(
            theta_nv=np.radians(tn), theta_mw=np.radians(tm),
            omega_rot=2 * np.pi * self.rotation_hz, omega0=2 * np.pi * self.omega0_hz,
            phi_mw0=np.radians(self.phi_mw0_deg), omega_mw=2 * np.pi * self.carrier_hz,
            detuning=2 * np.pi * self.detuning_hz, b_transverse=self.b_transverse_tesla,
            b_axial=self.b_axial_tesla, gyromagnetic_ratio=2 * np.pi * self.gyromagnetic_hz_per_tesla,
            phi_cal=np.radians(self.phi_cal_deg))

    @property
    def theta_mw_values(self):
        return self.theta_mw_list_deg or (self.theta_mw_deg,)

    @property
    def theta_nv_values(self):
        return self.theta_nv_list_deg or (self.theta_nv_deg,)

    def base_dir(self):
        return Path(self.source).parent if self.source else Path(".")

    # -- serialisation --------------------------------------------------------
    def to_text(self):
        """Canonical text: every non-default value, sections and keys in schema order."""
        defaults = {f.name: f.default for f in fields(self)}
        out = []
        for section in ("rig", "experiment", "output"):
            lines = []
            for name, (sec, _) in _SCHEMA.items():
                value = getattr(self, name)
                if sec == section and (value != defaults.get(name) or name == "kind"):
                    lines.append(f"{name} = {_fmt(value)}")
            if lines:
                out.append(f"[{section}]")
                out.extend(lines)
                out.append("")
        return "\n".join(out)

    def content_hash(self):
        """git-style blob hash of the canonical text."""
        data = self.to_text().encode()
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()

    def with_overrides(self, **changes):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ExperimentConfig(**values)


def _in_range(name, value, lo, hi):
    if not (lo <= value <= hi):
        raise ConfigError(f"{name}: {value} outside [{lo}, {hi}] deg")


def parse_config(text, source=None):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in ("rig", "experiment", "output"):
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA:
                raise ConfigError(f"{key}: unknown key in [{section}]")
            expected, conv = _SCHEMA[key]
            if expected != section:
                raise ConfigError(f"{key}: belongs in [{expected}], found in [{section}]")
            try:
                values[key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
    if "kind" not in values:
        raise ConfigError("kind: missing from [experiment]")
    return ExperimentConfig(source=source, **values)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, source=str(path))


def bundled_config_path(name):
    """Path of a config shipped with the package (e.g. ``fig2_rabi.cfg``)."""
    return Path(__file__).parent / "configs" / name


def bundled_configs():
    return sorted((Path(__file__).parent / "configs").glob("*.cfg"))
