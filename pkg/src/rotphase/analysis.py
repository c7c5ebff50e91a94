"""Rabi-frequency extraction, azimuthal calibration and spin-echo fringe fitting."""

from dataclasses import dataclass, field

import numpy as np

from . import effphase
from .datasets import FringeDataset
from .errors import AmbiguousCalibration, IllConditioned, NoConvergence, NoPeak

MAX_ITER = 200
XTOL = 1e-10


@dataclass
class LsqResult:
    params: np.ndarray
    covariance: np.ndarray
    residuals: np.ndarray
    n_iter: int
    converged: bool

    @property
    def cost(self):
        return float(self.residuals @ self.residuals)


def levenberg_marquardt(residual, jacobian, p0, max_iter=MAX_ITER, xtol=XTOL, lam0=1e-3):
    """Damped Gauss-Newton minimisation of ||residual(p)||^2.

    ``residual`` returns whitened residuals; ``jacobian`` their derivatives
    with shape (n_residuals, n_params). Damping is Marquardt's scaled
    diagonal. Stops when the step is below ``xtol`` relative to the
    parameters. The covariance is (J^T J)^-1 at the solution, unscaled.
    """
    p = np.array(p0, dtype=float)
    r = residual(p)
    cost = r @ r
    lam = lam0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        jac = jacobian(p)
        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag == 0] = 1.0
        while True:
            try:
                step = -np.linalg.solve(jtj + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                lam *= 10
                if lam > 1e16:
                    break
                continue
            trial = p + step
            r_trial = residual(trial)
            cost_trial = r_trial @ r_trial
            if cost_trial <= cost:
                break
            lam *= 10
            if lam > 1e16:
                break
        if lam > 1e16:
            converged = np.linalg.norm(grad) <= 1e-12 * max(1.0, cost)
            break
        small = np.linalg.norm(step) <= xtol * (np.linalg.norm(p) + xtol)
        p, r, cost = trial, r_trial, cost_trial
        lam = max(lam / 10, 1e-12)
        if small or cost == 0.0:
            converged = True
            break
    jac = jacobian(p)
    try:
        cov = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((len(p), len(p)), np.inf)
    return LsqResult(p, cov, r, it, converged)


# --- Rabi frequency from a time-domain record ---------------------------------

PAD_FACTOR = 8
PEAK_CONTRAST = 3.0


def extract_rabi_dft(times, populations):
    """Dominant oscillation frequency (Hz) of a uniformly sampled Rabi record.

    The mean-subtracted, Hann-windowed record is zero-padded and the peak of
    the magnitude spectrum refined by a parabola through the log-magnitudes of
    the three highest bins. The uncertainty is the half width at half maximum
    of the windowed peak. Returns ``(frequency, uncertainty)``.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(populations, dtype=float)
    if t.ndim != 1 or t.shape != y.shape or len(t) < 8:
        raise ValueError("need matching 1-D time and population arrays with >= 8 samples")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-6, atol=0):
        raise ValueError("extract_rabi_dft needs uniform sampling")
    dt = dt[0]
    n = len(y)
    y = y - y.mean()

    raw = np.abs(np.fft.rfft(y))[1:]
    median = np.median(raw)
    floor = 1e-12 * n * max(1.0, float(np.max(np.abs(populations))))
    if raw.max() <= floor or raw.max() < PEAK_CONTRAST * median:
        raise NoPeak("no spectral peak above 3x the median bin magnitude")

    nfft = PAD_FACTOR * n
    spec = np.abs(np.fft.rfft(y * np.hanning(n), nfft))
    freqs = np.fft.rfftfreq(nfft, dt)
    k = int(np.argmax(spec[PAD_FACTOR:])) + PAD_FACTOR  # skip the DC lobe
    if k + 1 >= len(spec):
        raise NoPeak("spectral peak at the Nyquist edge")
    la, lb, lc = np.log(spec[k - 1:k + 2] + 1e-300)
    denom = la - 2 * lb + lc
    shift = 0.5 * (la - lc) / denom if denom != 0 else 0.0
    df = freqs[1] - freqs[0]
    freq = freqs[k] + shift * df
    if freq * n * dt < 2:
        raise NoPeak("record holds fewer than two oscillation periods")

    half = spec[k] / 2
    lo = k
    while lo > 0 and spec[lo] > half:
        lo -= 1
    hi = k
    while hi < len(spec) - 1 and spec[hi] > half:
        hi += 1
    uncertainty = 0.5 * (hi - lo) * df / 2
    return float(freq), float(uncertainty)


# --- Azimuthal calibration from park-angle Rabi frequencies --------------------

OFFSET_GRID = 720
AMBIGUITY_RATIO = 1.05
AMBIGUITY_SEPARATION = np.radians(10.0)


@dataclass
class Calibration:
    """Result of fitting the drive-amplitude model to park-angle Rabi data."""

    offset: float
    scale: float
    offset_stderr: float
    scale_stderr: float
    residual_rms: float
    config: object
    trace: effphase.PhaseTrace = field(repr=False)


def _angular_coverage(angles):
    """Arc covered by a set of angles: 2 pi minus the largest circular gap."""
    a = np.sort(np.mod(angles, 2 * np.pi))
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
    return 2 * np.pi - gaps.max()


def _amplitude_shape(cfg, park, offset):
    """|bracket| of the drive model at azimuth park - offset (normalised to Omega0 = 2)."""
    return np.abs(effphase.drive_offdiag(cfg.theta_nv, cfg.theta_mw, park - offset, 2.0))


def reconstruct_phase(cfg_template, rabi_measurements, theta_mw_guess=None, trace_points=721):
    """Fit the azimuthal calibration and normalisation to normalised Rabi frequencies.

    ``rabi_measurements`` is a sequence of ``(park_angle, normalized_frequency)``.
    The model is ``scale * |drive(park - offset)|`` at fixed theta_nv and
    theta_mw (``theta_mw_guess`` overrides the template). The offset is
    located on a 0.5 deg grid (scale solved linearly) and polished with
    Levenberg-Marquardt. Returns a :class:`Calibration` whose trace is the
    implied effective phase over one turn of the motor.
    """
    cfg = cfg_template if theta_mw_guess is None else cfg_template.replace(theta_mw=theta_mw_guess)
    data = np.asarray(rabi_measurements, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("rabi_measurements must be (park_angle, frequency) pairs")
    park, freq = data[:, 0], data[:, 1]
    if len(park) < 8 or _angular_coverage(park) <= np.pi:
        raise ValueError("need at least 8 park angles spanning more than 180 deg")

    grid = np.linspace(0, 2 * np.pi, OFFSET_GRID, endpoint=False)
    shapes = _amplitude_shape(cfg, park[None, :], grid[:, None])
    norms = np.sum(shapes * shapes, axis=1)
    scales = np.where(norms > 0, shapes @ freq / np.where(norms > 0, norms, 1), 0.0)
    ssr = np.sum((freq[None, :] - scales[:, None] * shapes) ** 2, axis=1)

    best = int(np.argmin(ssr))
    is_min = (ssr <= np.roll(ssr, 1)) & (ssr <= np.roll(ssr, -1))
    sep = np.abs(np.angle(np.exp(1j * (grid - grid[best]))))
    rivals = is_min & (sep > AMBIGUITY_SEPARATION)
    if np.any(rivals):
        runner_up = ssr[rivals].min()
        if runner_up <= AMBIGUITY_RATIO * ssr[best] + 1e-24 * max(1.0, freq @ freq):
            raise AmbiguousCalibration(
                f"offsets {np.degrees(grid[best]):.1f} deg and "
                f"{np.degrees(grid[rivals][np.argmin(ssr[rivals])]):.1f} deg fit equally well")

    def residual(p):
        return p[1] * _amplitude_shape(cfg, park, p[0]) - freq

    def jacobian(p):
        h = 1e-7
        d_off = (_amplitude_shape(cfg, park, p[0] + h) - _amplitude_shape(cfg, park, p[0] - h)) / (2 * h)
        return np.column_stack([p[1] * d_off, _amplitude_shape(cfg, park, p[0])])

    fit = levenberg_marquardt(residual, jacobian, [grid[best], scales[best]])
    if not fit.converged:
        raise NoConvergence("calibration fit did not converge")
    dof = max(1, len(park) - 2)
    s2 = fit.cost / dof
    stderr = np.sqrt(np.clip(np.diag(fit.covariance) * s2, 0, None))
    offset = float(np.mod(fit.params[0], 2 * np.pi))
    calibrated = cfg.replace(phi_cal=offset)
    trace = effphase.phase_trace(calibrated, 0.0, 2 * np.pi, trace_points)
    return Calibration(offset=offset, scale=float(fit.params[1]), offset_stderr=float(stderr[0]),
                       scale_stderr=float(stderr[1]), residual_rms=float(np.sqrt(fit.cost / len(park))),
                       config=calibrated, trace=trace)


# --- Spin-echo fringes ----------------------------------------------------------

PHASE_GRID = 16


@dataclass
class FitResult:
    """Fitted fringe A cos^2(2 pi f0 B - dphi) + C; dphi reported in (-pi/2, pi/2]."""

    f0: float
    delta_phi: float
    f0_stderr: float
    delta_phi_stderr: float
    amplitude: float = 1.0
    offset: float = 0.0
    amplitude_stderr: float = 0.0
    offset_stderr: float = 0.0
    residual_rms: float = 0.0
    converged: bool = True
    n_iter: int = 0

    def to_text(self):
        """Structured ``key = value`` lines."""
        lines = [f"{k} = {_fmt_value(v)}" for k, v in self.__dict__.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        values = {}
        for line in text.splitlines():
            if "=" not in line or line.lstrip().startswith("#"):
                continue
            key, val = (s.strip() for s in line.split("=", 1))
            values[key] = val
        kwargs = {}
        for name, typ in cls.__annotations__.items():
            if name not in values:
                continue
            raw = values[name]
            if typ is bool:
                kwargs[name] = raw == "true"
            elif typ is int:
                kwargs[name] = int(raw)
            else:
                kwargs[name] = float(raw)
        return cls(**kwargs)


def _fmt_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def fringe_model(b, f0, dphi, amplitude=1.0, offset=0.0):
    return amplitude * np.cos(2 * np.pi * f0 * b - dphi) ** 2 + offset


def _dft_frequency(data):
    """Fringe frequency estimate from a zero-padded DFT (cos^2 oscillates at 2 f0)."""
    b = data.b_x
    order = np.argsort(b)
    b, p = b[order], data.population[order]
    span = b[-1] - b[0]
    if span <= 0:
        raise IllConditioned("fringe data need at least two distinct B_x values")
    n = len(b)
    grid = np.linspace(b[0], b[-1], n)
    y = np.interp(grid, b, p)
    y = y - y.mean()
    nfft = 64 * n
    spec = np.abs(np.fft.rfft(y, nfft))
    freqs = np.fft.rfftfreq(nfft, grid[1] - grid[0])
    k = int(np.argmax(spec[1:])) + 1
    return freqs[k] / 2


class _FringeProblem:
    """Shared-f0 fringe model over several datasets; parameters
    [f0, dphi_1..dphi_m, (A_1..A_m, C_1..C_m)]."""

    def __init__(self, datasets, float_contrast):
        self.datasets = datasets
        self.m = len(datasets)
        self.float_contrast = float_contrast
        self.b = [d.b_x for d in datasets]
        self.p = [d.population for d in datasets]
        self.w = [np.ones(len(d)) if d.sigma is None else 1.0 / d.sigma for d in datasets]
        self.weighted = all(d.sigma is not None for d in datasets)

    def unpack(self, params):
        m = self.m
        f0 = params[0]
        dphi = params[1:1 + m]
        if self.float_contrast:
            amp = params[1 + m:1 + 2 * m]
            off = params[1 + 2 * m:1 + 3 * m]
        else:
            amp, off = np.ones(m), np.zeros(m)
        return f0, dphi, amp, off

    def residual(self, params):
        f0, dphi, amp, off = self.unpack(params)
        return np.concatenate([
            w * (fringe_model(b, f0, d, a, c) - p)
            for b, p, w, d, a, c in zip(self.b, self.p, self.w, dphi, amp, off)])

    def jacobian(self, params):
        f0, dphi, amp, off = self.unpack(params)
        m = self.m
        n_par = len(params)
        blocks = []
        for k, (b, w) in enumerate(zip(self.b, self.w)):
            arg = 2 * np.pi * f0 * b - dphi[k]
            dcos2 = -np.sin(2 * arg)  # d/d(arg) of cos^2(arg)
            jac = np.zeros((len(b), n_par))
            jac[:, 0] = amp[k] * dcos2 * 2 * np.pi * b
            jac[:, 1 + k] = -amp[k] * dcos2
            if self.float_contrast:
                jac[:, 1 + m + k] = np.cos(arg) ** 2
                jac[:, 1 + 2 * m + k] = 1.0
            blocks.append(w[:, None] * jac)
        return np.vstack(blocks)


def fit_fringes_shared(datasets, f0_init=None, dphi_init=None, float_contrast=False):
    """Fit a family of fringe datasets with one common f0 and per-dataset phases.

    Inverse-variance weighting when every dataset carries sigmas, uniform
    otherwise (standard errors then scaled by the reduced chi-square).
    ``f0_init`` fixes the sign convention of the reported phases; without it
    the DFT estimate (positive) is used.
    """
    datasets = list(datasets)
    if not datasets:
        raise ValueError("no datasets to fit")
    prob = _FringeProblem(datasets, float_contrast)
    m = prob.m
    if f0_init is None:
        f0_init = float(np.mean([_dft_frequency(d) for d in datasets]))
    if dphi_init is None:
        dphi_init = [None] * m
    elif np.ndim(dphi_init) == 0:
        dphi_init = [float(dphi_init)] * m

    # Per-dataset phase starts from a 16-point grid at the initial f0.
    phase_grid = -np.pi / 2 + np.pi * np.arange(PHASE_GRID) / PHASE_GRID
    starts = []
    for d, init in zip(datasets, dphi_init):
        if init is not None:
            starts.append(init)
            continue
        model = fringe_model(d.b_x[None, :], f0_init, phase_grid[:, None])
        if float_contrast:
            # best linear (A, C) per grid phase; A < 0 is the same fringe shifted by pi/2
            ssr = []
            for row in model:
                design = np.column_stack([row, np.ones_like(row)])
                coef, *_ = np.linalg.lstsq(design, d.population, rcond=None)
                ssr.append(np.sum((design @ coef - d.population) ** 2) if coef[0] > 0 else np.inf)
            ssr = np.array(ssr)
        else:
            ssr = np.sum((model - d.population[None, :]) ** 2, axis=1)
        starts.append(phase_grid[int(np.argmin(ssr))])
    p0 = [f0_init, *starts]
    if float_contrast:
        p0 += [1.0] * m + [0.0] * m

    fit = levenberg_marquardt(prob.residual, prob.jacobian, p0)
    if float_contrast and fit.converged and np.any(fit.params[1 + m:1 + 2 * m] < 0):
        # A cos^2(x - d) + C = -A cos^2(x - d - pi/2) + (C + A): move to A > 0 and re-polish
        p1 = fit.params.copy()
        neg = np.flatnonzero(p1[1 + m:1 + 2 * m] < 0)
        p1[1 + 2 * m + neg] += p1[1 + m + neg]
        p1[1 + m + neg] *= -1
        p1[1 + neg] += np.pi / 2
        fit = levenberg_marquardt(prob.residual, prob.jacobian, p1)
    if not fit.converged:
        raise NoConvergence("fringe fit did not converge")
    params = fit.params
    f0, dphi, amp, off = prob.unpack(params)
    for d in datasets:
        period = 1.0 / (2 * abs(f0)) if f0 != 0 else np.inf
        if np.ptp(d.b_x) < 0.25 * period:
            raise IllConditioned(
                f"B_x span {np.ptp(d.b_x):.3g} T is under a quarter of the fringe period {period:.3g} T")

    n_res = len(fit.residuals)
    cov = fit.covariance
    if not prob.weighted:
        cov = cov * (fit.cost / max(1, n_res - len(params)))
    stderr = np.sqrt(np.clip(np.diag(cov), 0, None))
    raw_res = [fringe_model(b, f0, dk, a, c) - p
               for b, p, dk, a, c in zip(prob.b, prob.p, dphi, amp, off)]
    results = []
    for k in range(m):
        results.append(FitResult(
            f0=float(f0),
            delta_phi=effphase.wrap_half_pi(dphi[k]),
            f0_stderr=float(stderr[0]),
            delta_phi_stderr=float(stderr[1 + k]),
            amplitude=float(amp[k]),
            offset=float(off[k]),
            amplitude_stderr=float(stderr[1 + m + k]) if float_contrast else 0.0,
            offset_stderr=float(stderr[1 + 2 * m + k]) if float_contrast else 0.0,
            residual_rms=float(np.sqrt(np.mean(raw_res[k] ** 2))),
            converged=bool(fit.converged),
            n_iter=int(fit.n_iter),
        ))
    return results


def fit_fringes(data, f0_init=None, dphi_init=None, float_contrast=False):
    """Fit one fringe dataset with A cos^2(2 pi f0 B_x - dphi) + C.

    By default A = 1 and C = 0 are frozen (ideal readout); set
    ``float_contrast`` for noisy data with unknown contrast.
    """
    return fit_fringes_shared([data], f0_init, dphi_init, float_contrast)[0]


def synthetic_fringe(b_values, f0, delta_phi, trials=0, rng=None, amplitude=1.0, offset=0.0):
    """Model fringe with optional binomial shot noise (used for calibration studies)."""
    from .pulsesim import shot_noise

    b = np.asarray(b_values, dtype=float)
    p = np.clip(fringe_model(b, f0, delta_phi, amplitude, offset), 0.0, 1.0)
    if trials:
        rng = np.random.default_rng(rng)
        p, sigma = shot_noise(p, trials, rng)
        return FringeDataset(b, p, sigma)
    return FringeDataset(b, p)
