"""Experiment execution: one function per config ``kind``, plus run manifests and comparison."""

import configparser
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analysis, effphase, pulsesim
from .datasets import FringeDataset, read_csv_columns, write_csv
from .errors import MissingOutput

MANIFEST = "manifest.txt"


def _map(func, items, threads):
    """Ordered map, optionally over a process pool."""
    items = list(items)
    if threads and threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def _tag(theta):
    return f"{theta:g}"


def _b_grid(cfg, rig):
    if cfg.b_min_tesla is not None:
        return np.linspace(cfg.b_min_tesla, cfg.b_max_tesla, cfg.b_points)
    f0 = pulsesim.fringe_frequency(rig, np.radians(cfg.phi_start_deg), cfg.tau_us * 1e-6)
    if f0 == 0:
        raise ValueError("fringe frequency is zero (no rotation?); set b_min_tesla/b_max_tesla")
    return np.linspace(0.0, 1.0 / (2 * abs(f0)), cfg.b_points)


# --- phase-trace --------------------------------------------------------------------

def run_phase_trace(cfg, out, threads=1):
    outputs, traces, rows = [], {}, []
    start = np.radians(cfg.phi_start_deg)
    end = np.radians(cfg.phi_end_deg) if cfg.phi_end_deg is not None else start + 2 * np.pi
    for tn in cfg.theta_nv_values:
        for tm in cfg.theta_mw_values:
            rig = cfg.rig(theta_mw_deg=tm, theta_nv_deg=tn)
            trace = effphase.phase_trace(rig, start, end, cfg.n_points)
            name = f"trace_nv{_tag(tn)}_mw{_tag(tm)}.csv"
            trace.to_csv(out / name)
            outputs.append(name)
            traces[rf"$\theta_{{NV}}$={tn:g}, $\theta_{{mw}}$={tm:g}"] = trace
            rows.append((tn, tm, effphase.winding_number(rig)))
    write_csv(out / "windings.csv", ["theta_nv_deg", "theta_mw_deg", "winding"], rows)
    outputs.append("windings.csv")
    if cfg.figures:
        from .plotting import plot_phase_traces
        plot_phase_traces(traces, out / "fig1d_phase.png")
        outputs.append("fig1d_phase.png")
    return outputs


# --- rabi-scan / reconstruct ------------------------------------------------------------

def _rabi_point(args):
    rig, park, t_max, periods, n_samples = args
    omega = float(effphase.rabi_amplitude(rig, park))
    span = t_max if t_max is not None else periods * 2 * np.pi / omega
    t, pop = pulsesim.rabi_scan(rig, park, span, n_samples)
    freq, err = analysis.extract_rabi_dft(t, pop)
    return freq, err, omega / (2 * np.pi)


def _rabi_measurements(cfg, theta_mw, threads):
    rig = cfg.rig(theta_mw_deg=theta_mw)
    parks = np.radians(cfg.park_angles_deg)
    t_max = cfg.t_max_us * 1e-6 if cfg.t_max_us is not None else None
    results = _map(_rabi_point, [(rig, p, t_max, cfg.rabi_periods, cfg.n_samples) for p in parks],
                   threads)
    return rig, parks, np.array(results)


def run_rabi_scan(cfg, out, threads=1):
    rows, model_rows, plot_rows = [], [], {}
    for tm in cfg.theta_mw_values:
        rig, parks, res = _rabi_measurements(cfg, tm, threads)
        norm = rig.omega0 / 2 / (2 * np.pi)  # largest possible Rabi frequency (Hz)
        dense = np.radians(np.linspace(0.0, 360.0, 361))
        trace = effphase.phase_trace(rig, dense[0], dense[-1], len(dense))
        model_phase_at = np.interp(np.mod(parks, 2 * np.pi), trace.phi, trace.phi_eff)
        for p, (f, e, m), ph in zip(parks, res, model_phase_at):
            rows.append((tm, float(np.degrees(p)), f, e, m, f / norm, m / norm, float(ph)))
        for ang, w, ph in zip(trace.phi, trace.omega, trace.phi_eff):
            model_rows.append((tm, float(np.degrees(ang)), float(w / (rig.omega0 / 2)), float(ph)))
        plot_rows[tm] = dict(park_deg=np.degrees(parks), normalized=res[:, 0] / norm,
                             normalized_err=res[:, 1] / norm, model_deg=np.degrees(trace.phi),
                             model_normalized=trace.omega / (rig.omega0 / 2), model_phase=trace.phi_eff)
    write_csv(out / "rabi_scan.csv",
              ["theta_mw_deg", "park_angle_deg", "rabi_hz", "rabi_err_hz", "model_hz",
               "normalized", "model_normalized", "phi_eff_model_rad"], rows)
    write_csv(out / "rabi_model.csv",
              ["theta_mw_deg", "phi_deg", "model_normalized", "phi_eff_rad"], model_rows)
    outputs = ["rabi_scan.csv", "rabi_model.csv"]
    if cfg.figures:
        from .plotting import plot_rabi_scan
        tau_deg = np.degrees(2 * np.pi * cfg.rotation_hz * cfg.tau_us * 1e-6)
        pulses = [cfg.phi_start_deg + k * tau_deg / 2 for k in range(3)]
        plot_rabi_scan(plot_rows, out / "fig2_rabi.png", pulse_angles=[p % 360 for p in pulses])
        outputs.append("fig2_rabi.png")
    return outputs


def run_reconstruct(cfg, out, threads=1):
    tm = cfg.theta_mw_deg
    rig, parks, res = _rabi_measurements(cfg, tm, threads)
    freqs = res[:, 0]
    if cfg.rabi_noise:
        rng = np.random.default_rng(cfg.seed)
        freqs = freqs * (1 + cfg.rabi_noise * rng.standard_normal(len(freqs)))
    normalized = freqs / freqs.max()
    template = rig.replace(phi_cal=0.0)
    cal = analysis.reconstruct_phase(template, np.column_stack([parks, normalized]))
    text = "\n".join([
        f"offset_deg = {np.degrees(cal.offset):.17g}",
        f"offset_stderr_deg = {np.degrees(cal.offset_stderr):.17g}",
        f"scale = {cal.scale:.17g}",
        f"scale_stderr = {cal.scale_stderr:.17g}",
        f"residual_rms = {cal.residual_rms:.17g}",
        f"configured_offset_deg = {cfg.phi_cal_deg:.17g}",
        f"theta_mw_deg = {tm:.17g}",
    ]) + "\n"
    (out / "calibration.txt").write_text(text)
    cal.trace.to_csv(out / "reconstructed_trace.csv")
    write_csv(out / "rabi_measurements.csv", ["park_angle_deg", "normalized"],
              [(float(np.degrees(p)), float(f)) for p, f in zip(parks, normalized)])
    outputs = ["calibration.txt", "reconstructed_trace.csv", "rabi_measurements.csv"]
    if cfg.figures:
        from .plotting import plot_rabi_scan
        model = cal.scale * np.abs(effphase.offdiag(cal.config, cal.trace.phi)) / (rig.omega0 / 2)
        rows = {tm: dict(park_deg=np.degrees(parks), normalized=normalized,
                         normalized_err=np.zeros_like(normalized), model_deg=np.degrees(cal.trace.phi),
                         model_normalized=model, model_phase=cal.trace.phi_eff)}
        plot_rabi_scan(rows, out / "fig2_reconstruct.png")
        outputs.append("fig2_reconstruct.png")
    return outputs


# --- spin-echo ------------------------------------------------------------------------

def _echo_point(args):
    rig, phi_start, tau, pulse_mode, drive_model, dt_max = args
    sim = pulsesim.spin_echo(rig, phi_start, tau, pulse_mode=pulse_mode,
                             drive_model=drive_model, dt_max=dt_max)
    return sim.population_ms0, effphase.nonlinear_phase(rig, phi_start, tau)


def run_spin_echo(cfg, out, threads=1):
    phi_start, tau = np.radians(cfg.phi_start_deg), cfg.tau_us * 1e-6
    thetas = list(cfg.theta_mw_values)
    tasks = [(cfg.rig(theta_mw_deg=t), phi_start, tau, cfg.pulse_mode, cfg.drive_model, cfg.dt_max_s)
             for t in thetas]
    res = _map(_echo_point, tasks, threads)
    rows = [(t, p, d, float(np.cos(d) ** 2)) for t, (p, d) in zip(thetas, res)]
    write_csv(out / "spin_echo.csv", ["theta_mw_deg", "population", "delta_phi_rad", "cos2_delta_phi"], rows)
    outputs = ["spin_echo.csv"]
    if cfg.figures:
        from .plotting import plot_spin_echo
        plot_spin_echo(thetas, [r[1] for r in rows], [r[3] for r in rows], out / "spin_echo.png")
        outputs.append("spin_echo.png")
    return outputs


# --- fringe-scan / fit ------------------------------------------------------------------------

def _fringe_task(args):
    rig, phi_start, tau, b, trials, seed, pulse_mode, drive_model, dt_max = args
    return pulsesim.fringe_scan(rig, phi_start, tau, b, trials=trials, seed=seed,
                                pulse_mode=pulse_mode, drive_model=drive_model, dt_max=dt_max)


def _fit_family(datasets, shared, f0_init, float_contrast):
    if shared:
        return analysis.fit_fringes_shared(datasets, f0_init=f0_init, float_contrast=float_contrast)
    return [analysis.fit_fringes(d, f0_init=f0_init, float_contrast=float_contrast) for d in datasets]


def run_fringe_scan(cfg, out, threads=1):
    phi_start, tau = np.radians(cfg.phi_start_deg), cfg.tau_us * 1e-6
    thetas = list(cfg.theta_mw_values)
    rigs = [cfg.rig(theta_mw_deg=t) for t in thetas]
    b = _b_grid(cfg, rigs[0])
    tasks = [(rig, phi_start, tau, b, cfg.trials, cfg.seed + k, cfg.pulse_mode, cfg.drive_model,
              cfg.dt_max_s) for k, rig in enumerate(rigs)]
    datasets = _map(_fringe_task, tasks, threads)
    outputs = []
    for t, data in zip(thetas, datasets):
        name = f"fringe_mw{_tag(t)}.csv"
        data.to_csv(out / name)
        outputs.append(name)

    f0_pred = pulsesim.fringe_frequency(rigs[0], phi_start, tau)
    f0_init = cfg.f0_init if cfg.f0_init is not None else f0_pred
    fits = _fit_family(datasets, cfg.shared_f0, f0_init, cfg.float_contrast)
    model = [effphase.wrap_half_pi(effphase.nonlinear_phase(rig, phi_start, tau)) for rig in rigs]
    rows = []
    for t, fit, mdl in zip(thetas, fits, model):
        name = f"fit_mw{_tag(t)}.txt"
        (out / name).write_text(fit.to_text())
        outputs.append(name)
        rows.append((t, fit.delta_phi, fit.delta_phi_stderr, mdl, fit.f0))
    write_csv(out / "fringe_summary.csv",
              ["theta_mw_deg", "delta_phi_rad", "stderr_rad", "delta_phi_model_rad", "f0_per_tesla"], rows)
    outputs.append("fringe_summary.csv")
    if cfg.figures:
        from .plotting import plot_fringes
        summary = dict(theta=np.array(thetas), dphi=np.array([r[1] for r in rows]),
                       stderr=np.array([r[2] for r in rows]), model=np.array(model))
        plot_fringes(dict(zip(thetas, datasets)), dict(zip(thetas, fits)), summary, out / "fig3_fringes.png")
        outputs.append("fig3_fringes.png")
    return outputs


def fit_datasets(paths, out, shared=False, f0_init=None, float_contrast=False):
    """Fit fringe CSVs; writes ``fit_<stem>.txt`` per dataset and ``fit_summary.csv``."""
    paths = [Path(p) for p in paths]
    datasets = [FringeDataset.from_csv(p) for p in paths]
    fits = _fit_family(datasets, shared, f0_init, float_contrast)
    outputs, rows = [], []
    for path, fit in zip(paths, fits):
        name = f"fit_{path.stem}.txt"
        (out / name).write_text(fit.to_text())
        outputs.append(name)
        rows.append((path.name, fit.f0, fit.delta_phi, fit.delta_phi_stderr))
    write_csv(out / "fit_summary.csv", ["dataset", "f0_per_tesla", "delta_phi_rad", "stderr_rad"], rows)
    outputs.append("fit_summary.csv")
    return outputs


def run_fit(cfg, out, threads=1):
    base = cfg.base_dir()
    paths = [p if Path(p).is_absolute() else base / p for p in cfg.datasets]
    return fit_datasets(paths, out, shared=cfg.shared_f0, f0_init=cfg.f0_init,
                        float_contrast=cfg.float_contrast)


RUNNERS = {
    "phase-trace": run_phase_trace,
    "rabi-scan": run_rabi_scan,
    "reconstruct": run_reconstruct,
    "spin-echo": run_spin_echo,
    "fringe-scan": run_fringe_scan,
    "fit": run_fit,
}


def run_experiment(cfg, out_dir, threads=1):
    """Run ``cfg`` into ``out_dir``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = RUNNERS[cfg.kind](cfg, out, threads)
    return write_manifest(out, cfg, outputs)


# --- manifests ------------------------------------------------------------------------------

def write_manifest(out, cfg, outputs):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["run"] = {
        "kind": cfg.kind,
        "toolkit_version": __version__,
        "seed": str(cfg.seed),
        "config_hash": cfg.content_hash(),
    }
    parser["outputs"] = {f"output_{k:03d}": name for k, name in enumerate(outputs)}
    parser["config"] = {"text": "\n" + cfg.to_text().strip()}
    path = Path(out) / MANIFEST
    with open(path, "w") as fh:
        parser.write(fh)
    return path


def read_manifest(path):
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    if not path.exists():
        raise MissingOutput(f"manifest {path} not found")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read(path)
    outputs = [path.parent / v for _, v in sorted(parser["outputs"].items())]
    return dict(parser["run"]), outputs


def _numeric_table(path):
    if path.suffix == ".csv":
        return read_csv_columns(path)
    if path.suffix == ".txt":
        table = {}
        for line in path.read_text().splitlines():
            if "=" in line:
                key, val = (s.strip() for s in line.split("=", 1))
                try:
                    table[key] = np.array([float(val)])
                except ValueError:
                    table[key] = np.array([1.0 if val == "true" else 0.0 if val == "false" else np.nan])
        return table
    return None


def compare_runs(manifest_a, manifest_b):
    """Per-column differences between the tabular outputs of two runs.

    Returns ``(file, column, max_abs_diff, max_scaled_diff)`` rows, where the
    scaled difference is |a - b| / max(1, |a|, |b|) so quantities with large
    units (e.g. f0 per tesla) are judged relatively. Shape mismatches and
    columns present in only one run report ``inf``. Figures are skipped.
    """
    _, outs_a = read_manifest(manifest_a)
    _, outs_b = read_manifest(manifest_b)
    by_name_a = {p.name: p for p in outs_a}
    by_name_b = {p.name: p for p in outs_b}
    report = []
    for name in sorted(set(by_name_a) | set(by_name_b)):
        if name not in by_name_a or name not in by_name_b:
            report.append((name, "*", np.inf, np.inf))
            continue
        for p in (by_name_a[name], by_name_b[name]):
            if not p.exists():
                raise MissingOutput(f"output {p} listed in manifest but missing")
        ta, tb = _numeric_table(by_name_a[name]), _numeric_table(by_name_b[name])
        if ta is None:
            continue
        for col in sorted(set(ta) | set(tb)):
            if col not in ta or col not in tb or ta[col].shape != tb[col].shape:
                report.append((name, col, np.inf, np.inf))
                continue
            a, b = ta[col], tb[col]
            both_nan = np.isnan(a) & np.isnan(b)
            diff = np.where(both_nan, 0.0, np.abs(a - b))
            diff = np.where(np.isnan(diff), np.inf, diff)
            with np.errstate(invalid="ignore"):
                scale = np.fmax(1.0, np.fmax(np.abs(a), np.abs(b)))
            scaled = np.where(both_nan, 0.0, diff / np.where(np.isnan(scale), 1.0, scale))
            if diff.size == 0:
                report.append((name, col, 0.0, 0.0))
            else:
                report.append((name, col, float(diff.max()), float(scaled.max())))
    return report
