"""Figure rendering for the report path.

Figures are built on :class:`matplotlib.figure.Figure` directly, without
pyplot or a GUI backend. PNG metadata omits the software tag so reruns are
byte-identical.
"""

import functools

import matplotlib
import numpy as np
from matplotlib.figure import Figure

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "lines.linewidth": 1.2,
}

SINGLE_COLUMN = (3.4, 2.6)
DOUBLE_PANEL = (3.4, 4.6)


def _styled(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        with matplotlib.rc_context(RC):
            return func(*args, **kwargs)
    return wrapper


def _new_figure(size, nrows=1, sharex=False):
    fig = Figure(figsize=size, dpi=150)
    axes = fig.subplots(nrows, 1, sharex=sharex)
    return fig, np.atleast_1d(axes)


def save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})


@_styled
def plot_phase_traces(traces, path):
    """Effective phase against rotation angle; ``traces`` maps a label to a PhaseTrace."""
    fig, (ax,) = _new_figure(SINGLE_COLUMN)
    for label, trace in traces.items():
        ax.plot(np.degrees(trace.phi), trace.phi_eff / np.pi, label=label)
    ax.set_xlabel(r"rotation angle $\phi$ (deg)")
    ax.set_ylabel(r"$\phi_\mathrm{eff}$ ($\pi$ rad)")
    ax.legend(frameon=False)
    save(fig, path)


@_styled
def plot_rabi_scan(rows, path, pulse_angles=None):
    """Normalised Rabi frequency (top) and model effective phase (bottom) against park angle.

    ``rows`` maps theta_mw (deg) to a dict with arrays ``park_deg``,
    ``normalized``, ``normalized_err``, ``model_deg``, ``model_normalized``,
    ``model_phase``.
    """
    fig, (top, bottom) = _new_figure(DOUBLE_PANEL, nrows=2, sharex=True)
    for theta, r in rows.items():
        line, = top.plot(r["model_deg"], r["model_normalized"], label=f"{theta:g} deg")
        top.errorbar(r["park_deg"], r["normalized"], yerr=r["normalized_err"], fmt="o", ms=3,
                     color=line.get_color())
        bottom.plot(r["model_deg"], r["model_phase"] / np.pi, color=line.get_color())
    for angle in pulse_angles or ():
        for ax in (top, bottom):
            ax.axvline(angle, color="0.6", lw=0.6, ls="--")
    top.set_ylabel(r"$\Omega/\Omega_\mathrm{max}$")
    top.legend(frameon=False, title=r"$\theta_\mathrm{mw}$")
    bottom.set_xlabel("park angle (deg)")
    bottom.set_ylabel(r"$\phi_\mathrm{eff}$ ($\pi$ rad)")
    save(fig, path)


@_styled
def plot_fringes(datasets, fits, summary, path):
    """Fringes with fitted curves (top) and fitted phase against tilt angle (bottom).

    ``datasets`` and ``fits`` map theta_mw (deg) to FringeDataset / FitResult;
    ``summary`` holds arrays ``theta``, ``dphi``, ``stderr`` and ``model``.
    """
    fig, (top, bottom) = _new_figure(DOUBLE_PANEL, nrows=2)
    for theta, data in datasets.items():
        fit = fits[theta]
        b_dense = np.linspace(data.b_x.min(), data.b_x.max(), 200)
        curve = fit.amplitude * np.cos(2 * np.pi * fit.f0 * b_dense - fit.delta_phi) ** 2 + fit.offset
        line, = top.plot(b_dense * 1e6, curve, lw=0.8)
        top.errorbar(data.b_x * 1e6, data.population,
                     yerr=data.sigma if data.sigma is not None else None,
                     fmt="o", ms=2, color=line.get_color(), label=f"{theta:g} deg")
    top.set_xlabel(r"$B_x$ ($\mu$T)")
    top.set_ylabel(r"$P(m_S=0)$")
    top.legend(frameon=False, ncol=5, fontsize=5, loc="lower center", bbox_to_anchor=(0.5, 1.0))
    bottom.errorbar(summary["theta"], summary["dphi"], yerr=summary["stderr"], fmt="o", ms=3,
                    label="fit")
    bottom.plot(summary["theta"], summary["model"], "-", lw=0.8, label="model")
    bottom.set_xlabel(r"$\theta_\mathrm{mw}$ (deg)")
    bottom.set_ylabel(r"$\delta\phi$ (rad)")
    bottom.legend(frameon=False)
    save(fig, path)


@_styled
def plot_spin_echo(theta, population, model, path):
    fig, (ax,) = _new_figure(SINGLE_COLUMN)
    ax.plot(theta, population, "o", ms=3, label="simulated")
    ax.plot(theta, model, "-", label=r"$\cos^2\delta\phi$")
    ax.set_xlabel(r"$\theta_\mathrm{mw}$ (deg)")
    ax.set_ylabel(r"$P(m_S=0)$")
    ax.legend(frameon=False)
    save(fig, path)
