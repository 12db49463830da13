"""Matplotlib rendering of experiment outputs (PNG next to the CSVs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .receiver import RdMap
from .units import db

_RC = {
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "axes.titlesize": 10,
}


def rdmap_figure(rdm: RdMap, path, detections=None, truth=None, span_db=70.0,
                 title="range-Doppler map"):
    """Render an RD map in dB with optional detection / truth markers.

    ``detections`` is an iterable of Detection records; ``truth`` an
    iterable of (range_m, velocity_mps) pairs.
    """
    p = rdm.power
    floor = p.max() / 10 ** (span_db / 10.0)
    img = db(np.maximum(p, floor))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.2))
        extent = [
            rdm.velocity_axis_mps[0],
            rdm.velocity_axis_mps[-1],
            rdm.range_axis_m[0],
            rdm.range_axis_m[-1],
        ]
        im = ax.imshow(img, origin="lower", aspect="auto", extent=extent,
                       cmap="viridis")
        fig.colorbar(im, ax=ax, label="power [dB]")
        if detections:
            vr = [
                (
                    d.doppler_bin * rdm.wavelength / (2.0 * rdm.m_fft * rdm.pri),
                    d.range_bin * rdm.range_axis_m[0],
                )
                for d in detections
            ]
            if vr:
                ax.scatter([v for v, _ in vr], [r for _, r in vr], s=60,
                           facecolors="none", edgecolors="r", label="detections")
        if truth:
            ax.scatter([v for _, v in truth], [r for r, _ in truth], marker="x",
                       c="w", s=40, label="truth")
        if detections or truth:
            ax.legend(loc="upper right")
        ax.set_xlabel("velocity [m/s]")
        ax.set_ylabel("range [m]")
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def pd_curves_figure(path, range_m, curves: dict, title="detection probability"):
    """``curves`` maps label -> (p_d, ci_low, ci_high) arrays."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for label, (pd_, lo, hi) in curves.items():
            line, = ax.plot(range_m, pd_, marker="o", ms=3, label=label)
            ax.fill_between(range_m, lo, hi, alpha=0.2, color=line.get_color())
        ax.set_xlabel("range [m]")
        ax.set_ylabel("P_d")
        ax.set_ylim(-0.02, 1.02)
        ax.axhline(0.9, color="k", ls=":", lw=0.8)
        ax.legend()
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def min_rcs_figure(path, range_m, curves: dict, title="minimum detectable RCS"):
    """``curves`` maps label -> sigma* in dBsm (NaN/inf gaps allowed)."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for label, vals in curves.items():
            v = np.array(vals, dtype=float)
            v[~np.isfinite(v)] = np.nan
            ax.plot(range_m, v, label=label)
        ax.set_xlabel("range [m]")
        ax.set_ylabel("sigma* [dBsm]")
        ax.legend(fontsize=7)
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def metric_sweep_figure(path, n_tau, w_star, sigma_star_dbsm, f_db):
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(3, 1, figsize=(6.0, 7.5), sharex=True)
        axes[0].plot(n_tau, w_star)
        axes[0].set_ylabel("w*")
        axes[0].set_yscale("log")
        axes[1].plot(n_tau, sigma_star_dbsm)
        axes[1].set_ylabel("sigma* [dBsm]")
        axes[2].plot(n_tau, f_db)
        axes[2].set_ylabel("F [dB]")
        axes[2].set_xlabel("delay bin")
        axes[0].set_title("per-bin weight, minimum RCS and detectability")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def sequence_figure(path, codes):
    """Plot the cycle-summed autocorrelations of a code book."""
    from .sequences import acf

    rh = acf(codes.a_high) + acf(codes.b_high)
    rl = acf(codes.a_low) + acf(codes.b_low)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 1, figsize=(6.0, 5.0))
        lags_h = np.arange(-(codes.high_len - 1), codes.high_len)
        lags_l = np.arange(-(codes.low_len - 1), codes.low_len)
        axes[0].stem(lags_h, rh)
        axes[0].set_ylabel("acf sum, high pair")
        axes[1].stem(lags_l, rl)
        axes[1].set_ylabel("acf sum, low pair")
        axes[1].set_xlabel("lag [chips]")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
