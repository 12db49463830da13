"""Monostatic channel model: point targets, self-interference, noise.

The receiver shares the aperture with the transmitter, so it is blanked for
the first H + N_r chips of every PRI and then listens while the low-power
segment is still on air.  Residual self-interference after cancellation is
modeled as white noise of power |beta|^2 * P_l confined to the low-power
segment; thermal noise covers the whole listening window.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .units import SPEED_OF_LIGHT, undb
from .waveform import PulseConfig, TransmitPri, build_pri
from .sequences import SequenceSet

__all__ = [
    "Target",
    "ChannelConfig",
    "ReceivedPri",
    "channel_gain",
    "delay_bin",
    "simulate_rx",
    "simulate_cpi",
    "default_channel",
]


@dataclass(frozen=True)
class Target:
    """Point scatterer with range (m), radial velocity (m/s, closing
    positive) and radar cross-section (m^2, linear)."""

    range_m: float
    velocity_mps: float = 0.0
    rcs_sqm: float = 0.1

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError("target range must be positive")
        if self.rcs_sqm <= 0:
            raise ValueError("target RCS must be positive")


@dataclass(frozen=True)
class ChannelConfig:
    """Antenna gains, noise densities and self-interference level.

    ``sic_db`` is the achieved cancellation: the residual leakage power is
    P_l * 10**(-sic_db/10).  ``noise_figure_db`` inflates the thermal floor.
    """

    g_tx: float = 100.0
    g_rx: float = 100.0
    wavelength: float = SPEED_OF_LIGHT / 28e9
    noise_psd: float = 10 ** (-174.0 / 10.0) * 1e-3
    noise_figure_db: float = 5.0
    sic_db: float = 110.0
    fractional_delay: bool = False

    @property
    def beta_sq(self) -> float:
        """Residual self-interference power gain |beta|^2."""
        return float(undb(-self.sic_db))

    def noise_power(self, bandwidth: float) -> float:
        """Thermal noise power over ``bandwidth``, noise figure included."""
        return self.noise_psd * bandwidth * float(undb(self.noise_figure_db))


def default_channel(cfg: PulseConfig, sic_db: float = 110.0) -> ChannelConfig:
    return ChannelConfig(wavelength=cfg.wavelength, sic_db=sic_db)


def channel_gain(target: Target, ch: ChannelConfig) -> float:
    """Two-way power gain |alpha|^2 = G_t G_r lambda^2 sigma / ((4 pi)^3 R^4)."""
    return (
        ch.g_tx
        * ch.g_rx
        * ch.wavelength**2
        * target.rcs_sqm
        / ((4.0 * np.pi) ** 3 * target.range_m**4)
    )


def delay_bin(target: Target, cfg: PulseConfig) -> int:
    """Round-trip delay of the target in whole chips."""
    return int(round(2.0 * target.range_m / (SPEED_OF_LIGHT * cfg.chip)))


@dataclass(frozen=True)
class ReceivedPri:
    """One received PRI at the chip rate (zeros during receiver dead time)."""

    samples: np.ndarray
    pri_index: int


def _complex_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


def _echo(tx: np.ndarray, n_tau: int, rx_start: int, frac: float = 0.0) -> np.ndarray:
    """Delayed copy of the transmit signal, gated by the receiver window."""
    m = len(tx)
    out = np.zeros(m, dtype=np.complex128)
    lo = max(rx_start, n_tau)
    out[lo:] = tx[lo - n_tau : m - n_tau]
    if frac:
        # first-order interpolation toward the next bin
        nxt = np.zeros(m, dtype=np.complex128)
        lo2 = max(rx_start, n_tau + 1)
        nxt[lo2:] = tx[lo2 - n_tau - 1 : m - n_tau - 1]
        out = (1.0 - frac) * out + frac * nxt
    return out


def simulate_rx(
    tx: TransmitPri,
    targets: list[Target],
    cfg: PulseConfig,
    ch: ChannelConfig,
    rng: np.random.Generator,
    phases: np.ndarray | None = None,
) -> ReceivedPri:
    """Propagate one PRI through the channel.

    Each target contributes a delayed, gated copy of the transmit signal
    scaled by sqrt(channel_gain) * exp(j phi) and rotated by the slow-time
    Doppler phase of pulse ``tx.pri_index``.  ``phases`` pins the per-target
    reflection phases (one draw per CPI); without it they are drawn here.

    Returns
    -------
    ReceivedPri
        Chip samples; indices below H + N_r are identically zero.
    """
    m = cfg.m_total
    k = tx.pri_index
    y = np.zeros(m, dtype=np.complex128)
    if phases is None:
        phases = rng.uniform(0.0, 2.0 * np.pi, size=len(targets))
    for tgt, phi in zip(targets, phases):
        exact = 2.0 * tgt.range_m / (SPEED_OF_LIGHT * cfg.chip)
        n_tau = int(round(exact))
        frac = 0.0
        if ch.fractional_delay:
            n_tau = int(np.floor(exact))
            frac = exact - n_tau
        if n_tau < 1 or n_tau > cfg.n_bins:
            raise ValueError(
                f"target at {tgt.range_m} m maps to delay bin {n_tau}, outside "
                f"the modeled span 1..{cfg.n_bins}"
            )
        f_d = 2.0 * tgt.velocity_mps / ch.wavelength
        amp = np.sqrt(channel_gain(tgt, ch)) * np.exp(1j * phi)
        slow = np.exp(2j * np.pi * f_d * k * cfg.pri)
        y += amp * slow * _echo(tx.samples, n_tau, cfg.rx_start, frac)

    beta = np.sqrt(ch.beta_sq)
    lo = cfg.rx_start
    y[lo : lo + cfg.low_len] += (
        beta * np.sqrt(cfg.p_low) * _complex_noise(rng, cfg.low_len)
    )
    sigma_n = np.sqrt(ch.noise_power(cfg.bandwidth))
    y[lo:] += sigma_n * _complex_noise(rng, m - lo)
    return ReceivedPri(samples=y, pri_index=k)


def simulate_cpi(
    codes: SequenceSet,
    targets: list[Target],
    cfg: PulseConfig,
    ch: ChannelConfig,
    rng: np.random.Generator,
) -> list[ReceivedPri]:
    """Simulate one coherent processing interval (K pulses).

    Target reflection phases are drawn once for the whole CPI; pulse-to-pulse
    evolution comes only from the Doppler phase ramp.
    """
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(targets))
    out = []
    for k in range(cfg.num_pulses):
        tx = build_pri(cfg, codes, k)
        out.append(simulate_rx(tx, targets, cfg, ch, rng, phases=phases))
    return out


def with_sic(ch: ChannelConfig, sic_db: float) -> ChannelConfig:
    """Copy of the channel with a different cancellation level."""
    return replace(ch, sic_db=sic_db)
