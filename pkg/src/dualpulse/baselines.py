"""Reference waveforms for comparison: pulsed LFM and OFDM sensing.

Both baselines reuse the chip grid, the channel model and the detector
geometry of the primary pipeline so that differences come from the
waveform alone.  The interference-censoring refinement of the CFAR
belongs to the proposed receiver; the reference chains run the
conventional cell-averaging rule (censoring disabled).

The LFM baseline is a half-duplex pulse of duration T_h at full power: it
has no self-interference but is blind while transmitting, and echoes that
begin before the receiver opens are discarded (the receiver is blanked,
so partially eclipsed chirps never reach the correlator).

The OFDM baseline transmits one fixed random unimodular pilot symbol
back-to-back at low power: it is never blind and sees no eclipsing (the
delay is circular over the repeated symbol), but residual
self-interference covers the whole window and the pilot's periodic
autocorrelation pedestal sits about 10*log10(M) dB below every peak.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelConfig, Target, channel_gain, _complex_noise
from .detection import CfarConfig, DetectionReport, hierarchical_detect
from .metrics import MetricParams, bin_range_m
from .receiver import RdMap, rd_map, _shift_correlate
from .units import SPEED_OF_LIGHT
from .waveform import PulseConfig

__all__ = [
    "LfmConfig",
    "OfdmSensingConfig",
    "lfm_chirp",
    "lfm_rd_map",
    "lfm_pipeline",
    "lfm_min_rcs",
    "ofdm_pilot",
    "ofdm_rd_map",
    "ofdm_pipeline",
    "ofdm_min_rcs",
]


# ---------------------------------------------------------------------------
# pulsed LFM
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LfmConfig:
    """Chirp parameters; ``None`` fields inherit from the pulse config
    (duration T_h, power P_h, full bandwidth)."""

    chirp_len: int | None = None
    power: float | None = None


def lfm_chirp(n: int) -> np.ndarray:
    """Unit-modulus linear chirp sweeping the full chip-rate bandwidth."""
    i = np.arange(n)
    return np.exp(1j * np.pi * (i - n / 2.0) ** 2 / n)


def lfm_rd_map(
    targets: list[Target],
    cfg: PulseConfig,
    ch: ChannelConfig,
    rng: np.random.Generator,
    lcfg: LfmConfig = LfmConfig(),
    m_fft: int | None = None,
) -> RdMap:
    """Simulate and process one CPI of the pulsed-LFM baseline."""
    n = lcfg.chirp_len if lcfg.chirp_len is not None else cfg.high_len
    power = lcfg.power if lcfg.power is not None else cfg.p_high
    m = cfg.m_total
    nb = cfg.n_bins
    rx0 = cfg.rx_start
    chirp = np.sqrt(power) * lfm_chirp(n)
    filt = np.zeros(m, dtype=np.complex128)
    filt[:n] = chirp
    norm = np.sqrt(power * n)
    sigma_n = np.sqrt(ch.noise_power(cfg.bandwidth))

    info = []
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(targets))
    for tgt, phi in zip(targets, phases):
        n_tau = int(round(2.0 * tgt.range_m / (SPEED_OF_LIGHT * cfg.chip)))
        if n_tau < 1 or n_tau > nb:
            raise ValueError(f"target at {tgt.range_m} m outside the modeled span")
        amp = np.sqrt(channel_gain(tgt, ch)) * np.exp(1j * phi)
        f_d = 2.0 * tgt.velocity_mps / ch.wavelength
        info.append((n_tau, amp, f_d))

    data = np.empty((nb, cfg.num_pulses), dtype=np.complex128)
    for k in range(cfg.num_pulses):
        y = np.zeros(m, dtype=np.complex128)
        for n_tau, amp, f_d in info:
            if n_tau < rx0:
                continue  # receiver blanked during transmit: echo discarded
            slow = np.exp(2j * np.pi * f_d * k * cfg.pri)
            y[n_tau : n_tau + n] += amp * slow * chirp
        y[rx0:] += sigma_n * _complex_noise(rng, m - rx0)
        data[:, k] = _shift_correlate(y, filt, nb) / norm
    power_map, m_vals = rd_map(data, m_fft)
    return RdMap(power_map, m_vals, cfg.chip, cfg.pri, ch.wavelength)


def lfm_pipeline(
    targets: list[Target],
    cfg: PulseConfig,
    ch: ChannelConfig,
    cfar: CfarConfig,
    rng: np.random.Generator,
    lcfg: LfmConfig = LfmConfig(),
) -> tuple[RdMap, DetectionReport]:
    rdm = lfm_rd_map(targets, cfg, ch, rng, lcfg)
    return rdm, hierarchical_detect(rdm, replace(cfar, censor_ratio=0.0))


def lfm_min_rcs(n_tau: int, rho: float, params: MetricParams) -> float:
    """Analytic minimum detectable RCS of the LFM baseline at a delay bin.

    Infinite inside the blind span (n_tau < H + N_r); otherwise the plain
    matched-filter SNR inversion at the bin range.
    """
    if n_tau < params.rx_start:
        return np.inf
    u = params.unit_gain / bin_range_m(n_tau, params) ** 4
    return rho * params.noise_power / (
        params.k_pulses * u * params.p_high * params.high_len
    )


# ---------------------------------------------------------------------------
# OFDM sensing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OfdmSensingConfig:
    """OFDM-style sensing parameters.

    ``power`` is the continuous transmit power (defaults to the low-power
    level of the dual-power waveform; set it explicitly to model a
    different sensing power split).  The pilot symbol is a fixed random
    unimodular sequence drawn once from ``pilot_seed``.
    """

    power: float | None = None
    pilot_seed: int = 20240


def ofdm_pilot(m: int, seed: int) -> np.ndarray:
    """Fixed unit-modulus pilot of length ``m`` (uniform random phases)."""
    rng = np.random.default_rng(seed)
    return np.exp(2j * np.pi * rng.uniform(size=m))


def ofdm_rd_map(
    targets: list[Target],
    cfg: PulseConfig,
    ch: ChannelConfig,
    rng: np.random.Generator,
    ocfg: OfdmSensingConfig = OfdmSensingConfig(),
    m_fft: int | None = None,
) -> RdMap:
    """Simulate and process one CPI of the OFDM sensing baseline.

    The same pilot repeats back-to-back, so a delayed echo inside any
    symbol-length window is a circular shift of the pilot and the matched
    filter is the circular correlator.  Self-interference and noise cover
    the whole window (full-duplex operation, no blind range).
    """
    m = cfg.m_total
    nb = cfg.n_bins
    p_tx = ocfg.power if ocfg.power is not None else cfg.p_low
    pilot = ofdm_pilot(m, ocfg.pilot_seed)
    f_pilot = np.conj(np.fft.fft(pilot))
    sigma_n = np.sqrt(ch.noise_power(cfg.bandwidth))
    beta = np.sqrt(ch.beta_sq)

    info = []
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(targets))
    for tgt, phi in zip(targets, phases):
        n_tau = int(round(2.0 * tgt.range_m / (SPEED_OF_LIGHT * cfg.chip)))
        if n_tau < 1 or n_tau > nb:
            raise ValueError(f"target at {tgt.range_m} m outside the modeled span")
        amp = np.sqrt(channel_gain(tgt, ch)) * np.exp(1j * phi)
        f_d = 2.0 * tgt.velocity_mps / ch.wavelength
        info.append((n_tau, amp, f_d))

    data = np.empty((nb, cfg.num_pulses), dtype=np.complex128)
    for k in range(cfg.num_pulses):
        y = np.zeros(m, dtype=np.complex128)
        for n_tau, amp, f_d in info:
            slow = np.exp(2j * np.pi * f_d * k * cfg.pri)
            y += amp * slow * np.sqrt(p_tx) * np.roll(pilot, n_tau)
        y += beta * np.sqrt(p_tx) * _complex_noise(rng, m)
        y += sigma_n * _complex_noise(rng, m)
        corr = np.fft.ifft(np.fft.fft(y) * f_pilot) / np.sqrt(float(m))
        data[:, k] = corr[1 : nb + 1]
    power_map, m_vals = rd_map(data, m_fft)
    return RdMap(power_map, m_vals, cfg.chip, cfg.pri, ch.wavelength)


def ofdm_pipeline(
    targets: list[Target],
    cfg: PulseConfig,
    ch: ChannelConfig,
    cfar: CfarConfig,
    rng: np.random.Generator,
    ocfg: OfdmSensingConfig = OfdmSensingConfig(),
) -> tuple[RdMap, DetectionReport]:
    rdm = ofdm_rd_map(targets, cfg, ch, rng, ocfg)
    return rdm, hierarchical_detect(rdm, replace(cfar, censor_ratio=0.0))


def ofdm_min_rcs(
    n_tau: int, rho: float, params: MetricParams, p_tx: float | None = None
) -> float:
    """Analytic minimum detectable RCS of the OFDM baseline at a delay bin.

    The floor is thermal noise plus residual self-interference; processing
    gain is the full symbol length at the sensing power.
    """
    if p_tx is None:
        p_tx = params.p_low
    m = params.high_len + params.recovery_len + params.low_len + params.silent_len
    u = params.unit_gain / bin_range_m(n_tau, params) ** 4
    floor = params.noise_power + params.beta_sq * p_tx
    return rho * floor / (params.k_pulses * u * p_tx * m)
