"""Dual-power pulse timing parameters and transmit-signal assembly.

Each pulse repetition interval carries four segments at the chip rate
1/B: H high-power chips, N_r recovery (silent) chips that let the receiver
settle, L low-power chips transmitted while the receiver is already
listening, and S trailing silent chips.  The silent tail dominates the PRI
so that S > H + N_r + L, which keeps every modeled delay unambiguous.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .sequences import SequenceSet
from .units import SPEED_OF_LIGHT, dbm_to_watts, watts_to_dbm

__all__ = [
    "PulseConfig",
    "TransmitPri",
    "build_pri",
    "frame_overhead",
    "default_config",
]


@dataclass(frozen=True)
class PulseConfig:
    """Timing and power parameters of the dual-power waveform.

    Parameters
    ----------
    p_high, p_low : float
        Transmit powers of the two active segments, watts.
    high_len, low_len, recovery_len, silent_len : int
        Chip counts H, N_r, L, S of the four segments.
    chip : float
        Chip duration T_p in seconds (1/bandwidth).
    pri : float
        Pulse repetition interval T in seconds.
    num_pulses : int
        Pulses per coherent processing interval (multiple of four).
    f_c : float
        Carrier frequency, Hz.
    bandwidth : float
        Occupied bandwidth B, Hz.
    """

    p_high: float
    p_low: float
    high_len: int
    low_len: int
    recovery_len: int
    silent_len: int
    chip: float
    pri: float
    num_pulses: int
    f_c: float
    bandwidth: float

    def __post_init__(self):
        if min(self.high_len, self.low_len) < 1 or self.silent_len < 1:
            raise ValueError("segment lengths must be positive")
        if self.recovery_len < 0:
            raise ValueError("recovery length must be >= 0")
        if self.low_len > self.high_len:
            raise ValueError("low segment longer than high segment")
        if self.silent_len <= self.high_len + self.recovery_len + self.low_len:
            raise ValueError("silent tail must exceed the active span")
        if self.num_pulses < 4 or self.num_pulses % 4 != 0:
            raise ValueError("pulses per CPI must be a positive multiple of 4")
        if min(self.p_high, self.p_low) <= 0:
            raise ValueError("powers must be positive")
        if self.p_low > self.p_high:
            raise ValueError("low-power segment must not exceed the high power")
        if abs(self.chip * self.bandwidth - 1.0) > 1e-6:
            raise ValueError("chip duration must equal 1/bandwidth")
        if self.pri < self.t_symbol:
            raise ValueError("PRI shorter than the symbol it carries")

    # ---- derived quantities -------------------------------------------

    @property
    def m_total(self) -> int:
        """Chips per PRI window, M = H + N_r + L + S."""
        return self.high_len + self.recovery_len + self.low_len + self.silent_len

    @property
    def n_bins(self) -> int:
        """Modeled delay bins, N_r + L + S."""
        return self.recovery_len + self.low_len + self.silent_len

    @property
    def rx_start(self) -> int:
        """First chip index with the receiver on, H + N_r."""
        return self.high_len + self.recovery_len

    @property
    def t_high(self) -> float:
        return self.high_len * self.chip

    @property
    def t_low(self) -> float:
        return self.low_len * self.chip

    @property
    def t_symbol(self) -> float:
        return self.m_total * self.chip

    @property
    def t_off(self) -> float:
        """Receiver dead time from the PRI start, (H + N_r) * T_p."""
        return self.rx_start * self.chip

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def range_bin_m(self) -> float:
        return self.chip * SPEED_OF_LIGHT / 2.0

    @property
    def max_range_m(self) -> float:
        return self.n_bins * self.range_bin_m


def frame_overhead(cfg: PulseConfig) -> float:
    """Fraction of the PRI spent on the symbol window, T_t / T."""
    return cfg.t_symbol / cfg.pri


@dataclass(frozen=True)
class TransmitPri:
    """One transmitted PRI at the chip rate."""

    samples: np.ndarray
    pri_index: int


def build_pri(cfg: PulseConfig, codes: SequenceSet, k: int) -> TransmitPri:
    """Assemble the chip samples of pulse ``k``.

    Layout: sqrt(P_h) * high code, N_r zeros, sqrt(P_l) * low code, S zeros.
    """
    if codes.high_len != cfg.high_len or codes.low_len != cfg.low_len:
        raise ValueError("code book lengths do not match the pulse config")
    high, low = codes.pulse(k)
    x = np.zeros(cfg.m_total, dtype=np.complex128)
    x[: cfg.high_len] = np.sqrt(cfg.p_high) * high
    lo = cfg.rx_start
    x[lo : lo + cfg.low_len] = np.sqrt(cfg.p_low) * low
    return TransmitPri(samples=x, pri_index=k)


def default_config() -> PulseConfig:
    """Packaged default parameter set (28 GHz, 100 MHz, 53/35 dBm)."""
    return PulseConfig(
        p_high=dbm_to_watts(53.0),
        p_low=dbm_to_watts(35.0),
        high_len=128,
        low_len=64,
        recovery_len=0,
        silent_len=700,
        chip=1e-8,
        pri=0.125e-3,
        num_pulses=32,
        f_c=28e9,
        bandwidth=100e6,
    )


# ---- config-file ingestion ------------------------------------------------

_PULSE_KEYS = {
    "f_c_ghz": 28.0,
    "bandwidth_mhz": 100.0,
    "pri_ms": 0.125,
    "pulses_per_cpi": 32,
    "p_h_dbm": 53.0,
    "p_l_dbm": 35.0,
    "t_t_us": 8.92,
    "t_h_us": 1.28,
    "t_l_us": 0.64,
    "recovery_len": 0,
}


def pulse_config_from_mapping(m: dict) -> PulseConfig:
    """Build a :class:`PulseConfig` from flat config keys.

    Recognized keys (defaults in parentheses): f_c_ghz (28), bandwidth_mhz
    (100), pri_ms (0.125), pulses_per_cpi (32), p_h_dbm (53), p_l_dbm (35),
    t_t_us (8.92), t_h_us (1.28), t_l_us (0.64), recovery_len (0).  Segment
    chip counts are derived from the durations at the chip rate.
    """
    vals = dict(_PULSE_KEYS)
    for key in vals:
        if key in m:
            vals[key] = type(vals[key])(m[key])
    bandwidth = vals["bandwidth_mhz"] * 1e6
    chip = 1.0 / bandwidth
    chip_us = chip * 1e6

    def _chips(dur_us: float, name: str) -> int:
        n = dur_us / chip_us
        if abs(n - round(n)) > 1e-6:
            raise ValueError(f"{name} is not a whole number of chips")
        return int(round(n))

    high_len = _chips(vals["t_h_us"], "t_h_us")
    low_len = _chips(vals["t_l_us"], "t_l_us")
    m_total = _chips(vals["t_t_us"], "t_t_us")
    recovery_len = int(vals["recovery_len"])
    silent_len = m_total - high_len - recovery_len - low_len
    return PulseConfig(
        p_high=dbm_to_watts(vals["p_h_dbm"]),
        p_low=dbm_to_watts(vals["p_l_dbm"]),
        high_len=high_len,
        low_len=low_len,
        recovery_len=recovery_len,
        silent_len=silent_len,
        chip=chip,
        pri=vals["pri_ms"] * 1e-3,
        num_pulses=int(vals["pulses_per_cpi"]),
        f_c=vals["f_c_ghz"] * 1e9,
        bandwidth=bandwidth,
    )


def read_mapping(path) -> dict:
    """Read a flat config mapping from JSON or ``key = value`` text.

    A run's ``config_snapshot.json`` (the flat mapping nested beside the
    scenario record) is accepted too, so a finished run can be replayed by
    pointing ``--config`` at its snapshot.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(text)
        if isinstance(obj.get("config"), dict):
            return obj["config"]
        return obj
    out = {}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {line_no}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def config_to_mapping(cfg: PulseConfig) -> dict:
    """Flat snapshot in the config-file key set.

    :func:`pulse_config_from_mapping` loads the result back; values are
    rounded to nine decimals in their user-facing units so a snapshot
    written to disk reproduces the config it came from.
    """
    return {
        "f_c_ghz": round(cfg.f_c / 1e9, 9),
        "bandwidth_mhz": round(cfg.bandwidth / 1e6, 9),
        "pri_ms": round(cfg.pri * 1e3, 9),
        "pulses_per_cpi": cfg.num_pulses,
        "p_h_dbm": round(watts_to_dbm(cfg.p_high), 9),
        "p_l_dbm": round(watts_to_dbm(cfg.p_low), 9),
        "t_t_us": round(cfg.m_total * cfg.chip * 1e6, 9),
        "t_h_us": round(cfg.high_len * cfg.chip * 1e6, 9),
        "t_l_us": round(cfg.low_len * cfg.chip * 1e6, 9),
        "recovery_len": cfg.recovery_len,
    }
