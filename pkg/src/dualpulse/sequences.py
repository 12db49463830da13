"""Complementary phase-code generation and aperiodic correlation tools.

The transmit code book for the dual-power pulse uses a Golay complementary
pair on the high-power segment and an independent pair, together with its
sign-flipped copies, on the low-power segment.  Cycling the four pulses of
:class:`SequenceSet` makes the summed correlator outputs sidelobe-free: the
two high-segment autocorrelations add to an impulse, the two low-segment
autocorrelations add to an impulse, and every high/low cross-correlation
cancels against the sign-flipped copy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

__all__ = [
    "golay_pair",
    "acf",
    "ccf",
    "SequenceSet",
    "build_sequence_set",
    "verify_set",
    "set_to_dict",
    "set_from_dict",
    "save_set",
    "load_set",
]

# Above this length the correlation engine switches from the exact direct
# form to FFT convolution.
_DIRECT_LIMIT = 256


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def golay_pair(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Binary Golay complementary pair of length ``n``.

    Uses the doubling recursion a' = [a | b], b' = [a | -b] from the seed
    a = b = [+1], so ``n`` must be a power of two.  The returned sequences
    are int64 arrays with entries +/-1 and satisfy
    ``acf(a) + acf(b) = 2n * delta``.

    Parameters
    ----------
    n : int
        Sequence length, a power of two.

    Returns
    -------
    (a, b) : tuple of ndarray
        The complementary pair.
    """
    if not _is_pow2(n):
        raise ValueError(f"Golay doubling needs a power-of-two length, got {n}")
    a = np.array([1], dtype=np.int64)
    b = np.array([1], dtype=np.int64)
    while len(a) < n:
        a, b = np.concatenate([a, b]), np.concatenate([a, -b])
    return a, b


def _correlate_full(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Full aperiodic cross-correlation R[tau] = sum_n x[n+tau] * conj(y[n]).

    Output index ``tau + len(y) - 1`` holds lag ``tau`` for
    ``tau = -(len(y)-1) .. len(x)-1``.  Exact (integer) arithmetic is used
    below the direct-form limit, FFT convolution beyond it.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if max(len(x), len(y)) <= _DIRECT_LIMIT:
        return np.convolve(x, np.conj(y[::-1]))
    return fftconvolve(x, np.conj(y[::-1]))


def acf(x: np.ndarray) -> np.ndarray:
    """Aperiodic autocorrelation over lags -(N-1)..N-1 (zero lag at N-1)."""
    return _correlate_full(x, x)


def ccf(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Aperiodic cross-correlation R_{x,y}[tau] = sum_n x[n+tau] * conj(y[n]).

    The output covers lags -(len(y)-1)..len(x)-1; index ``len(y)-1`` is
    lag zero.
    """
    return _correlate_full(x, y)


@dataclass(frozen=True)
class SequenceSet:
    """Code book of four (high, low) chip-sequence pairs, cycled per pulse.

    Pulse k uses ``high(k)`` on the high-power segment and ``low(k)`` on the
    low-power segment, with the cyclic pattern
    (a_H, a_L), (b_H, b_L), (a_H, -a_L), (b_H, -b_L).
    """

    a_high: np.ndarray
    b_high: np.ndarray
    a_low: np.ndarray
    b_low: np.ndarray

    @property
    def high_len(self) -> int:
        return len(self.a_high)

    @property
    def low_len(self) -> int:
        return len(self.a_low)

    def high(self, k: int) -> np.ndarray:
        return self.a_high if k % 2 == 0 else self.b_high

    def low(self, k: int) -> np.ndarray:
        base = self.a_low if k % 2 == 0 else self.b_low
        return base if k % 4 < 2 else -base

    def pulse(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Return the (high, low) pair used by pulse index ``k``."""
        return self.high(k), self.low(k)


def build_sequence_set(high_len: int, low_len: int) -> SequenceSet:
    """Build the four-pulse code book for given segment lengths.

    Parameters
    ----------
    high_len, low_len : int
        Chip counts of the high- and low-power segments; each must be a
        power of two with ``low_len <= high_len``.
    """
    if low_len > high_len:
        raise ValueError("low segment must not be longer than the high segment")
    a_high, b_high = golay_pair(high_len)
    a_low, b_low = golay_pair(low_len)
    # Decorate the low pair with alternating signs.  This keeps it
    # complementary (autocorrelations only pick up a (-1)^tau factor) while
    # decorrelating it from the high codes: the plain doubling construction
    # would make the low codes literal prefixes of the high ones, giving the
    # cross-segment correlation a perfect low_len-chip match and a strong
    # self-interference ridge in the range-Doppler map.
    sign = (-1) ** np.arange(low_len, dtype=np.int64)
    return SequenceSet(a_high, b_high, a_low * sign, b_low * sign)


def verify_set(s: SequenceSet) -> dict[str, float]:
    """Check the cancellation identities of a code book.

    Returns
    -------
    dict
        ``autocorr_residual_high``: max |acf(a_H) + acf(b_H)| off zero lag.
        ``autocorr_residual_low``: same for the low pair.
        ``cross_residual``: max |ccf(x_H, x_L) + ccf(x_H, -x_L)| over all
        lags and both x in {a, b}.
        ``autocorr_peak_high`` / ``autocorr_peak_low``: zero-lag value of the
        pair sum (2H and 2L for a valid set).
    """
    rh = acf(s.a_high) + acf(s.b_high)
    rl = acf(s.a_low) + acf(s.b_low)
    mid_h = s.high_len - 1
    mid_l = s.low_len - 1
    off_h = np.delete(rh, mid_h)
    off_l = np.delete(rl, mid_l)
    cross_a = ccf(s.a_high, s.a_low) + ccf(s.a_high, -s.a_low)
    cross_b = ccf(s.b_high, s.b_low) + ccf(s.b_high, -s.b_low)
    return {
        "autocorr_residual_high": float(np.abs(off_h).max()) if len(off_h) else 0.0,
        "autocorr_residual_low": float(np.abs(off_l).max()) if len(off_l) else 0.0,
        "cross_residual": float(max(np.abs(cross_a).max(), np.abs(cross_b).max())),
        "autocorr_peak_high": float(rh[mid_h].real),
        "autocorr_peak_low": float(rl[mid_l].real),
    }


def set_to_dict(s: SequenceSet) -> dict:
    """Serialize a +/-1 code book to plain integer lists."""
    return {
        "a_high": [int(v) for v in s.a_high],
        "b_high": [int(v) for v in s.b_high],
        "a_low": [int(v) for v in s.a_low],
        "b_low": [int(v) for v in s.b_low],
    }


def set_from_dict(d: dict) -> SequenceSet:
    arrays = {}
    for key in ("a_high", "b_high", "a_low", "b_low"):
        arr = np.asarray(d[key], dtype=np.int64)
        if arr.ndim != 1 or not np.all(np.abs(arr) == 1):
            raise ValueError(f"{key} must be a flat list of +/-1 entries")
        arrays[key] = arr
    if len(arrays["a_high"]) != len(arrays["b_high"]):
        raise ValueError("high-segment sequences must share one length")
    if len(arrays["a_low"]) != len(arrays["b_low"]):
        raise ValueError("low-segment sequences must share one length")
    return SequenceSet(**arrays)


def save_set(s: SequenceSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(set_to_dict(s), fh, indent=2)


def load_set(path) -> SequenceSet:
    with open(path, "r", encoding="utf-8") as fh:
        return set_from_dict(json.load(fh))
