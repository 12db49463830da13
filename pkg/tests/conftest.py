"""Shared fixtures: default parameter bundle and a tiny fast config."""

import numpy as np
import pytest

from dualpulse import load_bundle
from dualpulse.sequences import build_sequence_set
from dualpulse.waveform import PulseConfig


@pytest.fixture(scope="session")
def bundle():
    return load_bundle({})


@pytest.fixture(scope="session")
def pulse(bundle):
    return bundle.pulse


@pytest.fixture(scope="session")
def channel(bundle):
    return bundle.channel


@pytest.fixture(scope="session")
def cfar(bundle):
    return bundle.cfar


@pytest.fixture(scope="session")
def codes(bundle):
    return bundle.codes


@pytest.fixture(scope="session")
def params(bundle):
    return bundle.metric_params()


def make_tiny_config(high_len=8, low_len=4, recovery_len=0, silent_len=32,
                     num_pulses=4, p_high=2.0, p_low=0.5):
    """Small pulse config for brute-force oracle comparisons."""
    bandwidth = 1e8
    chip = 1.0 / bandwidth
    m = high_len + recovery_len + low_len + silent_len
    return PulseConfig(
        p_high=p_high,
        p_low=p_low,
        high_len=high_len,
        low_len=low_len,
        recovery_len=recovery_len,
        silent_len=silent_len,
        chip=chip,
        pri=max(2 * m * chip, 1e-6),
        num_pulses=num_pulses,
        f_c=28e9,
        bandwidth=bandwidth,
    )


@pytest.fixture()
def tiny_pulse():
    return make_tiny_config()


@pytest.fixture()
def tiny_codes(tiny_pulse):
    return build_sequence_set(tiny_pulse.high_len, tiny_pulse.low_len)


def brute_ccf(x, y):
    """O(N^2) aperiodic cross-correlation oracle, lag -(len(y)-1)..len(x)-1."""
    x = np.asarray(x)
    y = np.asarray(y)
    lags = range(-(len(y) - 1), len(x))
    out = []
    for tau in lags:
        acc = 0
        for n in range(len(y)):
            if 0 <= n + tau < len(x):
                acc += x[n + tau] * np.conj(y[n])
        out.append(acc)
    return np.array(out)
