"""Small unit-conversion helpers shared across the package."""

from __future__ import annotations

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT


def db(x):
    """Linear power ratio -> decibels."""
    return 10.0 * np.log10(x)


def undb(x_db):
    """Decibels -> linear power ratio."""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** (p_dbm / 10.0) * 1e-3


def watts_to_dbm(p_w: float) -> float:
    return 10.0 * np.log10(p_w / 1e-3)


def dbsm_to_sqm(s_dbsm: float) -> float:
    return 10.0 ** (s_dbsm / 10.0)


def sqm_to_dbsm(s_sqm: float) -> float:
    return 10.0 * np.log10(s_sqm)
