"""Cell-averaging CFAR detection on range-Doppler maps.

The primary detector is hierarchical and one-dimensional: local maxima of
the map are thresholded along the range axis first (where the waveform's
pulse-cycled codes leave no sidelobes), and survivors are confirmed along
the Doppler axis.  Doppler-axis training excludes other stage-1 candidates
so that a mover's own Doppler sidelobes, which pass stage 1 as clean
range-axis peaks, do not inflate the confirmation threshold.

Both stages censor interference out of their training windows: when the
cell under test stands far above the local median, training cells within
a set ratio of the test cell are treated as targets in their own right
and replaced by walking the window outward.  This keeps two nearby
targets from masking each other while preserving the cell-averaging
false-alarm calibration on noise (the censor trigger fires on noise with
probability well below the false-alarm rate itself).

A conventional square-annulus 2D CA-CFAR is provided for comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .receiver import RdMap
from .units import SPEED_OF_LIGHT

__all__ = [
    "CfarConfig",
    "Detection",
    "DetectionReport",
    "alpha_from_pfa",
    "local_maxima",
    "cfar_1d",
    "hierarchical_detect",
    "cfar_2d",
]


def alpha_from_pfa(p_fa: float, training_cells: int) -> float:
    """Cell-averaging CFAR scale for a target false-alarm probability."""
    t = training_cells
    return t * (p_fa ** (-1.0 / t) - 1.0)


@dataclass(frozen=True)
class CfarConfig:
    """CFAR geometry and operating point.

    ``guard_cells`` and ``training_cells`` are totals, split evenly to both
    sides of the cell under test.  ``exclude_candidates`` drops other
    stage-1 candidates from Doppler-axis training windows.
    ``censor_ratio`` sets the interference-censoring line relative to the
    cell under test (0 disables censoring).
    """

    p_fa: float = 1e-5
    guard_cells: int = 4
    training_cells: int = 16
    exclude_candidates: bool = True
    censor_ratio: float = 0.5

    def __post_init__(self):
        if not 0 < self.p_fa < 1:
            raise ValueError("p_fa must be in (0, 1)")
        if self.guard_cells < 0 or self.guard_cells % 2:
            raise ValueError("guard_cells must be even and >= 0")
        if self.training_cells < 2 or self.training_cells % 2:
            raise ValueError("training_cells must be even and >= 2")
        if not 0 <= self.censor_ratio <= 1:
            raise ValueError("censor_ratio must be in [0, 1]")

    @property
    def alpha(self) -> float:
        return alpha_from_pfa(self.p_fa, self.training_cells)

    @property
    def censor_trigger(self) -> float:
        """CUT-to-median ratio above which censoring engages.

        The median of t_c exponential cells estimates the floor as
        median/ln 2, so the trigger sits at the detection scale alpha
        expressed against the median.  Noise cells essentially never reach
        it, while any target masked by a peer does.
        """
        return self.alpha / math.log(2.0)


@dataclass(frozen=True)
class Detection:
    """One detected cell with the thresholds it beat."""

    range_bin: int          # delay bin n (1-based)
    doppler_col: int        # column in the stored map
    doppler_bin: int        # signed Doppler bin number
    power: float
    range_threshold: float
    doppler_threshold: float


@dataclass(frozen=True)
class DetectionReport:
    """Detector output plus the candidate funnel sizes."""

    detections: tuple[Detection, ...]
    local_max_count: int
    stage1_candidates: int
    detector: str = "hierarchical_1d"

    def to_dict(self, rdmap: RdMap | None = None) -> dict:
        dets = []
        for d in self.detections:
            rec = {
                "range_bin": d.range_bin,
                "doppler_col": d.doppler_col,
                "doppler_bin": d.doppler_bin,
                "power": d.power,
                "range_threshold": d.range_threshold,
                "doppler_threshold": d.doppler_threshold,
            }
            if rdmap is not None:
                rec["range_m"] = d.range_bin * rdmap.chip * SPEED_OF_LIGHT / 2.0
                rec["velocity_mps"] = float(
                    d.doppler_bin * rdmap.wavelength / (2.0 * rdmap.m_fft * rdmap.pri)
                )
            dets.append(rec)
        return {
            "detector": self.detector,
            "local_max_count": self.local_max_count,
            "stage1_candidates": self.stage1_candidates,
            "detections": dets,
        }

    def to_json(self, path, rdmap: RdMap | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(rdmap), fh, indent=2)

    def to_csv(self, path, rdmap: RdMap | None = None) -> None:
        recs = self.to_dict(rdmap)["detections"]
        cols = [
            "range_bin",
            "range_m",
            "doppler_col",
            "doppler_bin",
            "velocity_mps",
            "power",
            "range_threshold",
            "doppler_threshold",
        ]
        cols = [c for c in cols if not recs or c in recs[0]]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            for rec in recs:
                fh.write(",".join(repr(rec[c]) for c in cols) + "\n")


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def local_maxima(power: np.ndarray) -> np.ndarray:
    """Mask of cells strictly greater than their 8-neighborhood.

    Edge cells compare against the neighbors that exist.
    """
    p = np.asarray(power, dtype=float)
    padded = np.full((p.shape[0] + 2, p.shape[1] + 2), -np.inf)
    padded[1:-1, 1:-1] = p
    mask = np.ones(p.shape, dtype=bool)
    rows, cols = p.shape
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            mask &= p > padded[1 + di : 1 + di + rows, 1 + dj : 1 + dj + cols]
    return mask


def _training_cells(
    i: int,
    n: int,
    guard_half: int,
    t_c: int,
    excluded=(),
    values: np.ndarray | None = None,
    censor_line: float | None = None,
) -> list[int]:
    """Training indices around ``i`` on a length-``n`` axis.

    Walks outward on both sides, skipping guards, excluded cells and (when
    a censor line is given) cells at or above it; any deficit at an array
    edge is redistributed to the far side so the count stays t_c whenever
    enough valid cells exist.
    """

    def usable(j: int) -> bool:
        if j in excluded:
            return False
        return censor_line is None or values[j] < censor_line

    t2 = t_c // 2
    cells: list[int] = []
    lj = i - guard_half - 1
    rj = i + guard_half + 1
    nl = nr = 0
    while nl < t2 and lj >= 0:
        if usable(lj):
            cells.append(lj)
            nl += 1
        lj -= 1
    while nr < t2 and rj < n:
        if usable(rj):
            cells.append(rj)
            nr += 1
        rj += 1
    while nl + nr < t_c and (lj >= 0 or rj < n):
        if rj < n:
            if usable(rj):
                cells.append(rj)
                nr += 1
            rj += 1
        else:
            if usable(lj):
                cells.append(lj)
                nl += 1
            lj -= 1
    return cells


def cfar_1d(
    power: np.ndarray,
    index: int,
    cfg: CfarConfig,
    excluded=(),
) -> tuple[bool, float]:
    """Cell-averaging test of one cell along a 1D power vector.

    Training cells are collected with edge redistribution; if the cell
    under test stands above ``censor_trigger`` times the median of the
    nominal window, cells at or above ``censor_ratio`` times the test cell
    are censored and replaced from further out.  Returns
    (exceeds, threshold).
    """
    vec = np.asarray(power, dtype=float)
    g2 = cfg.guard_cells // 2
    cells = _training_cells(index, len(vec), g2, cfg.training_cells, excluded)
    if not cells:
        return False, math.inf
    cut = float(vec[index])
    if cfg.censor_ratio > 0:
        med = float(np.median(vec[cells]))
        if cut >= cfg.censor_trigger * med:
            cells = _training_cells(
                index,
                len(vec),
                g2,
                cfg.training_cells,
                excluded,
                values=vec,
                censor_line=cfg.censor_ratio * cut,
            )
            if not cells:
                return False, math.inf
    thr = cfg.alpha * float(np.mean(vec[cells]))
    return cut > thr, thr


def _stage1_vectorized(power: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                       cfg: CfarConfig) -> tuple[np.ndarray, np.ndarray]:
    """Range-axis CA thresholds for candidate cells (vectorized fast path).

    Returns (thresholds, needs_censor) where ``needs_censor`` flags the
    candidates whose censor trigger fired; those must be re-evaluated with
    :func:`cfar_1d`.
    """
    n = power.shape[0]
    g2 = cfg.guard_cells // 2
    t_c = cfg.training_cells
    t2 = t_c // 2
    avail_l = np.maximum(0, rows - g2)
    avail_r = np.maximum(0, (n - 1) - (rows + g2))
    take_l = np.minimum(t2, avail_l)
    take_r = np.minimum(t_c - take_l, avail_r)
    take_l = np.minimum(t_c - take_r, avail_l)

    j = np.arange(t_c)[None, :]
    lo_l = (rows - g2 - take_l)[:, None]
    lo_r = (rows + g2 + 1)[:, None]
    idx = np.where(j < take_l[:, None], lo_l + j, lo_r + (j - take_l[:, None]))
    window = power[idx, cols[:, None]]
    counts = take_l + take_r
    # short axes leave duplicate indices; mask them out of the mean
    valid = j < counts[:, None]
    sums = np.where(valid, window, 0.0).sum(axis=1)
    thr = cfg.alpha * sums / np.maximum(counts, 1)
    if cfg.censor_ratio <= 0:
        return thr, np.zeros(len(rows), dtype=bool)
    med = np.median(np.where(valid, window, np.nan), axis=1)
    med = np.nan_to_num(med, nan=np.inf)
    needs = power[rows, cols] >= cfg.censor_trigger * med
    return thr, needs


# ---------------------------------------------------------------------------
# hierarchical detector
# ---------------------------------------------------------------------------


def hierarchical_detect(rdmap, cfg: CfarConfig) -> DetectionReport:
    """Two-stage 1D CFAR on a range-Doppler map.

    Accepts an :class:`~dualpulse.receiver.RdMap` or a bare 2D power array
    (rows = delay bins, columns = Doppler bins).
    """
    if isinstance(rdmap, RdMap):
        power = rdmap.power
        dop_bins = rdmap.doppler_bins
    else:
        power = np.asarray(rdmap, dtype=float)
        dop_bins = np.arange(power.shape[1])

    lm = local_maxima(power)
    rows, cols = np.nonzero(lm)
    n_lm = len(rows)
    if n_lm == 0:
        return DetectionReport((), 0, 0)

    thr1, needs = _stage1_vectorized(power, rows, cols, cfg)
    keep = power[rows, cols] > thr1
    for idx in np.nonzero(needs)[0]:
        ok, thr = cfar_1d(power[:, cols[idx]], int(rows[idx]), cfg)
        thr1[idx] = thr
        keep[idx] = ok
    g_rows, g_cols, g_thr = rows[keep], cols[keep], thr1[keep]
    n_stage1 = len(g_rows)

    cand_cols_by_row: dict[int, set] = {}
    if cfg.exclude_candidates:
        for r, c in zip(g_rows, g_cols):
            cand_cols_by_row.setdefault(int(r), set()).add(int(c))

    dets = []
    for r, c, t1 in zip(g_rows, g_cols, g_thr):
        excl: frozenset = frozenset()
        if cfg.exclude_candidates:
            excl = frozenset(cand_cols_by_row.get(int(r), set()) - {int(c)})
        ok, t2 = cfar_1d(power[int(r), :], int(c), cfg, excluded=excl)
        if ok:
            dets.append((int(r), int(c), float(power[r, c]), float(t1), float(t2)))

    detections = tuple(
        Detection(
            range_bin=r + 1,
            doppler_col=c,
            doppler_bin=int(dop_bins[c]),
            power=p,
            range_threshold=t1,
            doppler_threshold=t2,
        )
        for r, c, p, t1, t2 in sorted(dets)
    )
    return DetectionReport(
        detections=detections,
        local_max_count=n_lm,
        stage1_candidates=n_stage1,
        detector="hierarchical_1d",
    )


# ---------------------------------------------------------------------------
# 2D baseline
# ---------------------------------------------------------------------------

_ANNULUS_CACHE: dict = {}


def _annulus_indices(shape: tuple[int, int], t_count: int):
    """Training-cell gather indices for every cell of a map shape.

    Guard region is the 3x3 block around the cell; training cells are the
    ``t_count`` nearest valid cells beyond it (Chebyshev, then Euclidean,
    then scan order), which is exactly the 5x5 annulus in the interior.
    """
    key = (shape, t_count)
    if key in _ANNULUS_CACHE:
        return _ANNULUS_CACHE[key]
    n_rng, n_dop = shape
    offsets = []
    for di in range(-6, 7):
        for dj in range(-6, 7):
            cheb = max(abs(di), abs(dj))
            if cheb >= 2:
                offsets.append((cheb, di * di + dj * dj, di, dj))
    offsets.sort()
    rows_idx = np.empty((n_rng, n_dop, t_count), dtype=np.int32)
    cols_idx = np.empty((n_rng, n_dop, t_count), dtype=np.int32)
    for i in range(n_rng):
        for j in range(n_dop):
            got = 0
            for _, _, di, dj in offsets:
                r, c = i + di, j + dj
                if 0 <= r < n_rng and 0 <= c < n_dop:
                    rows_idx[i, j, got] = r
                    cols_idx[i, j, got] = c
                    got += 1
                    if got == t_count:
                        break
            if got < t_count:  # degenerate tiny map: repeat the last cell
                rows_idx[i, j, got:] = rows_idx[i, j, max(got - 1, 0)]
                cols_idx[i, j, got:] = cols_idx[i, j, max(got - 1, 0)]
    _ANNULUS_CACHE[key] = (rows_idx, cols_idx)
    return rows_idx, cols_idx


def cfar_2d(rdmap, cfg: CfarConfig) -> DetectionReport:
    """Conventional single-stage 2D CA-CFAR with a square annulus.

    Every cell is tested against alpha times the mean of its
    ``cfg.training_cells`` nearest cells outside a one-cell guard ring.
    """
    if isinstance(rdmap, RdMap):
        power = rdmap.power
        dop_bins = rdmap.doppler_bins
    else:
        power = np.asarray(rdmap, dtype=float)
        dop_bins = np.arange(power.shape[1])
    rows_idx, cols_idx = _annulus_indices(power.shape, cfg.training_cells)
    means = power[rows_idx, cols_idx].mean(axis=2)
    thr = cfg.alpha * means
    hits = np.nonzero(power > thr)
    detections = tuple(
        Detection(
            range_bin=int(r) + 1,
            doppler_col=int(c),
            doppler_bin=int(dop_bins[c]),
            power=float(power[r, c]),
            range_threshold=float(thr[r, c]),
            doppler_threshold=float(thr[r, c]),
        )
        for r, c in zip(*hits)
    )
    return DetectionReport(
        detections=detections,
        local_max_count=int(local_maxima(power).sum()),
        stage1_candidates=len(detections),
        detector="ca_2d",
    )
