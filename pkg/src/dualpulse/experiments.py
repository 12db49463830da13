"""Reproducible experiment runners behind the command line interface.

Each runner takes an :class:`ExperimentBundle` (pulse, channel and CFAR
configuration plus scenario defaults), derives all randomness from an
explicit integer seed, and optionally writes a run directory containing a
config snapshot, CSV curves, detection tables, optional RD-map binaries, a
JSON summary and rendered figures.  Re-running with the same configuration
and seed reproduces the numeric payload bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (
    LfmConfig,
    OfdmSensingConfig,
    lfm_min_rcs,
    lfm_pipeline,
    ofdm_min_rcs,
    ofdm_pipeline,
)
from .channel import ChannelConfig, Target, default_channel, delay_bin, simulate_cpi, with_sic
from .detection import CfarConfig, DetectionReport, cfar_2d, hierarchical_detect
from .figures import (
    metric_sweep_figure,
    min_rcs_figure,
    pd_curves_figure,
    rdmap_figure,
    sequence_figure,
)
from .metrics import (
    MetricParams,
    Region,
    bin_range_m,
    min_detectable_rcs,
    optimal_weight,
    region,
    sensing_metric,
)
from .receiver import (
    RdMap,
    WeightProfile,
    high_only_profile,
    low_only_profile,
    optimal_profile,
    process_cpi,
    uniform_profile,
)
from .sequences import SequenceSet, build_sequence_set, save_set, verify_set
from .units import db, dbm_to_watts, dbsm_to_sqm, sqm_to_dbsm, undb, watts_to_dbm
from .waveform import PulseConfig, config_to_mapping, default_config, pulse_config_from_mapping

__all__ = [
    "ExperimentBundle",
    "ExperimentResult",
    "load_bundle",
    "bundle_to_mapping",
    "load_targets",
    "wilson_interval",
    "default_range_grid",
    "run_rdmap",
    "run_pd_vs_range",
    "run_min_rcs",
    "run_multi_target",
    "run_detector_compare",
    "run_metric_sweep",
    "run_sequence_verify",
]

_Z95 = 1.959963984540054


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentBundle:
    """Everything a runner needs besides the scenario itself."""

    pulse: PulseConfig
    channel: ChannelConfig
    cfar: CfarConfig
    codes: SequenceSet
    min_snr_db: float = 15.0
    rcs_dbsm: float = -10.0
    lfm: LfmConfig = LfmConfig()
    ofdm: OfdmSensingConfig = OfdmSensingConfig()

    @property
    def rho(self) -> float:
        return undb(self.min_snr_db)

    def metric_params(self, sic_db: float | None = None) -> MetricParams:
        ch = self.channel if sic_db is None else with_sic(self.channel, sic_db)
        return MetricParams.from_configs(
            self.pulse,
            ch,
            self.codes,
            guard_cells=self.cfar.guard_cells,
            training_cells=self.cfar.training_cells,
            min_snr_db=self.min_snr_db,
        )

    def profile(self, mode: str = "optimal", value: float | None = None) -> WeightProfile:
        if mode == "optimal":
            return optimal_profile(self.metric_params())
        if mode == "matched":
            if value is None:
                raise ValueError("weight_mode 'matched' requires an RCS value in dBsm")
            return optimal_profile(
                replace(self.metric_params(), sigma_star=dbsm_to_sqm(value))
            )
        if mode == "fixed":
            if value is None or value < 0:
                raise ValueError("weight_mode 'fixed' requires a weight value >= 0")
            return uniform_profile(self.pulse, value)
        if mode == "high_only":
            return high_only_profile(self.pulse)
        if mode == "low_only":
            return low_only_profile(self.pulse)
        raise ValueError(f"unknown weight mode {mode!r}")


def load_bundle(mapping: dict | None = None) -> ExperimentBundle:
    """Build an :class:`ExperimentBundle` from a flat config mapping.

    Unknown keys raise so that typos in config files fail loudly.
    """
    m = dict(mapping or {})
    pulse_keys = {
        "f_c_ghz", "bandwidth_mhz", "pri_ms", "pulses_per_cpi",
        "p_h_dbm", "p_l_dbm", "t_t_us", "t_h_us", "t_l_us", "recovery_len",
    }
    pulse = pulse_config_from_mapping({k: v for k, v in m.items() if k in pulse_keys})
    ch = default_channel(pulse, sic_db=float(m.pop("sic_db", 110.0)))
    ch = replace(
        ch,
        g_tx=float(m.pop("g_tx", ch.g_tx)),
        g_rx=float(m.pop("g_rx", ch.g_rx)),
        noise_figure_db=float(m.pop("noise_figure_db", ch.noise_figure_db)),
        fractional_delay=bool(m.pop("fractional_delay", ch.fractional_delay)),
    )
    cfar = CfarConfig(
        p_fa=float(m.pop("p_fa", 1e-5)),
        guard_cells=int(m.pop("guard_cells", 4)),
        training_cells=int(m.pop("training_cells", 16)),
        exclude_candidates=bool(m.pop("exclude_candidates", True)),
        censor_ratio=float(m.pop("censor_ratio", 0.5)),
    )
    min_snr_db = float(m.pop("min_snr_db", 15.0))
    rcs_dbsm = float(m.pop("rcs_dbsm", -10.0))
    lfm = LfmConfig(power=dbm_to_watts(float(m["lfm_power_dbm"])) if "lfm_power_dbm" in m else None)
    m.pop("lfm_power_dbm", None)
    ofdm = OfdmSensingConfig(
        power=dbm_to_watts(float(m["ofdm_power_dbm"])) if "ofdm_power_dbm" in m else None,
        pilot_seed=int(m.pop("pilot_seed", OfdmSensingConfig().pilot_seed)),
    )
    m.pop("ofdm_power_dbm", None)
    unknown = set(m) - pulse_keys
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    codes = build_sequence_set(pulse.high_len, pulse.low_len)
    return ExperimentBundle(
        pulse=pulse, channel=ch, cfar=cfar, codes=codes,
        min_snr_db=min_snr_db, rcs_dbsm=rcs_dbsm, lfm=lfm, ofdm=ofdm,
    )


def bundle_to_mapping(bundle: ExperimentBundle) -> dict:
    """Flat mapping that :func:`load_bundle` accepts; used for snapshots."""
    m = config_to_mapping(bundle.pulse)
    m.update(
        sic_db=bundle.channel.sic_db,
        g_tx=bundle.channel.g_tx,
        g_rx=bundle.channel.g_rx,
        noise_figure_db=bundle.channel.noise_figure_db,
        fractional_delay=bundle.channel.fractional_delay,
        p_fa=bundle.cfar.p_fa,
        guard_cells=bundle.cfar.guard_cells,
        training_cells=bundle.cfar.training_cells,
        exclude_candidates=bundle.cfar.exclude_candidates,
        censor_ratio=bundle.cfar.censor_ratio,
        min_snr_db=bundle.min_snr_db,
        rcs_dbsm=bundle.rcs_dbsm,
        pilot_seed=bundle.ofdm.pilot_seed,
    )
    if bundle.lfm.power is not None:
        m["lfm_power_dbm"] = round(watts_to_dbm(bundle.lfm.power), 9)
    if bundle.ofdm.power is not None:
        m["ofdm_power_dbm"] = round(watts_to_dbm(bundle.ofdm.power), 9)
    return m


def load_targets(path) -> list[Target]:
    """Read a target list from a JSON or CSV scenario file.

    JSON: ``{"targets": [{"range_m": ..., "velocity_mps": ..., "rcs_dbsm": ...}]}``
    (or a bare list).  CSV: header ``range_m,velocity_mps,rcs_dbsm``.
    """
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".csv"):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = [h.strip() for h in lines[0].split(",")]
        recs = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    else:
        obj = json.loads(text)
        recs = obj["targets"] if isinstance(obj, dict) else obj
    targets = []
    for rec in recs:
        targets.append(
            Target(
                range_m=float(rec["range_m"]),
                velocity_mps=float(rec.get("velocity_mps", 0.0)),
                rcs_sqm=dbsm_to_sqm(float(rec.get("rcs_dbsm", -10.0))),
            )
        )
    if not targets:
        raise ValueError(f"no targets in {path}")
    return targets


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float, float]:
    """Point estimate and Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return math.nan, math.nan, math.nan
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return p, max(0.0, center - half), min(1.0, center + half)


def default_range_grid() -> np.ndarray:
    """Default sweep grid: a fine sub-10 m head plus 40 points to 950 m."""
    return np.concatenate(([3.0, 4.5, 6.0, 7.5, 9.0], np.linspace(10.0, 950.0, 40)))


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([int(seed)] + [int(k) for k in key])


def _target_detected(report: DetectionReport, rdm: RdMap, target: Target,
                     pulse: PulseConfig, ch: ChannelConfig) -> bool:
    """Truth match within one range bin and one (circular) Doppler bin."""
    n_bin = delay_bin(target, pulse)
    col = rdm.doppler_col(2.0 * target.velocity_mps / ch.wavelength)
    m = rdm.m_fft
    for d in report.detections:
        dc = min((d.doppler_col - col) % m, (col - d.doppler_col) % m)
        if abs(d.range_bin - n_bin) <= 1 and dc <= 1:
            return True
    return False


@dataclass(frozen=True)
class ExperimentResult:
    """Runner output: a kind tag, the numeric payload and provenance."""

    kind: str
    summary: dict
    provenance: dict
    artifacts: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "summary": self.summary,
            "provenance": self.provenance,
            "artifacts": list(self.artifacts),
        }


def _provenance(bundle: ExperimentBundle, scenario: dict, seed: int) -> dict:
    config = {"config": bundle_to_mapping(bundle), "scenario": scenario}
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return {
        "config_sha256": hashlib.sha256(canon.encode("utf-8")).hexdigest(),
        "seed": int(seed),
        "code_version": __version__,
    }


class _RunDir:
    """Collects artifacts for one run directory (or swallows them if None)."""

    def __init__(self, out_dir, bundle: ExperimentBundle, scenario: dict):
        self.path = Path(out_dir) if out_dir is not None else None
        self.names: list[str] = []
        if self.path is not None:
            self.path.mkdir(parents=True, exist_ok=True)
            self.write_json("config_snapshot.json",
                            {"config": bundle_to_mapping(bundle), "scenario": scenario})

    def file(self, name: str) -> Path | None:
        if self.path is None:
            return None
        self.names.append(name)
        return self.path / name

    def write_json(self, name: str, obj: dict) -> None:
        p = self.file(name)
        if p is not None:
            with open(p, "w", encoding="utf-8") as fh:
                json.dump(obj, fh, indent=2, default=_json_default)

    def write_csv(self, name: str, header: list[str], rows) -> None:
        p = self.file(name)
        if p is None:
            return
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v)}")


def _target_record(t: Target) -> dict:
    return {
        "range_m": t.range_m,
        "velocity_mps": t.velocity_mps,
        "rcs_dbsm": sqm_to_dbsm(t.rcs_sqm),
    }


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def run_rdmap(
    bundle: ExperimentBundle,
    targets: list[Target],
    *,
    waveform: str = "proposal",
    weight_mode: str = "optimal",
    weight_value: float | None = None,
    m_fft: int | None = None,
    seed: int = 1234,
    out_dir=None,
    make_figures: bool = True,
    save_binary: bool = False,
) -> ExperimentResult:
    """Simulate one CPI, render the RD map and run the detector on it."""
    scenario = {
        "experiment": "rdmap",
        "waveform": waveform,
        "weight_mode": weight_mode,
        "weight_value": weight_value,
        "m_fft": m_fft,
        "targets": [_target_record(t) for t in targets],
    }
    run = _RunDir(out_dir, bundle, scenario)
    rng = _rng(seed, 0)
    rdm, report = _make_map(bundle, targets, waveform, weight_mode, weight_value, rng, m_fft)
    hits = [_target_detected(report, rdm, t, bundle.pulse, bundle.channel) for t in targets]

    csv_path = run.file("rdmap.csv")
    if csv_path is not None:
        rdm.to_csv(csv_path)
    if save_binary and run.path is not None:
        rdm.save_binary(run.path / "rdmap_raw")
        run.names += ["rdmap_raw.f64", "rdmap_raw.json"]
    det_csv = run.file("detections.csv")
    if det_csv is not None:
        report.to_csv(det_csv, rdm)
        report.to_json(run.file("detections.json"), rdm)
    if make_figures and run.path is not None:
        rdmap_figure(
            rdm,
            run.file("rdmap.png"),
            detections=report.detections,
            truth=[(t.range_m, t.velocity_mps) for t in targets],
            title=f"{waveform} range-Doppler map",
        )

    peak_row, peak_col = np.unravel_index(int(np.argmax(rdm.power)), rdm.power.shape)
    summary = {
        "waveform": waveform,
        "n_detections": len(report.detections),
        "targets_detected": hits,
        "local_max_count": report.local_max_count,
        "stage1_candidates": report.stage1_candidates,
        "peak_range_bin": int(peak_row) + 1,
        "peak_doppler_bin": int(rdm.doppler_bins[peak_col]),
        "peak_power_db": db(float(rdm.power[peak_row, peak_col])),
    }
    result = ExperimentResult("rdmap", summary, _provenance(bundle, scenario, seed),
                              tuple(run.names))
    run.write_json("summary.json", result.to_dict())
    return result


def _make_map(bundle, targets, waveform, weight_mode, weight_value, rng, m_fft=None):
    if waveform == "proposal":
        profile = bundle.profile(weight_mode, weight_value)
        pris = simulate_cpi(bundle.codes, targets, bundle.pulse, bundle.channel, rng)
        rdm = process_cpi(pris, bundle.codes, bundle.pulse, profile, m_fft)
        return rdm, hierarchical_detect(rdm, bundle.cfar)
    if waveform == "lfm":
        return lfm_pipeline(targets, bundle.pulse, bundle.channel, bundle.cfar, rng, bundle.lfm)
    if waveform == "ofdm":
        return ofdm_pipeline(targets, bundle.pulse, bundle.channel, bundle.cfar, rng, bundle.ofdm)
    raise ValueError(f"unknown waveform {waveform!r}")


def run_pd_vs_range(
    bundle: ExperimentBundle,
    *,
    ranges_m: np.ndarray | None = None,
    trials: int = 200,
    rcs_dbsm: float | None = None,
    velocity_mps: float = 0.0,
    weight_mode: str = "optimal",
    weight_value: float | None = None,
    waveform: str = "proposal",
    detector: str = "hierarchical",
    seed: int = 1234,
    out_dir=None,
    make_figures: bool = True,
) -> ExperimentResult:
    """Monte Carlo detection probability over a range grid (single target)."""
    grid = np.asarray(default_range_grid() if ranges_m is None else ranges_m, dtype=float)
    rcs = bundle.rcs_dbsm if rcs_dbsm is None else float(rcs_dbsm)
    scenario = {
        "experiment": "pd_vs_range",
        "waveform": waveform,
        "weight_mode": weight_mode,
        "weight_value": weight_value,
        "detector": detector,
        "trials": trials,
        "rcs_dbsm": rcs,
        "velocity_mps": velocity_mps,
        "ranges_m": grid.tolist(),
    }
    run = _RunDir(out_dir, bundle, scenario)

    rows = []
    pd_pts, lo_pts, hi_pts = [], [], []
    for gi, r in enumerate(grid):
        target = Target(range_m=float(r), velocity_mps=velocity_mps,
                        rcs_sqm=dbsm_to_sqm(rcs))
        hits = 0
        for t in range(trials):
            rng = _rng(seed, gi, t)
            rdm, report = _make_map(bundle, [target], waveform, weight_mode,
                                    weight_value, rng)
            if detector == "ca_2d":
                report = cfar_2d(rdm, bundle.cfar)
            hits += _target_detected(report, rdm, target, bundle.pulse, bundle.channel)
        p, lo, hi = wilson_interval(hits, trials)
        pd_pts.append(p)
        lo_pts.append(lo)
        hi_pts.append(hi)
        rows.append((float(r), delay_bin(target, bundle.pulse), trials, hits, p, lo, hi))

    pd_arr = np.array(pd_pts)
    above = np.nonzero(pd_arr >= 0.9)[0]
    roll_off_m = float(grid[above[-1]]) if len(above) else 0.0
    dead = [float(grid[i]) for i in range(len(grid))
            if pd_arr[i] < 0.9 and grid[i] <= roll_off_m]
    low_runs = _contiguous_runs(grid, pd_arr <= 0.5)

    run.write_csv(
        "pd_vs_range.csv",
        ["range_m", "delay_bin", "trials", "hits", "p_d", "ci_low", "ci_high"],
        rows,
    )
    if make_figures and run.path is not None:
        label = weight_mode if weight_mode != "fixed" else f"w={weight_value:g}"
        pd_curves_figure(run.file("pd_vs_range.png"), grid,
                         {label: (pd_pts, lo_pts, hi_pts)})

    summary = {
        "waveform": waveform,
        "weight_mode": weight_mode,
        "weight_value": weight_value,
        "detector": detector,
        "trials": trials,
        "rcs_dbsm": rcs,
        "max_ci_half_width": max((hi - lo) / 2 for _, lo, hi in zip(pd_pts, lo_pts, hi_pts)),
        "roll_off_m": roll_off_m,
        "dead_zone_points_m": dead,
        "low_pd_runs_m": low_runs,
        "curve": {
            "range_m": grid.tolist(),
            "p_d": pd_pts,
            "ci_low": lo_pts,
            "ci_high": hi_pts,
        },
    }
    result = ExperimentResult("pd_vs_range", summary,
                              _provenance(bundle, scenario, seed), tuple(run.names))
    run.write_json("summary.json", result.to_dict())
    return result


def _contiguous_runs(grid: np.ndarray, mask: np.ndarray) -> list[list[float]]:
    runs, cur = [], []
    for r, m in zip(grid, mask):
        if m:
            cur.append(float(r))
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return runs


def run_min_rcs(
    bundle: ExperimentBundle,
    *,
    sic_db_list: tuple = (100.0, 110.0, 120.0),
    mc_bins: tuple = (),
    mc_trials: int = 100,
    seed: int = 1234,
    out_dir=None,
    make_figures: bool = True,
) -> ExperimentResult:
    """Analytic minimum detectable RCS per delay bin, plus optional MC checks.

    Produces proposal curves at each SIC level and the LFM and OFDM baseline
    curves; Monte Carlo mode bisects the RCS until empirical P_d crosses 0.9
    at the requested bins (middle SIC level).
    """
    scenario = {
        "experiment": "min_rcs",
        "sic_db_list": list(sic_db_list),
        "mc_bins": list(mc_bins),
        "mc_trials": mc_trials,
    }
    run = _RunDir(out_dir, bundle, scenario)
    rho = bundle.rho
    n_bins = bundle.pulse.n_bins
    bins = np.arange(1, n_bins + 1)
    params0 = bundle.metric_params()

    curves: dict[str, np.ndarray] = {}
    for sic in sic_db_list:
        par = bundle.metric_params(sic_db=sic)
        vals = np.array([sqm_to_dbsm(min_detectable_rcs(int(n), rho, par)) for n in bins])
        curves[f"proposal_sic{sic:g}"] = vals
        ofdm_vals = np.array(
            [sqm_to_dbsm(ofdm_min_rcs(int(n), rho, par, bundle.ofdm.power)) for n in bins]
        )
        curves[f"ofdm_sic{sic:g}"] = ofdm_vals
    curves["lfm"] = np.array(
        [sqm_to_dbsm(lfm_min_rcs(int(n), rho, params0)) for n in bins]
    )

    ranges = np.array([bin_range_m(int(n), params0) for n in bins])
    header = ["n_tau", "range_m"] + [f"{k}_dbsm" for k in curves]
    rows = [
        [int(n), ranges[i]] + [curves[k][i] for k in curves]
        for i, n in enumerate(bins)
    ]
    run.write_csv("min_rcs.csv", header, rows)
    if make_figures and run.path is not None:
        min_rcs_figure(run.file("min_rcs.png"), ranges,
                       {k: v for k, v in curves.items()})

    mc_results = []
    if mc_bins:
        mid_sic = sorted(sic_db_list)[len(sic_db_list) // 2]
        par = bundle.metric_params(sic_db=mid_sic)
        ch = with_sic(bundle.channel, mid_sic)
        for bi, n_tau in enumerate(mc_bins):
            analytic = min_detectable_rcs(int(n_tau), rho, par)
            mc = _mc_min_rcs(bundle, ch, int(n_tau), analytic, mc_trials, seed, bi)
            mc_results.append(
                {
                    "n_tau": int(n_tau),
                    "range_m": bin_range_m(int(n_tau), par),
                    "sic_db": mid_sic,
                    "analytic_dbsm": sqm_to_dbsm(analytic),
                    "monte_carlo_dbsm": sqm_to_dbsm(mc),
                    "trials": mc_trials,
                }
            )

    short = ranges <= 20.0
    far = bins > bundle.pulse.rx_start + bundle.pulse.low_len
    summary = {
        "rho_db": bundle.min_snr_db,
        "worst_short_range_dbsm": {
            k: float(np.max(v[short])) for k, v in curves.items() if k.startswith("proposal")
        },
        "monte_carlo": mc_results,
    }
    with np.errstate(invalid="ignore"):
        lfm_ok = curves["lfm"][far]
        for sic in sic_db_list:
            prop = curves[f"proposal_sic{sic:g}"][far]
            summary[f"far_region_proposal_minus_lfm_max_db_sic{sic:g}"] = float(
                np.max(prop - lfm_ok)
            )
    result = ExperimentResult("min_rcs", summary,
                              _provenance(bundle, scenario, seed), tuple(run.names))
    run.write_json("summary.json", result.to_dict())
    return result


def _mc_min_rcs(bundle, ch, n_tau, analytic_sqm, trials, seed, key, steps=9):
    """Bisect RCS (log domain) to the empirical P_d = 0.9 crossing."""
    par = MetricParams.from_configs(
        bundle.pulse, ch, bundle.codes,
        guard_cells=bundle.cfar.guard_cells,
        training_cells=bundle.cfar.training_cells,
        min_snr_db=bundle.min_snr_db,
    )
    r_m = bin_range_m(n_tau, par)

    def pd_at(sigma: float, trial_key: int) -> float:
        target = Target(range_m=r_m, velocity_mps=0.0, rcs_sqm=sigma)
        # weights matched to the trial RCS, mirroring the analytic envelope
        prof = optimal_profile(replace(par, sigma_star=sigma))
        hits = 0
        for t in range(trials):
            rng = _rng(seed, 90000 + key, trial_key, t)
            pris = simulate_cpi(bundle.codes, [target], bundle.pulse, ch, rng)
            rdm = process_cpi(pris, bundle.codes, bundle.pulse, prof)
            rep = hierarchical_detect(rdm, bundle.cfar)
            hits += _target_detected(rep, rdm, target, bundle.pulse, ch)
        return hits / trials

    lo, hi = math.log10(analytic_sqm) - 1.2, math.log10(analytic_sqm) + 1.2
    if pd_at(10.0 ** lo, 0) >= 0.9:
        return 10.0 ** lo
    if pd_at(10.0 ** hi, 1) < 0.9:
        return 10.0 ** hi
    for step in range(steps):
        mid = 0.5 * (lo + hi)
        if pd_at(10.0 ** mid, 2 + step) >= 0.9:
            hi = mid
        else:
            lo = mid
    return 10.0 ** (0.5 * (lo + hi))


def run_multi_target(
    bundle: ExperimentBundle,
    targets: list[Target],
    *,
    waveforms: tuple = ("proposal", "lfm", "ofdm"),
    trials: int = 20,
    weight_mode: str = "matched",
    weight_value: float | None = None,
    seed: int = 1234,
    out_dir=None,
    make_figures: bool = True,
) -> ExperimentResult:
    """Majority-vote multi-target detection tables, proposal vs baselines.

    The default weight policy matches the combiner to the strongest target
    in the scene.  Per-bin minimum-RCS weights are tuned for an isolated
    marginal echo; in a multi-target scene the binding interference is the
    strongest return's eclipse sidelobes, and upweighting the low-power
    branch suppresses them through the combiner normalization while the
    weak target's own peak saturates.
    """
    if weight_mode == "matched" and weight_value is None:
        weight_value = max(sqm_to_dbsm(t.rcs_sqm) for t in targets)
    scenario = {
        "experiment": "multi_target",
        "waveforms": list(waveforms),
        "trials": trials,
        "weight_mode": weight_mode,
        "weight_value": weight_value,
        "targets": [_target_record(t) for t in targets],
    }
    run = _RunDir(out_dir, bundle, scenario)

    rows = []
    table: dict[str, dict] = {}
    for wi, wf in enumerate(waveforms):
        counts = np.zeros(len(targets), dtype=int)
        for t in range(trials):
            rng = _rng(seed, wi, t)
            rdm, report = _make_map(bundle, targets, wf, weight_mode, weight_value, rng)
            for ti, target in enumerate(targets):
                counts[ti] += _target_detected(report, rdm, target,
                                               bundle.pulse, bundle.channel)
            if t == 0 and make_figures and run.path is not None:
                rdmap_figure(
                    rdm,
                    run.file(f"rdmap_{wf}.png"),
                    detections=report.detections,
                    truth=[(tg.range_m, tg.velocity_mps) for tg in targets],
                    title=f"{wf} multi-target map",
                )
        majority = counts > trials / 2
        table[wf] = {
            "per_target_hits": counts.tolist(),
            "majority_detected": majority.tolist(),
            "n_detected": int(majority.sum()),
        }
        for ti, target in enumerate(targets):
            rows.append(
                (wf, ti, target.range_m, target.velocity_mps,
                 sqm_to_dbsm(target.rcs_sqm), int(counts[ti]), trials,
                 bool(majority[ti]))
            )

    run.write_csv(
        "multi_target.csv",
        ["waveform", "target", "range_m", "velocity_mps", "rcs_dbsm",
         "hits", "trials", "majority_detected"],
        rows,
    )
    summary = {"trials": trials, "table": table}
    result = ExperimentResult("multi_target", summary,
                              _provenance(bundle, scenario, seed), tuple(run.names))
    run.write_json("summary.json", result.to_dict())
    return result


def detector_compare_targets(bundle: ExperimentBundle, range_m: float,
                             rcs_dbsm: float = -10.0) -> list[Target]:
    """Two equal-RCS targets at one range, two Doppler bins apart.

    The pair sits inside the 2D detector's square training annulus but
    inside the hierarchical detector's Doppler guard band, which is the
    geometry the hierarchy is designed to protect.
    """
    lam = bundle.channel.wavelength
    k, pri = bundle.pulse.num_pulses, bundle.pulse.pri
    sigma = dbsm_to_sqm(rcs_dbsm)
    return [
        Target(range_m=range_m, velocity_mps=4 * lam / (2.0 * k * pri), rcs_sqm=sigma),
        Target(range_m=range_m, velocity_mps=6 * lam / (2.0 * k * pri), rcs_sqm=sigma),
    ]


def run_detector_compare(
    bundle: ExperimentBundle,
    *,
    ranges_m: np.ndarray | None = None,
    trials: int = 200,
    rcs_dbsm: float = -10.0,
    seed: int = 1234,
    out_dir=None,
    make_figures: bool = True,
) -> ExperimentResult:
    """Hierarchical 1D vs single-stage 2D CFAR on identical RD maps.

    Both detectors see the same maps of a two-mover scenario; a trial
    counts as detected only if both targets are found.  The summary holds
    each detector's maximum range with P_d >= 0.9 and the confidence
    intervals at the separating grid point.
    """
    # dense sampling near the far roll-off; 1140 m keeps the last point
    # inside the modeled delay span (bin 764 sits at 1145 m)
    grid = np.asarray(
        np.concatenate(([100.0, 300.0, 500.0], np.linspace(650.0, 1140.0, 11)))
        if ranges_m is None else ranges_m,
        dtype=float,
    )
    scenario = {
        "experiment": "detector_compare",
        "trials": trials,
        "rcs_dbsm": rcs_dbsm,
        "ranges_m": grid.tolist(),
    }
    run = _RunDir(out_dir, bundle, scenario)
    profile = bundle.profile("optimal")

    rows = []
    curves = {"hierarchical_1d": [], "ca_2d": []}
    cis = {"hierarchical_1d": [], "ca_2d": []}
    for gi, r in enumerate(grid):
        targets = detector_compare_targets(bundle, float(r), rcs_dbsm)
        hits = {"hierarchical_1d": 0, "ca_2d": 0}
        for t in range(trials):
            rng = _rng(seed, gi, t)
            pris = simulate_cpi(bundle.codes, targets, bundle.pulse, bundle.channel, rng)
            rdm = process_cpi(pris, bundle.codes, bundle.pulse, profile)
            for name, det in (("hierarchical_1d", hierarchical_detect),
                              ("ca_2d", cfar_2d)):
                rep = det(rdm, bundle.cfar)
                ok = all(
                    _target_detected(rep, rdm, tg, bundle.pulse, bundle.channel)
                    for tg in targets
                )
                hits[name] += ok
        row = [float(r)]
        for name in ("hierarchical_1d", "ca_2d"):
            p, lo, hi = wilson_interval(hits[name], trials)
            curves[name].append(p)
            cis[name].append((lo, hi))
            row += [hits[name], p, lo, hi]
        rows.append(row)

    max_range = {}
    for name, pds in curves.items():
        above = [grid[i] for i, p in enumerate(pds) if p >= 0.9]
        max_range[name] = float(max(above)) if above else 0.0

    # CIs at the hierarchical detector's last detectable grid point
    sep = {}
    if max_range["hierarchical_1d"] > 0:
        gi = int(np.nonzero(grid == max_range["hierarchical_1d"])[0][0])
        sep = {
            "range_m": float(grid[gi]),
            "hierarchical_ci": list(cis["hierarchical_1d"][gi]),
            "ca_2d_ci": list(cis["ca_2d"][gi]),
            "nonoverlapping": cis["hierarchical_1d"][gi][0] > cis["ca_2d"][gi][1],
        }

    run.write_csv(
        "detector_compare.csv",
        ["range_m", "hier_hits", "hier_p_d", "hier_ci_low", "hier_ci_high",
         "ca2d_hits", "ca2d_p_d", "ca2d_ci_low", "ca2d_ci_high"],
        rows,
    )
    if make_figures and run.path is not None:
        pd_curves_figure(
            run.file("detector_compare.png"), grid,
            {
                name: (curves[name],
                       [c[0] for c in cis[name]],
                       [c[1] for c in cis[name]])
                for name in curves
            },
            title="hierarchical 1D vs 2D CFAR",
        )
    summary = {
        "trials": trials,
        "rcs_dbsm": rcs_dbsm,
        "max_range_m": max_range,
        "separation_point": sep,
        "curve": {
            "range_m": grid.tolist(),
            "hierarchical_1d": curves["hierarchical_1d"],
            "ca_2d": curves["ca_2d"],
        },
    }
    result = ExperimentResult("detector_compare", summary,
                              _provenance(bundle, scenario, seed), tuple(run.names))
    run.write_json("summary.json", result.to_dict())
    return result


def run_metric_sweep(
    bundle: ExperimentBundle,
    *,
    rcs_dbsm: float | None = None,
    seed: int = 1234,
    out_dir=None,
    make_figures: bool = True,
) -> ExperimentResult:
    """Analytic per-bin sweep: region, sidelobe ratio, optimal weight, metric.

    ``F_dB`` is evaluated at the per-bin optimal weight and the given RCS;
    ``gamma`` only exists in the eclipsed span, and the optimal weight is
    undefined where only the low segment is received.
    """
    rcs = bundle.rcs_dbsm if rcs_dbsm is None else float(rcs_dbsm)
    scenario = {"experiment": "metric_sweep", "rcs_dbsm": rcs}
    run = _RunDir(out_dir, bundle, scenario)
    par = bundle.metric_params()
    pulse = bundle.pulse
    sigma = dbsm_to_sqm(rcs)

    rows = []
    n_list, w_list, f_list, s_list = [], [], [], []
    for n in range(1, pulse.n_bins + 1):
        reg = region(n, par)
        r_m = bin_range_m(n, par)
        g = par.gamma(n) if pulse.recovery_len < n < pulse.rx_start else math.nan
        if n <= pulse.recovery_len:
            w = math.nan
        elif n > pulse.low_len + pulse.silent_len:
            w = 1.0
        else:
            w = optimal_weight(n, par)
        f_db = (
            db(sensing_metric(n, 0.0 if math.isnan(w) else w, sigma, r_m, par))
        )
        s_star = sqm_to_dbsm(min_detectable_rcs(n, bundle.rho, par))
        rows.append((n, r_m, reg.name.lower(), g, w, f_db, s_star))
        n_list.append(n)
        w_list.append(w)
        f_list.append(f_db)
        s_list.append(s_star)

    run.write_csv(
        "metric_sweep.csv",
        ["n_tau", "range_m", "region", "gamma", "w_star", "F_dB", "sigma_star_dbsm"],
        rows,
    )
    if make_figures and run.path is not None:
        metric_sweep_figure(run.file("metric_sweep.png"),
                            np.array(n_list), np.array(w_list),
                            np.array(s_list), np.array(f_list))
    finite_s = [s for s in s_list if math.isfinite(s)]
    summary = {
        "rcs_dbsm": rcs,
        "bins": len(rows),
        "worst_sigma_star_dbsm": max(finite_s),
        "worst_sigma_star_bin": n_list[s_list.index(max(finite_s))],
        "min_f_db": min(f for f in f_list if math.isfinite(f)),
    }
    result = ExperimentResult("metric_sweep", summary,
                              _provenance(bundle, scenario, seed), tuple(run.names))
    run.write_json("summary.json", result.to_dict())
    return result


def run_sequence_verify(
    bundle: ExperimentBundle,
    *,
    seed: int = 1234,
    out_dir=None,
    make_figures: bool = True,
) -> ExperimentResult:
    """Check the complementary/inverse identities of the pulse code set."""
    scenario = {"experiment": "sequence_verify"}
    run = _RunDir(out_dir, bundle, scenario)
    codes = bundle.codes
    residuals = verify_set(codes)
    ok = (
        residuals["autocorr_residual_high"] == 0
        and residuals["autocorr_residual_low"] == 0
        and residuals["cross_residual"] == 0
    )
    if run.path is not None:
        save_set(codes, run.file("sequences.json"))
        run.write_json("sequence_verify.json", {"residuals": residuals, "ok": ok})
    if make_figures and run.path is not None:
        sequence_figure(run.file("sequences.png"), codes)
    summary = {"ok": ok, **residuals}
    result = ExperimentResult("sequence_verify", summary,
                              _provenance(bundle, scenario, seed), tuple(run.names))
    run.write_json("summary.json", result.to_dict())
    return result
