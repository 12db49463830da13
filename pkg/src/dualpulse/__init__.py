"""Dual-power phase-coded pulse sensing: waveform, receiver, detection, analytics.

The package simulates a chip-level monostatic sensing link built around a
dual power-level phase-coded pulse: a complementary code set whose range
sidelobes cancel over a four-pulse cycle, a weighted two-branch mismatched
filter with closed-form optimal weights, hierarchical 1D CFAR detection on
the range-Doppler map, and the analytic detectability machinery (sidelobe
ratios, the sensing metric, minimum detectable RCS) that predicts it.
"""

__version__ = "0.1.0"

from .waveform import PulseConfig, default_config, build_pri, frame_overhead
from .sequences import SequenceSet, build_sequence_set, golay_pair, verify_set
from .channel import ChannelConfig, Target, default_channel, simulate_cpi, channel_gain
from .receiver import (
    RdMap,
    WeightProfile,
    optimal_profile,
    uniform_profile,
    process_cpi,
)
from .metrics import (
    MetricParams,
    Region,
    sensing_metric,
    optimal_weight,
    min_detectable_rcs,
    paslr,
    monotonicity_coefficients,
)
from .detection import CfarConfig, DetectionReport, hierarchical_detect, cfar_2d
from .baselines import LfmConfig, OfdmSensingConfig
from .experiments import (
    ExperimentBundle,
    ExperimentResult,
    load_bundle,
    run_rdmap,
    run_pd_vs_range,
    run_min_rcs,
    run_multi_target,
    run_detector_compare,
    run_metric_sweep,
    run_sequence_verify,
)

__all__ = [
    "__version__",
    "PulseConfig", "default_config", "build_pri", "frame_overhead",
    "SequenceSet", "build_sequence_set", "golay_pair", "verify_set",
    "ChannelConfig", "Target", "default_channel", "simulate_cpi", "channel_gain",
    "RdMap", "WeightProfile", "optimal_profile", "uniform_profile", "process_cpi",
    "MetricParams", "Region", "sensing_metric", "optimal_weight",
    "min_detectable_rcs", "paslr", "monotonicity_coefficients",
    "CfarConfig", "DetectionReport", "hierarchical_detect", "cfar_2d",
    "LfmConfig", "OfdmSensingConfig",
    "ExperimentBundle", "ExperimentResult", "load_bundle",
    "run_rdmap", "run_pd_vs_range", "run_min_rcs", "run_multi_target",
    "run_detector_compare", "run_metric_sweep", "run_sequence_verify",
]
