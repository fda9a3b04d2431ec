"""Power-measurement calibration toolkit for Jetson-class edge devices.

Built-in board sensors systematically under-report the power actually
drawn at the DC input. This package ingests paired internal/external
power traces, conditions them (moving-average filter, time alignment),
fits linear calibration models, validates them against reference data,
and applies them to produce trustworthy power and energy figures. A
replay backend lets the full live-sampling pipeline run without hardware.
"""

from .errors import (BaselineUndefinedError, ConfigError, DataError,
                     DegenerateDataError, EmptyOverlapError,
                     InsufficientDataError, InvalidReadingError, JetcalError,
                     NoEvaluableDataError, ParseError, ProfileError,
                     SamplerFailedError, SchemaError, SensorReadError,
                     SuspiciousFitError, UnitError, UnknownDeviceError)
from .ingest import (DualChannelRecord, RailReading, parse_trace,
                     parse_value_trace, power_from_channels, sum_rails,
                     write_rails, write_trace)
from .models import (BOOT_PEAK_CURRENT_MA, BUILTIN_MODELS, CalibrationModel,
                     EnergyReport, apply_model, apply_trace, get_model,
                     integrate_energy, invert_model, load_models, save_models)
from .regression import FitReport, PairedDataset, evaluate, fit, fit_report_text
from .sensor import (DeviceProfile, ReplayNodes, SampleBuffer, SamplerStats,
                     load_profile, replay_backend, run_sampler, sample_once,
                     save_profile)
from .signal import (MovingAverageFilter, PeakReport, align, detect_peak,
                     moving_average)
from .traces import PowerSample, PowerTrace, canonical_device_id

__version__ = "0.1.0"

__all__ = [
    "BOOT_PEAK_CURRENT_MA",
    "BUILTIN_MODELS",
    "BaselineUndefinedError",
    "CalibrationModel",
    "ConfigError",
    "DataError",
    "DegenerateDataError",
    "DeviceProfile",
    "DualChannelRecord",
    "EmptyOverlapError",
    "EnergyReport",
    "FitReport",
    "InsufficientDataError",
    "InvalidReadingError",
    "JetcalError",
    "MovingAverageFilter",
    "NoEvaluableDataError",
    "PairedDataset",
    "ParseError",
    "PeakReport",
    "PowerSample",
    "PowerTrace",
    "ProfileError",
    "RailReading",
    "ReplayNodes",
    "SampleBuffer",
    "SamplerFailedError",
    "SamplerStats",
    "SchemaError",
    "SensorReadError",
    "SuspiciousFitError",
    "UnitError",
    "UnknownDeviceError",
    "align",
    "apply_model",
    "apply_trace",
    "canonical_device_id",
    "detect_peak",
    "evaluate",
    "fit",
    "fit_report_text",
    "get_model",
    "integrate_energy",
    "invert_model",
    "load_models",
    "load_profile",
    "moving_average",
    "parse_trace",
    "parse_value_trace",
    "power_from_channels",
    "replay_backend",
    "run_sampler",
    "sample_once",
    "save_models",
    "save_profile",
    "sum_rails",
    "write_rails",
    "write_trace",
]
