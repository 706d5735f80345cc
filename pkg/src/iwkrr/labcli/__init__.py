"""Configuration-driven sweep harness: config, execution, CSV/SVG output and the CLI."""

from .config import (PRESETS, BoundConstants, LambdaKind, LambdaRule, SweepConfig, load_config,
                     parse_document, preset_config, validate_config)
from .output import emit_csv, emit_errors, emit_plots, read_csv, read_errors, series_stats
from .sweep import ErrorReason, ErrorRecord, SweepRecord, SweepResult, record_field_names, run_sweep
from .cli import main

__all__ = [
    "PRESETS", "BoundConstants", "LambdaKind", "LambdaRule", "SweepConfig", "load_config",
    "parse_document", "preset_config", "validate_config", "emit_csv", "emit_errors", "emit_plots",
    "read_csv", "read_errors", "series_stats", "ErrorReason", "ErrorRecord", "SweepRecord",
    "SweepResult", "record_field_names", "run_sweep", "main",
]
