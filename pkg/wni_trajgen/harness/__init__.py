"""Pipeline orchestration, artifact persistence and metrics."""

from .metrics import emit_metrics, read_metrics_csv, summarize, write_metrics_csv
from .persistence import (
    load_bkb,
    read_dataset,
    read_json,
    require_file,
    save_bkb,
    sha256_file,
    verify_hash,
    write_dataset,
    write_json,
)
from .pipeline import STAGES, PipelineRunner, parse_stages, run_pipeline

__all__ = [
    "STAGES",
    "PipelineRunner",
    "emit_metrics",
    "load_bkb",
    "parse_stages",
    "read_dataset",
    "read_json",
    "read_metrics_csv",
    "require_file",
    "run_pipeline",
    "save_bkb",
    "sha256_file",
    "summarize",
    "verify_hash",
    "write_dataset",
    "write_json",
    "write_metrics_csv",
]
