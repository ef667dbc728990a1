"""Streaming Sim(3) submap fusion with layer-wise scale alignment."""

from ._core import (
    Config,
    ContainerError,
    DataError,
    NumericalError,
    StreamResult,
    ate,
    cli,
    closed_form_scale,
    config_keys,
    irls_scale,
    kabsch,
    read_ply,
    read_tum,
    run_pipeline,
    run_stream,
    schedule_windows,
    segment_depth,
    umeyama,
    write_ply,
)

__version__ = "0.1.0"

__all__ = [
    "Config",
    "ContainerError",
    "DataError",
    "NumericalError",
    "StreamResult",
    "ate",
    "cli",
    "closed_form_scale",
    "config_keys",
    "irls_scale",
    "kabsch",
    "read_ply",
    "read_tum",
    "run_pipeline",
    "run_stream",
    "schedule_windows",
    "segment_depth",
    "umeyama",
    "write_ply",
]
