"""Information bottleneck speaker diarization."""

from ._core import (
    DataError,
    Error,
    FormatError,
    IoError,
    NumericError,
    diarize,
    extract_mfcc,
    format_rttm,
    modes,
    read_features,
    score,
    synth,
)

__all__ = [
    "DataError",
    "Error",
    "FormatError",
    "IoError",
    "NumericError",
    "diarize",
    "extract_mfcc",
    "format_rttm",
    "modes",
    "read_features",
    "score",
    "synth",
]
