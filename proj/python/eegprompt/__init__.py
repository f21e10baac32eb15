from eegprompt._eegprompt import (
    ConfigError,
    Error,
    IoError,
    ParameterError,
    ParseError,
    TransportError,
    default_tap_count,
    design_bandpass_fir,
    extract_features,
    format_cell,
    majority_vote_baseline,
    parse_label,
    run_cli,
    write_synth_dataset,
)

__all__ = [
    "ConfigError",
    "Error",
    "IoError",
    "ParameterError",
    "ParseError",
    "TransportError",
    "default_tap_count",
    "design_bandpass_fir",
    "extract_features",
    "format_cell",
    "majority_vote_baseline",
    "parse_label",
    "run_cli",
    "write_synth_dataset",
]
