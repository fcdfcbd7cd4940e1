"""Taylor-unfolded speech enhancement: STFT front end, models, streaming runtime."""

from ._taylorse import (
    ConfigError,
    Engine,
    Error,
    FormatError,
    Model,
    ShapeError,
    Weights,
    erb_centers_hz,
    erb_inverse_matrix,
    erb_matrix,
    istft,
    mix,
    orthogonalize,
    si_snr,
    snr,
    stft,
    white_noise,
)

SAMPLE_RATE = 16000
HOP = 160

__all__ = [
    "ConfigError",
    "Engine",
    "Error",
    "FormatError",
    "Model",
    "ShapeError",
    "Weights",
    "erb_centers_hz",
    "erb_inverse_matrix",
    "erb_matrix",
    "istft",
    "mix",
    "orthogonalize",
    "si_snr",
    "snr",
    "stft",
    "white_noise",
    "SAMPLE_RATE",
    "HOP",
]
