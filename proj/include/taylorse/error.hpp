#pragma once

#include <stdexcept>
#include <string>

namespace taylorse {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument (window length, band counts, orders).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor or spectrogram dimensions that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents (bad magic, version, CRC, WAV chunk).
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace taylorse
