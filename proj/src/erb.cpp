#include "taylorse/erb.hpp"

#include <cmath>
#include <string>

#include "taylorse/error.hpp"

namespace taylorse::erb {

double hz_to_erb_rate(double hz) { return 21.4 * std::log10(1.0 + 0.00437 * hz); }

double erb_rate_to_hz(double rate) { return (std::pow(10.0, rate / 21.4) - 1.0) / 0.00437; }

ErbBank::ErbBank(int num_bands, int num_bins, int sample_rate)
    : bands_(num_bands), bins_(num_bins) {
    if (num_bands < 2) throw ConfigError("ERB bank needs at least 2 bands");
    if (num_bands >= num_bins)
        throw ConfigError("ERB bank: num_bands (" + std::to_string(num_bands) + ") must be < num_bins (" +
                          std::to_string(num_bins) + ")");
    if (sample_rate <= 0) throw ConfigError("ERB bank: sample_rate must be positive");

    const double nyquist = sample_rate / 2.0;
    const double top = hz_to_erb_rate(nyquist);
    centers_.resize(static_cast<std::size_t>(bands_));
    for (int b = 0; b < bands_; ++b) centers_[static_cast<std::size_t>(b)] = erb_rate_to_hz(top * b / (bands_ - 1));

    // Triangles between neighbouring centres; the outermost bands are half
    // triangles anchored at 0 Hz and Nyquist.
    matrix_.assign(static_cast<std::size_t>(bands_ * bins_), 0.0);
    for (int k = 0; k < bins_; ++k) {
        const double f = nyquist * k / (bins_ - 1);
        for (int b = 0; b < bands_; ++b) {
            const double c = centers_[static_cast<std::size_t>(b)];
            double w = 0.0;
            if (f <= c) {
                if (b == 0) w = 1.0;
                else {
                    const double lo = centers_[static_cast<std::size_t>(b - 1)];
                    if (f > lo) w = (f - lo) / (c - lo);
                }
            } else {
                if (b == bands_ - 1) w = 1.0;
                else {
                    const double hi = centers_[static_cast<std::size_t>(b + 1)];
                    if (f < hi) w = (hi - f) / (hi - c);
                }
            }
            matrix_[static_cast<std::size_t>(b * bins_ + k)] = w;
        }
    }

    inverse_.assign(static_cast<std::size_t>(bins_ * bands_), 0.0);
    for (int k = 0; k < bins_; ++k) {
        double col = 0.0;
        for (int b = 0; b < bands_; ++b) col += matrix_[static_cast<std::size_t>(b * bins_ + k)];
        if (col <= 0.0) throw ConfigError("ERB bank: linear bin " + std::to_string(k) + " has no band");
        for (int b = 0; b < bands_; ++b)
            inverse_[static_cast<std::size_t>(k * bands_ + b)] = matrix_[static_cast<std::size_t>(b * bins_ + k)] / col;
    }
    for (int b = 0; b < bands_; ++b) {
        double row = 0.0;
        for (int k = 0; k < bins_; ++k) row += matrix_[static_cast<std::size_t>(b * bins_ + k)];
        if (row <= 0.0) throw ConfigError("ERB bank: band " + std::to_string(b) + " covers no linear bin");
        for (int k = 0; k < bins_; ++k) matrix_[static_cast<std::size_t>(b * bins_ + k)] /= row;
    }
}

namespace {

template <typename T>
void check_nonneg(std::span<const T> v, const char* what) {
    for (T x : v)
        if (!(x >= T(0))) throw ConfigError(std::string(what) + ": input must be nonnegative and finite");
}

template <typename T>
void apply(const std::vector<double>& m, int rows, int cols, std::span<const T> in, std::span<T> out) {
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* w = m.data() + static_cast<std::size_t>(r * cols);
        for (int c = 0; c < cols; ++c) acc += w[c] * static_cast<double>(in[static_cast<std::size_t>(c)]);
        out[static_cast<std::size_t>(r)] = static_cast<T>(acc);
    }
}

}  // namespace

void ErbBank::to_erb(std::span<const double> mag, std::span<double> out) const {
    if (mag.size() != static_cast<std::size_t>(bins_) || out.size() != static_cast<std::size_t>(bands_))
        throw ShapeError("to_erb: expected " + std::to_string(bins_) + " bins");
    check_nonneg(mag, "to_erb");
    apply(matrix_, bands_, bins_, mag, out);
}

void ErbBank::to_linear(std::span<const double> bands, std::span<double> out) const {
    if (bands.size() != static_cast<std::size_t>(bands_) || out.size() != static_cast<std::size_t>(bins_))
        throw ShapeError("to_linear: expected " + std::to_string(bands_) + " bands");
    check_nonneg(bands, "to_linear");
    apply(inverse_, bins_, bands_, bands, out);
}

void ErbBank::to_erb(std::span<const float> mag, std::span<float> out) const {
    if (mag.size() != static_cast<std::size_t>(bins_) || out.size() != static_cast<std::size_t>(bands_))
        throw ShapeError("to_erb: expected " + std::to_string(bins_) + " bins");
    check_nonneg(mag, "to_erb");
    apply(matrix_, bands_, bins_, mag, out);
}

void ErbBank::to_linear(std::span<const float> bands, std::span<float> out) const {
    if (bands.size() != static_cast<std::size_t>(bands_) || out.size() != static_cast<std::size_t>(bins_))
        throw ShapeError("to_linear: expected " + std::to_string(bands_) + " bands");
    check_nonneg(bands, "to_linear");
    apply(inverse_, bins_, bands_, bands, out);
}

std::vector<double> ErbBank::to_erb_frames(std::span<const double> mag, std::size_t frames) const {
    if (mag.size() != frames * static_cast<std::size_t>(bins_)) throw ShapeError("to_erb: T x F size mismatch");
    std::vector<double> out(frames * static_cast<std::size_t>(bands_));
    for (std::size_t t = 0; t < frames; ++t)
        to_erb(mag.subspan(t * static_cast<std::size_t>(bins_), static_cast<std::size_t>(bins_)),
               std::span(out).subspan(t * static_cast<std::size_t>(bands_), static_cast<std::size_t>(bands_)));
    return out;
}

std::vector<double> ErbBank::to_linear_frames(std::span<const double> bands, std::size_t frames) const {
    if (bands.size() != frames * static_cast<std::size_t>(bands_)) throw ShapeError("to_linear: T x B size mismatch");
    std::vector<double> out(frames * static_cast<std::size_t>(bins_));
    for (std::size_t t = 0; t < frames; ++t)
        to_linear(bands.subspan(t * static_cast<std::size_t>(bands_), static_cast<std::size_t>(bands_)),
                  std::span(out).subspan(t * static_cast<std::size_t>(bins_), static_cast<std::size_t>(bins_)));
    return out;
}

const ErbBank& default_bank() {
    static const ErbBank bank(32, 161, 16000);
    return bank;
}

}  // namespace taylorse::erb
