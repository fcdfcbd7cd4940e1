#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace taylorse::erb {

/// Glasberg-Moore ERB-rate of a frequency in Hz.
double hz_to_erb_rate(double hz);
double erb_rate_to_hz(double rate);

/// Linear <-> ERB band compression. `matrix` is bands x bins with L1
/// normalized rows; `inverse` is bins x bands, the column-normalized
/// transpose, so every linear bin receives a convex mix of band values.
class ErbBank {
public:
    ErbBank(int num_bands, int num_bins, int sample_rate);

    int bands() const { return bands_; }
    int bins() const { return bins_; }

    double weight(int band, int bin) const { return matrix_[static_cast<std::size_t>(band * bins_ + bin)]; }
    double inverse_weight(int bin, int band) const {
        return inverse_[static_cast<std::size_t>(bin * bands_ + band)];
    }
    std::vector<double> band_centers_hz() const { return centers_; }

    /// One frame: `mag` has bins() entries, `out` bands() entries.
    void to_erb(std::span<const double> mag, std::span<double> out) const;
    void to_linear(std::span<const double> bands, std::span<double> out) const;
    void to_erb(std::span<const float> mag, std::span<float> out) const;
    void to_linear(std::span<const float> bands, std::span<float> out) const;

    /// Row-major T x bins -> T x bands, and back.
    std::vector<double> to_erb_frames(std::span<const double> mag, std::size_t frames) const;
    std::vector<double> to_linear_frames(std::span<const double> bands, std::size_t frames) const;

private:
    int bands_;
    int bins_;
    std::vector<double> matrix_;
    std::vector<double> inverse_;
    std::vector<double> centers_;
};

/// The 32-band, 161-bin, 16 kHz bank used by the lightweight model.
const ErbBank& default_bank();

}  // namespace taylorse::erb
