#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace taylorse::eval {

/// Value reported for a perfect estimate.
inline constexpr double kSiSnrCap = 120.0;

double energy(std::span<const double> x);

/// Loops or truncates `noise` to `length` samples.
std::vector<double> fit_length(std::span<const double> noise, std::size_t length);

/// Scale alpha such that ||clean||^2 / ||alpha noise||^2 = 10^(snr_db/10).
/// Throws ConfigError on zero-energy inputs.
double noise_scale(std::span<const double> clean, std::span<const double> noise, double snr_db);

/// clean + alpha * noise, noise fitted to the clean length first.
std::vector<double> mix(std::span<const double> clean, std::span<const double> noise, double snr_db);

/// Scale-invariant SNR in dB, capped at kSiSnrCap. Both signals are made
/// zero-mean first. Throws on unequal lengths or a zero reference.
double si_snr(std::span<const double> estimate, std::span<const double> reference);

/// Plain SNR of `estimate` against `reference` in dB, capped the same way.
double snr(std::span<const double> estimate, std::span<const double> reference);

/// Zero-mean copy of `noise` with its component along the zero-mean
/// reference removed.
std::vector<double> orthogonalize(std::span<const double> noise, std::span<const double> reference);

/// Unit-variance Gaussian noise.
std::vector<double> white_noise(std::size_t length, std::uint64_t seed);

struct ScoreRow {
    std::string utterance;
    double snr_in = 0.0;
    double si_snr_in = 0.0;
    double si_snr_out = 0.0;
};

ScoreRow score(std::string utterance, std::span<const double> clean, std::span<const double> noisy,
               std::span<const double> enhanced);

/// CSV with header utterance,snr_in,si_snr_in,si_snr_out. With `append`
/// the header is only written to a new or empty file.
void write_scores(const std::filesystem::path& path, std::span<const ScoreRow> rows, bool append = false);

}  // namespace taylorse::eval
