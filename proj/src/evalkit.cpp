#include "taylorse/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "taylorse/error.hpp"

namespace taylorse::eval {

namespace {

double mean(std::span<const double> x) {
    return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double ratio_db(double num, double den) {
    if (den <= 0.0) return kSiSnrCap;
    if (num <= 0.0) return -kSiSnrCap;
    return std::clamp(10.0 * std::log10(num / den), -kSiSnrCap, kSiSnrCap);
}

void same_length(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ShapeError("signals differ in length: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}

}  // namespace

double energy(std::span<const double> x) {
    double e = 0.0;
    for (double v : x) e += v * v;
    return e;
}

std::vector<double> fit_length(std::span<const double> noise, std::size_t length) {
    if (noise.empty()) throw ConfigError("noise signal is empty");
    std::vector<double> out(length);
    for (std::size_t i = 0; i < length; ++i) out[i] = noise[i % noise.size()];
    return out;
}

double noise_scale(std::span<const double> clean, std::span<const double> noise, double snr_db) {
    const double ec = energy(clean);
    const double en = energy(noise);
    if (ec <= 0.0) throw ConfigError("clean signal has zero energy");
    if (en <= 0.0) throw ConfigError("noise signal has zero energy");
    return std::sqrt(ec / (en * std::pow(10.0, snr_db / 10.0)));
}

std::vector<double> mix(std::span<const double> clean, std::span<const double> noise, double snr_db) {
    const auto n = fit_length(noise, clean.size());
    const double alpha = noise_scale(clean, n, snr_db);
    std::vector<double> out(clean.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = clean[i] + alpha * n[i];
    return out;
}

double si_snr(std::span<const double> estimate, std::span<const double> reference) {
    same_length(estimate, reference);
    const double me = mean(estimate), mr = mean(reference);
    double dot = 0.0, rr = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double r = reference[i] - mr;
        dot += (estimate[i] - me) * r;
        rr += r * r;
    }
    if (rr <= 0.0) throw ConfigError("reference signal has zero energy");
    const double a = dot / rr;
    double target = 0.0, residual = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double s = a * (reference[i] - mr);
        const double e = (estimate[i] - me) - s;
        target += s * s;
        residual += e * e;
    }
    // residual at rounding level counts as a perfect estimate
    if (residual <= target * 1e-20) return kSiSnrCap;
    return ratio_db(target, residual);
}

double snr(std::span<const double> estimate, std::span<const double> reference) {
    same_length(estimate, reference);
    const double er = energy(reference);
    if (er <= 0.0) throw ConfigError("reference signal has zero energy");
    double err = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) err += (estimate[i] - reference[i]) * (estimate[i] - reference[i]);
    return ratio_db(er, err);
}

std::vector<double> orthogonalize(std::span<const double> noise, std::span<const double> reference) {
    same_length(noise, reference);
    const double mn = mean(noise), mr = mean(reference);
    std::vector<double> n(noise.size()), r(reference.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
        n[i] = noise[i] - mn;
        r[i] = reference[i] - mr;
    }
    const double rr = energy(r);
    if (rr <= 0.0) return n;
    const double a = std::inner_product(n.begin(), n.end(), r.begin(), 0.0) / rr;
    for (std::size_t i = 0; i < n.size(); ++i) n[i] -= a * r[i];
    return n;
}

std::vector<double> white_noise(std::size_t length, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> out(length);
    for (auto& v : out) v = g(rng);
    return out;
}

ScoreRow score(std::string utterance, std::span<const double> clean, std::span<const double> noisy,
               std::span<const double> enhanced) {
    return {std::move(utterance), snr(noisy, clean), si_snr(noisy, clean), si_snr(enhanced, clean)};
}

void write_scores(const std::filesystem::path& path, std::span<const ScoreRow> rows, bool append) {
    const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
    if (!os) throw Error("cannot write " + path.string());
    if (fresh) os << "utterance,snr_in,si_snr_in,si_snr_out\n";
    os << std::fixed << std::setprecision(4);
    for (const auto& r : rows) os << r.utterance << ',' << r.snr_in << ',' << r.si_snr_in << ',' << r.si_snr_out << '\n';
}

}  // namespace taylorse::eval
