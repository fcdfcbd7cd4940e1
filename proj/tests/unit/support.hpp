#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "taylorse/dsp.hpp"

namespace support {

inline std::vector<float> uniform(std::size_t n, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> d(lo, hi);
    std::vector<float> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, sd);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

template <class A, class B>
double max_abs_diff(const A& a, const B& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

inline double max_abs_diff(const taylorse::dsp::ComplexSpectrogram& a, const taylorse::dsp::ComplexSpectrogram& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline taylorse::dsp::ComplexSpectrogram random_spec(std::size_t frames, std::size_t bins, std::size_t channels,
                                                     std::uint64_t seed) {
    taylorse::dsp::ComplexSpectrogram s(frames, bins, channels);
    auto v = gaussian(2 * s.data().size(), seed);
    for (std::size_t i = 0; i < s.data().size(); ++i) s.data()[i] = {v[2 * i], v[2 * i + 1]};
    return s;
}

}  // namespace support
