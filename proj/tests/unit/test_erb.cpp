#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"
#include "taylorse/erb.hpp"
#include "taylorse/error.hpp"

using namespace taylorse;

TEST_CASE("ERB-rate scale and its inverse") {
    CHECK(erb::hz_to_erb_rate(0.0) == 0.0);
    CHECK(erb::hz_to_erb_rate(1000.0) == doctest::Approx(21.4 * std::log10(1.0 + 4.37)));
    for (double f : {50.0, 440.0, 3000.0, 8000.0}) CHECK(erb::erb_rate_to_hz(erb::hz_to_erb_rate(f)) == doctest::Approx(f));
}

TEST_CASE("32 x 161 matrix is nonnegative with unit rows, every bin covered") {
    const auto& bank = erb::default_bank();
    REQUIRE(bank.bands() == 32);
    REQUIRE(bank.bins() == 161);
    for (int b = 0; b < 32; ++b) {
        double row = 0.0;
        for (int k = 0; k < 161; ++k) {
            CHECK(bank.weight(b, k) >= 0.0);
            row += bank.weight(b, k);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
    }
    for (int k = 0; k < 161; ++k) {
        double col = 0.0, inv = 0.0;
        for (int b = 0; b < 32; ++b) {
            col += bank.weight(b, k);
            inv += bank.inverse_weight(k, b);
            CHECK(bank.inverse_weight(k, b) >= 0.0);
        }
        CHECK(col > 0.0);
        CHECK(inv == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("band centres are equally spaced in ERB rate from 0 to Nyquist") {
    const auto c = erb::default_bank().band_centers_hz();
    REQUIRE(c.size() == 32);
    CHECK(c.front() == doctest::Approx(0.0));
    CHECK(c.back() == doctest::Approx(8000.0));
    const double step = erb::hz_to_erb_rate(c[1]) - erb::hz_to_erb_rate(c[0]);
    for (std::size_t i = 1; i < c.size(); ++i)
        CHECK(erb::hz_to_erb_rate(c[i]) - erb::hz_to_erb_rate(c[i - 1]) == doctest::Approx(step));
}

TEST_CASE("degenerate band counts are rejected") {
    CHECK_THROWS_AS(erb::ErbBank(161, 161, 16000), ConfigError);
    CHECK_THROWS_AS(erb::ErbBank(200, 161, 16000), ConfigError);
}

TEST_CASE("flat spectrum round trip") {
    const auto& bank = erb::default_bank();
    std::vector<double> flat(161, 1.0), bands(32), back(161);
    bank.to_erb(flat, bands);
    for (double v : bands) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    bank.to_linear(bands, back);
    for (double v : back) CHECK(std::abs(v - 1.0) <= 0.05);
}

TEST_CASE("zero, negative and monotone inputs") {
    const auto& bank = erb::default_bank();
    std::vector<double> zero(161, 0.0), bands(32), lin(161);
    bank.to_erb(zero, bands);
    for (double v : bands) CHECK(v == 0.0);
    bank.to_linear(std::vector<double>(32, 0.0), lin);
    for (double v : lin) CHECK(v == 0.0);

    std::vector<double> neg(161, 1.0);
    neg[7] = -0.1;
    CHECK_THROWS_AS(bank.to_erb(neg, bands), ConfigError);

    auto a = support::gaussian(161, 3);
    for (auto& v : a) v = std::abs(v);
    auto b = a;
    const auto bump = support::gaussian(161, 4);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += std::abs(bump[i]);
    std::vector<double> ea(32), eb(32);
    bank.to_erb(a, ea);
    bank.to_erb(b, eb);
    for (std::size_t i = 0; i < 32; ++i) CHECK(eb[i] >= ea[i]);
}

TEST_CASE("a tone at bin 20 lands in the bands around 1 kHz") {
    const auto& bank = erb::default_bank();
    std::vector<double> tone(161, 0.0), bands(32);
    tone[20] = 1.0;
    bank.to_erb(tone, bands);
    std::vector<int> support_bands;
    for (int b = 0; b < 32; ++b)
        if (bands[static_cast<std::size_t>(b)] > 0.0) support_bands.push_back(b);
    REQUIRE(!support_bands.empty());
    CHECK(support_bands.size() <= 2);
    const auto c = bank.band_centers_hz();
    for (int b : support_bands) {
        // each supporting band's triangle spans 1 kHz
        const double lo = b > 0 ? c[static_cast<std::size_t>(b - 1)] : 0.0;
        const double hi = b < 31 ? c[static_cast<std::size_t>(b + 1)] : 8000.0;
        CHECK(lo <= 1000.0);
        CHECK(hi >= 1000.0);
    }
}

TEST_CASE("smooth spectra survive the round trip above 100 Hz") {
    const auto& bank = erb::default_bank();
    // octave-band noise shapes: slowly varying log-spectra
    for (int shape = 0; shape < 6; ++shape) {
        std::vector<double> mag(161), bands(32), back(161);
        for (int k = 0; k < 161; ++k) {
            const double f = std::max(k * 50.0, 25.0);
            const double octave = std::log2(f / 125.0);
            mag[static_cast<std::size_t>(k)] = std::exp(-0.5 * std::pow((octave - shape) / 1.5, 2.0)) + 0.2;
        }
        bank.to_erb(mag, bands);
        bank.to_linear(bands, back);
        for (int k = 3; k < 161; ++k)  // bins above 100 Hz
            CHECK(std::abs(back[static_cast<std::size_t>(k)] - mag[static_cast<std::size_t>(k)]) <=
                  0.10 * mag[static_cast<std::size_t>(k)]);
    }
}

TEST_CASE("frame helpers and float path agree with the per-frame double path") {
    const auto& bank = erb::default_bank();
    auto m = support::gaussian(3 * 161, 8);
    for (auto& v : m) v = std::abs(v);
    const auto e = bank.to_erb_frames(m, 3);
    REQUIRE(e.size() == 96);
    std::vector<double> one(32);
    bank.to_erb(std::span(m).subspan(161, 161), one);
    for (int b = 0; b < 32; ++b) CHECK(e[32 + static_cast<std::size_t>(b)] == doctest::Approx(one[static_cast<std::size_t>(b)]));
    std::vector<float> mf(m.begin(), m.begin() + 161), ef(32);
    bank.to_erb(mf, ef);
    for (int b = 0; b < 32; ++b) CHECK(ef[static_cast<std::size_t>(b)] == doctest::Approx(e[static_cast<std::size_t>(b)]).epsilon(1e-5));
}
