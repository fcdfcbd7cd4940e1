#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "taylorse/dsp.hpp"
#include "taylorse/error.hpp"

using namespace taylorse;
using dsp::cplx;

namespace {

double rel_l2(std::span<const double> a, std::span<const double> b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("window endpoints, peak and range") {
    const auto w = dsp::make_window({});
    REQUIRE(w.size() == 320);
    CHECK(w[0] == 0.0);
    CHECK(w[160] == doctest::Approx(1.0).epsilon(1e-15));
    for (double v : w) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("four-point window closed form") {
    dsp::StftConfig c;
    c.win_len = 4;
    const auto w = dsp::make_window(c);
    REQUIRE(w.size() == 4);
    CHECK(w[0] == 0.0);
    CHECK(w[1] == doctest::Approx(std::sqrt(0.5)));
    CHECK(w[2] == doctest::Approx(1.0));
    CHECK(w[3] == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("bad window lengths are rejected") {
    dsp::StftConfig c;
    c.win_len = 7;
    CHECK_THROWS_AS(dsp::make_window(c), ConfigError);
    c.win_len = 0;
    CHECK_THROWS_AS(dsp::make_window(c), ConfigError);
}

TEST_CASE("squared window overlap-adds to one") {
    const auto w = dsp::make_window({});
    // three windows at hops 0, 160, 320; every sample in [160, 480) has two of them
    std::vector<double> acc(640, 0.0);
    for (int s = 0; s < 3; ++s)
        for (int n = 0; n < 320; ++n) acc[static_cast<std::size_t>(s * 160 + n)] += w[static_cast<std::size_t>(n)] * w[static_cast<std::size_t>(n)];
    for (std::size_t i = 160; i < 480; ++i) CHECK(acc[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("config invariants") {
    dsp::StftConfig c;
    CHECK(c.num_bins() == 161);
    CHECK_NOTHROW(c.validate());
    c.hop = 100;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("unwindowed FFT of a constant is pure DC") {
    dsp::RealFft fft(320);
    std::vector<double> x(320, 1.0);
    std::vector<cplx> X(161);
    fft.forward(x, X);
    CHECK(std::abs(X[0]) == doctest::Approx(320.0));
    for (std::size_t k = 1; k < X.size(); ++k) CHECK(std::abs(X[k]) <= 1e-10 * 320.0);
}

TEST_CASE("stft of a constant equals the window spectrum, peaked at DC") {
    std::vector<double> x(1600, 1.0);
    const auto S = dsp::stft(x);
    const auto w = dsp::make_window({});
    for (std::size_t k = 0; k < 161; ++k) {
        cplx ref{};
        for (std::size_t n = 0; n < 320; ++n)
            ref += w[n] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * n) / 320.0);
        for (std::size_t t = 0; t < S.frames(); ++t) CHECK(std::abs(S(t, k) - ref) <= 1e-9);
    }
    for (std::size_t k = 1; k < 161; ++k) CHECK(std::abs(S(0, k)) < std::abs(S(0, 0)));
}

TEST_CASE("1 kHz tone peaks at bin 20") {
    std::vector<double> x(16000);
    for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2.0 * std::numbers::pi * 1000.0 * double(n) / 16000.0);
    const auto S = dsp::stft(x);
    for (std::size_t t = 0; t < S.frames(); ++t) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < 161; ++k)
            if (std::abs(S(t, k)) > std::abs(S(t, best))) best = k;
        CHECK(best == 20);
    }
}

TEST_CASE("zero signal gives zero spectrogram and back") {
    std::vector<double> x(800, 0.0);
    const auto S = dsp::stft(x);
    CHECK(S.frames() == 4);
    for (const auto& v : S.data()) CHECK(v == cplx{});
    for (double v : dsp::istft(S)) CHECK(v == 0.0);
}

TEST_CASE("short signal error names the minimum") {
    std::vector<double> x(100, 0.0);
    try {
        (void)dsp::stft(x);
        FAIL("expected an exception");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("320") != std::string::npos);
    }
}

TEST_CASE("round trip on white noise interiors") {
    const auto x = support::gaussian(16000, 11);
    const auto y = dsp::istft(dsp::stft(x));
    REQUIRE(y.size() == (dsp::frame_count(16000, {}) - 1) * 160 + 320);
    const std::size_t lo = 160, hi = y.size() - 160;
    const double err = rel_l2(std::span(y).subspan(lo, hi - lo), std::span(x).subspan(lo, hi - lo));
    CHECK(err <= 1e-6);
}

TEST_CASE("istft rejects wrong bin counts") {
    dsp::ComplexSpectrogram s(3, 100);
    CHECK_THROWS_AS(dsp::istft(s), ShapeError);
}

TEST_CASE("stft and istft are linear") {
    const auto x = support::gaussian(4000, 1), y = support::gaussian(4000, 2);
    const double a = 0.7, b = -1.9;
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = a * x[i] + b * y[i];
    const auto X = dsp::stft(x), Y = dsp::stft(y), Z = dsp::stft(z);
    double m = 0.0;
    for (std::size_t i = 0; i < Z.data().size(); ++i) m = std::max(m, std::abs(Z.data()[i] - (a * X.data()[i] + b * Y.data()[i])));
    CHECK(m <= 1e-9);

    auto A = support::random_spec(20, 161, 1, 5), B = support::random_spec(20, 161, 1, 6);
    const auto ia = dsp::istft(A), ib = dsp::istft(B);
    A += B;
    const auto iab = dsp::istft(A);
    for (std::size_t i = 0; i < iab.size(); ++i) CHECK(std::abs(iab[i] - (ia[i] + ib[i])) <= 1e-9);
}

TEST_CASE("frame t depends only on samples up to t*hop + win_len") {
    auto x = support::gaussian(3200, 3);
    const auto base = dsp::stft(x);
    const std::size_t n = 1000;  // first covered by frame 5 (samples 800..1119)
    x[n] += 1.0;
    const auto moved = dsp::stft(x);
    for (std::size_t t = 0; t < base.frames(); ++t) {
        bool changed = false;
        for (std::size_t k = 0; k < 161; ++k) changed = changed || base(t, k) != moved(t, k);
        const bool covers = t * 160 <= n && n < t * 160 + 320;
        CHECK(changed == covers);
    }
}

TEST_CASE("streaming analyzer matches batch stft for any chunking") {
    const auto x = support::gaussian(5000, 9);
    const auto S = dsp::stft(x);
    for (std::size_t chunk : {1u, 37u, 160u, 1000u, 5000u}) {
        dsp::StreamingAnalyzer an({}, 1);
        std::vector<std::vector<cplx>> frame;
        std::size_t t = 0;
        for (std::size_t pos = 0; pos < x.size(); pos += chunk) {
            const std::size_t len = std::min(chunk, x.size() - pos);
            an.push({std::span<const double>(x.data() + pos, len)});
            while (an.pop(frame)) {
                REQUIRE(t < S.frames());
                // a frame is ready exactly when its last sample has arrived
                CHECK(an.samples_seen() >= t * 160 + 320);
                for (std::size_t k = 0; k < 161; ++k) CHECK(std::abs(frame[0][k] - S(t, k)) <= 1e-12);
                ++t;
            }
        }
        CHECK(t == S.frames());
    }
}

TEST_CASE("streaming synthesizer matches batch istft") {
    const auto S = support::random_spec(30, 161, 1, 4);
    const auto ref = dsp::istft(S);
    dsp::StreamingSynthesizer syn({});
    std::vector<double> y;
    for (std::size_t t = 0; t < S.frames(); ++t) {
        const auto part = syn.push(S.row(0, t));
        CHECK(part.size() == 160);
        y.insert(y.end(), part.begin(), part.end());
    }
    const auto tail = syn.flush();
    y.insert(y.end(), tail.begin(), tail.end());
    REQUIRE(y.size() == ref.size());
    CHECK(support::max_abs_diff(y, ref) <= 1e-12);
}

TEST_CASE("multichannel stft stacks planes") {
    const auto a = support::gaussian(1000, 1), b = support::gaussian(1000, 2);
    const auto S = dsp::stft(std::vector<std::vector<double>>{a, b});
    CHECK(S.channels() == 2);
    const auto Sa = dsp::stft(a), Sb = dsp::stft(b);
    CHECK(support::max_abs_diff(S.channel(0), Sa) == 0.0);
    CHECK(support::max_abs_diff(S.channel(1), Sb) == 0.0);
    CHECK_THROWS_AS(dsp::stft(std::vector<std::vector<double>>{a, support::gaussian(999, 3)}), ShapeError);
}
