#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "taylorse/error.hpp"
#include "taylorse/wav.hpp"

using namespace taylorse;

namespace {

std::filesystem::path tmp(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("taylorse_wav_" + name);
}

}  // namespace

TEST_CASE("float32 WAV round trip is exact") {
    wav::Audio a;
    a.format = wav::SampleFormat::float32;
    a.samples = {std::vector<double>(1000), std::vector<double>(1000)};
    const auto n = support::gaussian(2000, 1, 0.3);
    for (std::size_t i = 0; i < 1000; ++i) {
        a.samples[0][i] = static_cast<float>(n[i]);
        a.samples[1][i] = static_cast<float>(n[1000 + i]);
    }
    wav::write(tmp("f32.wav"), a);
    const auto b = wav::read(tmp("f32.wav"));
    CHECK(b.sample_rate == 16000);
    CHECK(b.format == wav::SampleFormat::float32);
    REQUIRE(b.channels() == 2);
    REQUIRE(b.length() == 1000);
    CHECK(b.samples == a.samples);
}

TEST_CASE("pcm16 WAV round trip within one quantization step") {
    wav::Audio a;
    a.samples = {support::gaussian(500, 2, 0.2)};
    for (auto& v : a.samples[0]) v = std::clamp(v, -1.0, 1.0);
    wav::write(tmp("pcm.wav"), a);
    const auto b = wav::read(tmp("pcm.wav"));
    CHECK(b.format == wav::SampleFormat::pcm16);
    REQUIRE(b.length() == 500);
    CHECK(support::max_abs_diff(a.samples[0], b.samples[0]) <= 1.0 / 32768.0);
}

TEST_CASE("wrong sample rate is an explicit error") {
    wav::Audio a;
    a.sample_rate = 8000;
    a.samples = {std::vector<double>(100, 0.0)};
    wav::write(tmp("8k.wav"), a);
    CHECK_THROWS_AS(wav::read_at_rate(tmp("8k.wav"), 16000), FormatError);
}

TEST_CASE("non-WAV input is rejected") {
    std::ofstream(tmp("junk.wav")) << "definitely not RIFF";
    CHECK_THROWS_AS(wav::read(tmp("junk.wav")), FormatError);
    CHECK_THROWS_AS(wav::read(tmp("missing_file.wav")), FormatError);
}
