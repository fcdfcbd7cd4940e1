#include "taylorse/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "taylorse/error.hpp"

namespace taylorse::wav {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV codec assumes a little-endian host");

std::uint16_t u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace

Audio read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open WAV file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw FormatError(path.string() + ": not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const std::uint8_t* data = nullptr;
    std::size_t data_size = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* chunk = bytes.data() + pos;
        const std::size_t size = u32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = std::min(size, bytes.size() - body);
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (avail < 16) throw FormatError(path.string() + ": truncated fmt chunk");
            format = u16(chunk + 8);
            channels = u16(chunk + 10);
            rate = u32(chunk + 12);
            bits = u16(chunk + 22);
            if (format == kFormatExtensible && avail >= 26) format = u16(chunk + 32);
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            data_size = avail;
        }
        pos = body + size + (size & 1);
    }
    if (channels == 0 || data == nullptr) throw FormatError(path.string() + ": missing fmt or data chunk");

    Audio audio;
    audio.sample_rate = static_cast<int>(rate);
    audio.samples.assign(channels, {});
    if (format == kFormatPcm && bits == 16) {
        audio.format = SampleFormat::pcm16;
        const std::size_t n = data_size / (2u * channels);
        for (auto& c : audio.samples) c.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < channels; ++c) {
                const auto v = static_cast<std::int16_t>(u16(data + 2 * (i * channels + c)));
                audio.samples[c][i] = v / 32768.0;
            }
    } else if (format == kFormatFloat && bits == 32) {
        audio.format = SampleFormat::float32;
        const std::size_t n = data_size / (4u * channels);
        for (auto& c : audio.samples) c.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < channels; ++c)
                audio.samples[c][i] = std::bit_cast<float>(u32(data + 4 * (i * channels + c)));
    } else {
        throw FormatError(path.string() + ": unsupported WAV encoding (format " + std::to_string(format) +
                          ", " + std::to_string(bits) + " bits); need 16-bit PCM or 32-bit float");
    }
    return audio;
}

Audio read_at_rate(const std::filesystem::path& path, int required_rate) {
    Audio audio = read(path);
    if (audio.sample_rate != required_rate)
        throw FormatError(path.string() + ": sample rate " + std::to_string(audio.sample_rate) +
                          " Hz, expected " + std::to_string(required_rate) + " Hz (resampling is not supported)");
    return audio;
}

void write(const std::filesystem::path& path, const Audio& audio) {
    if (audio.samples.empty()) throw ConfigError("cannot write WAV with zero channels");
    const auto channels = static_cast<std::uint16_t>(audio.channels());
    const std::size_t n = audio.length();
    const bool is_float = audio.format == SampleFormat::float32;
    const std::uint16_t bytes_per_sample = is_float ? 4 : 2;
    const auto data_size = static_cast<std::uint32_t>(n * channels * bytes_per_sample);

    std::string out;
    out.reserve(44 + data_size);
    out += "RIFF";
    put32(out, 36 + data_size);
    out += "WAVEfmt ";
    put32(out, 16);
    put16(out, is_float ? kFormatFloat : kFormatPcm);
    put16(out, channels);
    put32(out, static_cast<std::uint32_t>(audio.sample_rate));
    put32(out, static_cast<std::uint32_t>(audio.sample_rate) * channels * bytes_per_sample);
    put16(out, static_cast<std::uint16_t>(channels * bytes_per_sample));
    put16(out, static_cast<std::uint16_t>(8 * bytes_per_sample));
    out += "data";
    put32(out, data_size);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < channels; ++c) {
            const double v = audio.samples[c][i];
            if (is_float) {
                put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
            } else {
                const double scaled = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
                put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
            }
        }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace taylorse::wav
