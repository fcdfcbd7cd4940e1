#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace taylorse::wav {

enum class SampleFormat { pcm16, float32 };

/// Planar audio: samples[channel][n], nominal range [-1, 1].
struct Audio {
    int sample_rate = 16000;
    SampleFormat format = SampleFormat::pcm16;
    std::vector<std::vector<double>> samples;

    std::size_t channels() const { return samples.size(); }
    std::size_t length() const { return samples.empty() ? 0 : samples.front().size(); }
};

/// Reads RIFF/WAVE with 16-bit PCM or 32-bit IEEE float samples.
Audio read(const std::filesystem::path& path);

/// Reads and rejects anything not at `required_rate`.
Audio read_at_rate(const std::filesystem::path& path, int required_rate);

void write(const std::filesystem::path& path, const Audio& audio);

}  // namespace taylorse::wav
