#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taylorse/dsp.hpp"
#include "taylorse/taylor.hpp"

namespace taylorse::runtime {

/// Loads an archive and builds the matching graph from its header.
std::shared_ptr<const taylor::Engine> load_engine(const std::filesystem::path& model_path);

/// Sample-in, sample-out enhancement of one stream. The first hop of output
/// is released once win_len input samples have arrived; each further hop of
/// input releases one more hop of output.
class StreamingEnhancer {
public:
    using FrameHook = std::function<void(std::size_t frame, const taylor::FrameResult&)>;

    explicit StreamingEnhancer(std::shared_ptr<const taylor::Engine> engine, dsp::StftConfig config = {});

    /// One span per channel, equal lengths. Returns newly final samples.
    std::vector<double> process(const std::vector<std::span<const double>>& chunk);
    /// Releases the overlap tail of the last frame.
    std::vector<double> flush();
    void reset();

    /// Called after every frame, e.g. to collect per-order terms.
    void set_frame_hook(FrameHook hook) { hook_ = std::move(hook); }

    std::size_t samples_in() const { return analyzer_.samples_seen(); }
    std::size_t samples_out() const { return samples_out_; }
    std::size_t frames() const { return state_.frames; }

private:
    std::shared_ptr<const taylor::Engine> engine_;
    dsp::StftConfig config_;
    dsp::StreamingAnalyzer analyzer_;
    dsp::StreamingSynthesizer synthesizer_;
    taylor::Engine::State state_;
    taylor::FrameResult result_;
    std::vector<std::vector<dsp::cplx>> frame_;
    FrameHook hook_;
    std::size_t samples_out_ = 0;
};

/// Whole signal through the streamer in `chunk`-sample pieces (0 = one
/// call); the output is mono and as long as the input.
std::vector<double> enhance_signal(std::shared_ptr<const taylor::Engine> engine,
                                   const std::vector<std::vector<double>>& channels, std::size_t chunk = 0);

struct EnhanceOptions {
    std::optional<std::filesystem::path> dump_orders;
    std::optional<std::filesystem::path> report;
    std::size_t chunk = 160;
};

struct EnhanceReport {
    std::size_t samples = 0;
    std::size_t frames = 0;
    double audio_seconds = 0.0;
    double wall_seconds = 0.0;
    double rtf = 0.0;
};

/// Reads a 16 kHz WAV whose channel count matches the model, streams it and
/// writes a mono WAV of the same length and sample format.
EnhanceReport enhance_file(const std::filesystem::path& model_path, const std::filesystem::path& input,
                           const std::filesystem::path& output, const EnhanceOptions& options = {});

struct RtfReport {
    std::vector<double> runs;  // wall seconds / audio seconds
    double mean = 0.0;
    double audio_seconds = 0.0;
};

/// Streams synthetic white noise `runs` times and reports the real-time factor.
RtfReport bench_rtf(std::shared_ptr<const taylor::Engine> engine, double seconds, int runs = 5,
                    std::uint64_t seed = 7);

}  // namespace taylorse::runtime
