#include "taylorse/runtime.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>

#include "taylorse/error.hpp"
#include "taylorse/evalkit.hpp"
#include "taylorse/model_zoo.hpp"
#include "taylorse/wav.hpp"

namespace taylorse::runtime {

std::shared_ptr<const taylor::Engine> load_engine(const std::filesystem::path& model_path) {
    auto archive = std::make_shared<const weights::WeightArchive>(weights::load(model_path));
    const auto& h = archive->header;
    auto graph = std::make_shared<const model::ModelGraph>(model::build(h.variant, h.order, h.channels));
    return std::make_shared<const taylor::Engine>(std::move(graph), std::move(archive));
}

StreamingEnhancer::StreamingEnhancer(std::shared_ptr<const taylor::Engine> engine, dsp::StftConfig config)
    : engine_(std::move(engine)),
      config_(config),
      analyzer_(config, static_cast<std::size_t>(engine_->channels())),
      synthesizer_(config),
      state_(engine_->make_state()) {
    if (config_.num_bins() != model::kBins) throw ConfigError("the models expect a 320-point FFT");
}

std::vector<double> StreamingEnhancer::process(const std::vector<std::span<const double>>& chunk) {
    if (chunk.size() != static_cast<std::size_t>(engine_->channels()))
        throw ShapeError("chunk has " + std::to_string(chunk.size()) + " channels, model expects " +
                         std::to_string(engine_->channels()));
    analyzer_.push(chunk);
    std::vector<double> out;
    while (analyzer_.pop(frame_)) {
        std::vector<std::span<const dsp::cplx>> rows(frame_.begin(), frame_.end());
        const std::size_t index = state_.frames;
        engine_->step(rows, state_, result_);
        if (hook_) hook_(index, result_);
        const auto samples = synthesizer_.push(result_.enhanced);
        out.insert(out.end(), samples.begin(), samples.end());
    }
    samples_out_ += out.size();
    return out;
}

std::vector<double> StreamingEnhancer::flush() {
    std::vector<double> out;
    if (state_.frames > 0) out = synthesizer_.flush();
    samples_out_ += out.size();
    return out;
}

void StreamingEnhancer::reset() {
    analyzer_.reset();
    synthesizer_.reset();
    engine_->reset(state_);
    samples_out_ = 0;
}

std::vector<double> enhance_signal(std::shared_ptr<const taylor::Engine> engine,
                                   const std::vector<std::vector<double>>& channels, std::size_t chunk) {
    if (channels.empty()) throw ShapeError("no input channels");
    const std::size_t n = channels.front().size();
    for (const auto& c : channels)
        if (c.size() != n) throw ShapeError("input channels differ in length");
    StreamingEnhancer streamer(std::move(engine));
    std::vector<double> out;
    out.reserve(n + 320);
    const std::size_t step = chunk == 0 ? std::max<std::size_t>(n, 1) : chunk;
    for (std::size_t pos = 0; pos < n; pos += step) {
        const std::size_t len = std::min(step, n - pos);
        std::vector<std::span<const double>> piece;
        for (const auto& c : channels) piece.emplace_back(c.data() + pos, len);
        const auto y = streamer.process(piece);
        out.insert(out.end(), y.begin(), y.end());
    }
    const auto tail = streamer.flush();
    out.insert(out.end(), tail.begin(), tail.end());
    out.resize(n, 0.0);  // samples past the last full frame are never synthesized
    return out;
}

EnhanceReport enhance_file(const std::filesystem::path& model_path, const std::filesystem::path& input,
                           const std::filesystem::path& output, const EnhanceOptions& options) {
    const auto engine = load_engine(model_path);
    const auto audio = wav::read_at_rate(input, 16000);
    if (audio.channels() != static_cast<std::size_t>(engine->channels()))
        throw ShapeError(input.string() + " has " + std::to_string(audio.channels()) + " channels, model expects " +
                         std::to_string(engine->channels()));
    if (audio.length() < 320) throw ShapeError(input.string() + " is shorter than one 320-sample frame");

    StreamingEnhancer streamer(engine);
    std::vector<std::vector<float>> mags(static_cast<std::size_t>(engine->order()) + 1);
    if (options.dump_orders)
        streamer.set_frame_hook([&](std::size_t, const taylor::FrameResult& r) {
            for (std::size_t q = 0; q < r.orders.size(); ++q)
                for (const auto& v : r.orders[q]) mags[q].push_back(static_cast<float>(std::abs(v)));
        });

    const auto start = std::chrono::steady_clock::now();
    const std::size_t n = audio.length();
    const std::size_t step = std::max<std::size_t>(options.chunk, 1);
    std::vector<double> out;
    out.reserve(n + 320);
    for (std::size_t pos = 0; pos < n; pos += step) {
        const std::size_t len = std::min(step, n - pos);
        std::vector<std::span<const double>> piece;
        for (const auto& c : audio.samples) piece.emplace_back(c.data() + pos, len);
        const auto y = streamer.process(piece);
        out.insert(out.end(), y.begin(), y.end());
    }
    const auto tail = streamer.flush();
    out.insert(out.end(), tail.begin(), tail.end());
    out.resize(n, 0.0);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    wav::Audio result;
    result.sample_rate = audio.sample_rate;
    result.format = audio.format;
    result.samples.push_back(std::move(out));
    wav::write(output, result);

    EnhanceReport report;
    report.samples = n;
    report.frames = streamer.frames();
    report.audio_seconds = static_cast<double>(n) / 16000.0;
    report.wall_seconds = wall;
    report.rtf = wall / report.audio_seconds;

    if (options.dump_orders) {
        std::filesystem::create_directories(*options.dump_orders);
        for (std::size_t q = 0; q < mags.size(); ++q) {
            taylor::OrderDump d;
            d.q = static_cast<std::uint32_t>(q);
            d.frames = static_cast<std::uint32_t>(report.frames);
            d.bins = model::kBins;
            d.magnitudes = std::move(mags[q]);
            taylor::write_order_dump(*options.dump_orders / ("order_" + std::to_string(q) + ".bin"), d);
        }
    }
    if (options.report) {
        const bool fresh = !std::filesystem::exists(*options.report) || std::filesystem::file_size(*options.report) == 0;
        std::ofstream os(*options.report, std::ios::app);
        if (!os) throw Error("cannot write " + options.report->string());
        if (fresh) os << "input,output,samples,frames,audio_seconds,wall_seconds,rtf\n";
        os << input.string() << ',' << output.string() << ',' << report.samples << ',' << report.frames << ','
           << std::setprecision(6) << report.audio_seconds << ',' << report.wall_seconds << ',' << report.rtf << '\n';
    }
    return report;
}

RtfReport bench_rtf(std::shared_ptr<const taylor::Engine> engine, double seconds, int runs, std::uint64_t seed) {
    if (seconds <= 0.0) throw ConfigError("benchmark duration must be positive");
    if (runs < 1) throw ConfigError("need at least one benchmark run");
    const auto n = static_cast<std::size_t>(seconds * 16000.0);
    if (n < 320) throw ConfigError("benchmark audio shorter than one frame");
    std::vector<std::vector<double>> channels;
    for (int m = 0; m < engine->channels(); ++m) {
        auto x = eval::white_noise(n, seed + static_cast<std::uint64_t>(m));
        for (auto& v : x) v *= 0.1;
        channels.push_back(std::move(x));
    }
    RtfReport r;
    r.audio_seconds = static_cast<double>(n) / 16000.0;
    for (int i = 0; i < runs; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const auto y = enhance_signal(engine, channels, 160);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        r.runs.push_back(wall / r.audio_seconds);
        if (y.size() != n) throw Error("benchmark output length mismatch");
    }
    for (double v : r.runs) r.mean += v;
    r.mean /= static_cast<double>(r.runs.size());
    return r;
}

}  // namespace taylorse::runtime
