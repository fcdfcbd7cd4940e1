#include "taylorse/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "taylorse/error.hpp"

namespace taylorse::dsp {

namespace {

// FFTW planning is not thread-safe.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

void StftConfig::validate() const {
    if (win_len < 2 || win_len % 2 != 0)
        throw ConfigError("win_len must be even and >= 2, got " + std::to_string(win_len));
    if (hop * 2 != win_len)
        throw ConfigError("hop must be win_len/2");
    if (fft_size < win_len)
        throw ConfigError("fft_size must be >= win_len");
    if (sample_rate_hz <= 0 || win_len * 50 != sample_rate_hz)
        throw ConfigError("win_len must be 20 ms at " + std::to_string(sample_rate_hz) + " Hz");
}

ComplexSpectrogram::ComplexSpectrogram(std::size_t frames, std::size_t bins, std::size_t channels)
    : frames_(frames), bins_(bins), channels_(channels), data_(frames * bins * channels) {}

ComplexSpectrogram ComplexSpectrogram::channel(std::size_t c) const {
    if (c >= channels_) throw ShapeError("channel index out of range");
    ComplexSpectrogram out(frames_, bins_, 1);
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(c * frames_ * bins_), frames_ * bins_,
                out.data_.begin());
    return out;
}

ComplexSpectrogram& ComplexSpectrogram::operator+=(const ComplexSpectrogram& other) {
    if (!same_shape(other)) throw ShapeError("spectrogram shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

ComplexSpectrogram& ComplexSpectrogram::operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
}

std::vector<double> make_window(const StftConfig& config) {
    const int n = config.win_len;
    if (n < 2 || n % 2 != 0)
        throw ConfigError("win_len must be even and >= 2, got " + std::to_string(n));
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
        w[static_cast<std::size_t>(i)] = std::sqrt(std::max(hann, 0.0));
    }
    return w;
}

std::size_t frame_count(std::size_t samples, const StftConfig& config) {
    const auto win = static_cast<std::size_t>(config.win_len);
    if (samples < win) return 0;
    return (samples - win) / static_cast<std::size_t>(config.hop) + 1;
}

RealFft::RealFft(int size) : size_(size), real_buf_(static_cast<std::size_t>(size)),
                             cplx_buf_(static_cast<std::size_t>(size / 2 + 1)) {
    if (size < 2) throw ConfigError("FFT size must be >= 2");
    std::lock_guard lock(plan_mutex());
    auto* cbuf = reinterpret_cast<fftw_complex*>(cplx_buf_.data());
    forward_plan_ = fftw_plan_dft_r2c_1d(size, real_buf_.data(), cbuf, FFTW_ESTIMATE);
    inverse_plan_ = fftw_plan_dft_c2r_1d(size, cbuf, real_buf_.data(), FFTW_ESTIMATE);
}

RealFft::~RealFft() {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void RealFft::forward(std::span<const double> in, std::span<cplx> out) const {
    std::fill(real_buf_.begin(), real_buf_.end(), 0.0);
    std::copy_n(in.begin(), std::min<std::size_t>(in.size(), real_buf_.size()), real_buf_.begin());
    fftw_execute(static_cast<fftw_plan>(forward_plan_));
    std::copy_n(cplx_buf_.begin(), std::min(out.size(), cplx_buf_.size()), out.begin());
}

void RealFft::inverse(std::span<const cplx> in, std::span<double> out) const {
    std::copy_n(in.begin(), std::min(in.size(), cplx_buf_.size()), cplx_buf_.begin());
    // c2r requires a Hermitian input; DC and Nyquist must be real.
    cplx_buf_.front().imag(0.0);
    if (size_ % 2 == 0) cplx_buf_.back().imag(0.0);
    fftw_execute(static_cast<fftw_plan>(inverse_plan_));
    const double scale = 1.0 / size_;
    for (std::size_t i = 0; i < out.size() && i < real_buf_.size(); ++i) out[i] = real_buf_[i] * scale;
}

ComplexSpectrogram stft(std::span<const double> signal, const StftConfig& config) {
    return stft(std::vector<std::vector<double>>{{signal.begin(), signal.end()}}, config);
}

ComplexSpectrogram stft(const std::vector<std::vector<double>>& channels, const StftConfig& config) {
    config.validate();
    if (channels.empty()) throw ConfigError("stft needs at least one channel");
    const std::size_t len = channels.front().size();
    for (const auto& c : channels)
        if (c.size() != len) throw ShapeError("stft channels differ in length");
    if (len < static_cast<std::size_t>(config.win_len))
        throw ConfigError("signal too short for stft: need at least " +
                          std::to_string(config.win_len) + " samples, got " + std::to_string(len));

    const auto window = make_window(config);
    const std::size_t frames = frame_count(len, config);
    const auto bins = static_cast<std::size_t>(config.num_bins());
    ComplexSpectrogram spec(frames, bins, channels.size());
    RealFft fft(config.fft_size);
    std::vector<double> frame(window.size());
    for (std::size_t c = 0; c < channels.size(); ++c) {
        for (std::size_t t = 0; t < frames; ++t) {
            const std::size_t start = t * static_cast<std::size_t>(config.hop);
            for (std::size_t n = 0; n < window.size(); ++n) frame[n] = channels[c][start + n] * window[n];
            fft.forward(frame, spec.row(c, t));
        }
    }
    return spec;
}

std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& config) {
    config.validate();
    if (spec.bins() != static_cast<std::size_t>(config.num_bins()))
        throw ShapeError("istft: spectrogram has " + std::to_string(spec.bins()) +
                         " bins, config expects " + std::to_string(config.num_bins()));
    if (spec.frames() == 0) return {};
    const auto window = make_window(config);
    const auto hop = static_cast<std::size_t>(config.hop);
    std::vector<double> out((spec.frames() - 1) * hop + window.size(), 0.0);
    RealFft fft(config.fft_size);
    std::vector<double> frame(static_cast<std::size_t>(config.fft_size));
    for (std::size_t t = 0; t < spec.frames(); ++t) {
        fft.inverse(spec.row(0, t), frame);
        for (std::size_t n = 0; n < window.size(); ++n) out[t * hop + n] += frame[n] * window[n];
    }
    return out;
}

StreamingAnalyzer::StreamingAnalyzer(const StftConfig& config, std::size_t channels)
    : config_(config), channels_(channels), window_(make_window(config)), fft_(config.fft_size),
      buffer_(channels), scratch_(window_.size()) {
    config_.validate();
    if (channels == 0) throw ConfigError("StreamingAnalyzer needs at least one channel");
}

std::size_t StreamingAnalyzer::push(const std::vector<std::span<const double>>& chunk) {
    if (chunk.size() != channels_) throw ShapeError("StreamingAnalyzer: channel count mismatch");
    const std::size_t n = chunk.front().size();
    for (const auto& c : chunk)
        if (c.size() != n) throw ShapeError("StreamingAnalyzer: ragged chunk");
    for (std::size_t c = 0; c < channels_; ++c) buffer_[c].insert(buffer_[c].end(), chunk[c].begin(), chunk[c].end());
    samples_seen_ += n;

    const auto win = static_cast<std::size_t>(config_.win_len);
    const auto hop = static_cast<std::size_t>(config_.hop);
    const auto bins = static_cast<std::size_t>(config_.num_bins());
    while (buffer_.front().size() >= win) {
        std::vector<std::vector<cplx>> frame(channels_, std::vector<cplx>(bins));
        for (std::size_t c = 0; c < channels_; ++c) {
            for (std::size_t i = 0; i < win; ++i) scratch_[i] = buffer_[c][i] * window_[i];
            fft_.forward(scratch_, frame[c]);
            buffer_[c].erase(buffer_[c].begin(), buffer_[c].begin() + static_cast<std::ptrdiff_t>(hop));
        }
        pending_.push_back(std::move(frame));
        ++frames_emitted_;
    }
    return pending_.size();
}

bool StreamingAnalyzer::pop(std::vector<std::vector<cplx>>& out) {
    if (pending_.empty()) return false;
    out = std::move(pending_.front());
    pending_.erase(pending_.begin());
    return true;
}

void StreamingAnalyzer::reset() {
    for (auto& b : buffer_) b.clear();
    pending_.clear();
    samples_seen_ = 0;
    frames_emitted_ = 0;
}

StreamingSynthesizer::StreamingSynthesizer(const StftConfig& config)
    : config_(config), window_(make_window(config)), fft_(config.fft_size),
      overlap_(window_.size(), 0.0), scratch_(static_cast<std::size_t>(config.fft_size)) {
    config_.validate();
}

std::vector<double> StreamingSynthesizer::push(std::span<const cplx> frame) {
    if (frame.size() != static_cast<std::size_t>(config_.num_bins()))
        throw ShapeError("StreamingSynthesizer: bin count mismatch");
    fft_.inverse(frame, scratch_);
    for (std::size_t n = 0; n < window_.size(); ++n) overlap_[n] += scratch_[n] * window_[n];
    const auto hop = static_cast<std::size_t>(config_.hop);
    std::vector<double> ready(overlap_.begin(), overlap_.begin() + static_cast<std::ptrdiff_t>(hop));
    std::rotate(overlap_.begin(), overlap_.begin() + static_cast<std::ptrdiff_t>(hop), overlap_.end());
    std::fill(overlap_.end() - static_cast<std::ptrdiff_t>(hop), overlap_.end(), 0.0);
    return ready;
}

std::vector<double> StreamingSynthesizer::flush() {
    const auto tail = static_cast<std::size_t>(config_.win_len - config_.hop);
    std::vector<double> out(overlap_.begin(), overlap_.begin() + static_cast<std::ptrdiff_t>(tail));
    std::fill(overlap_.begin(), overlap_.end(), 0.0);
    return out;
}

void StreamingSynthesizer::reset() { std::fill(overlap_.begin(), overlap_.end(), 0.0); }

}  // namespace taylorse::dsp
