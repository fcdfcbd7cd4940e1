#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace taylorse::dsp {

using cplx = std::complex<double>;

struct StftConfig {
    int sample_rate_hz = 16000;
    int win_len = 320;  // 20 ms
    int hop = 160;
    int fft_size = 320;

    int num_bins() const { return fft_size / 2 + 1; }

    /// Throws ConfigError unless hop = win_len/2, fft_size >= win_len and
    /// win_len is 20 ms at the configured rate.
    void validate() const;
};

/// T x F complex values per channel, channels stored as stacked planes.
class ComplexSpectrogram {
public:
    ComplexSpectrogram() = default;
    ComplexSpectrogram(std::size_t frames, std::size_t bins, std::size_t channels = 1);

    std::size_t frames() const { return frames_; }
    std::size_t bins() const { return bins_; }
    std::size_t channels() const { return channels_; }

    cplx& at(std::size_t channel, std::size_t frame, std::size_t bin) {
        return data_[(channel * frames_ + frame) * bins_ + bin];
    }
    const cplx& at(std::size_t channel, std::size_t frame, std::size_t bin) const {
        return data_[(channel * frames_ + frame) * bins_ + bin];
    }
    cplx& operator()(std::size_t frame, std::size_t bin) { return at(0, frame, bin); }
    const cplx& operator()(std::size_t frame, std::size_t bin) const { return at(0, frame, bin); }

    std::span<cplx> row(std::size_t channel, std::size_t frame) {
        return {data_.data() + (channel * frames_ + frame) * bins_, bins_};
    }
    std::span<const cplx> row(std::size_t channel, std::size_t frame) const {
        return {data_.data() + (channel * frames_ + frame) * bins_, bins_};
    }

    /// Single-channel copy of one plane.
    ComplexSpectrogram channel(std::size_t c) const;

    std::span<cplx> data() { return data_; }
    std::span<const cplx> data() const { return data_; }

    bool same_shape(const ComplexSpectrogram& other) const {
        return frames_ == other.frames_ && bins_ == other.bins_ && channels_ == other.channels_;
    }

    ComplexSpectrogram& operator+=(const ComplexSpectrogram& other);
    ComplexSpectrogram& operator*=(double s);

private:
    std::size_t frames_ = 0;
    std::size_t bins_ = 0;
    std::size_t channels_ = 0;
    std::vector<cplx> data_;
};

/// sqrt(0.5 - 0.5 cos(2 pi n / N)); periodic square-root Hann.
std::vector<double> make_window(const StftConfig& config);

/// Number of frames for a signal of `samples` samples (no padding).
std::size_t frame_count(std::size_t samples, const StftConfig& config);

ComplexSpectrogram stft(std::span<const double> signal, const StftConfig& config = {});

/// One spectrogram plane per channel; all channels must share a length.
ComplexSpectrogram stft(const std::vector<std::vector<double>>& channels,
                        const StftConfig& config = {});

/// Synthesis of channel 0. Output length (T-1)*hop + win_len.
std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& config = {});

/// Unnormalized real FFT. Owns scratch buffers, so one instance per stream.
class RealFft {
public:
    explicit RealFft(int size);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int size() const { return size_; }
    void forward(std::span<const double> in, std::span<cplx> out) const;
    /// Includes the 1/size factor.
    void inverse(std::span<const cplx> in, std::span<double> out) const;

private:
    int size_;
    void* forward_plan_;
    void* inverse_plan_;
    mutable std::vector<double> real_buf_;
    mutable std::vector<cplx> cplx_buf_;
};

/// Streaming analysis for M channels: accepts arbitrary chunks and yields a
/// frame as soon as sample t*hop + win_len - 1 has arrived.
class StreamingAnalyzer {
public:
    StreamingAnalyzer(const StftConfig& config, std::size_t channels);

    /// Appends interleaved-by-channel chunks (one span per channel, equal
    /// lengths). Returns the number of complete frames now pending.
    std::size_t push(const std::vector<std::span<const double>>& chunk);

    /// Pops the oldest pending frame into `out` (channels x bins).
    bool pop(std::vector<std::vector<cplx>>& out);

    std::size_t samples_seen() const { return samples_seen_; }
    std::size_t frames_emitted() const { return frames_emitted_; }
    void reset();

private:
    StftConfig config_;
    std::size_t channels_;
    std::vector<double> window_;
    RealFft fft_;
    std::vector<std::vector<double>> buffer_;  // per channel, unconsumed tail
    std::vector<std::vector<std::vector<cplx>>> pending_;
    std::size_t samples_seen_ = 0;
    std::size_t frames_emitted_ = 0;
    std::vector<double> scratch_;
};

/// Streaming overlap-add synthesis. Each pushed frame finalizes `hop`
/// output samples; flush() returns the remaining win_len - hop tail.
class StreamingSynthesizer {
public:
    explicit StreamingSynthesizer(const StftConfig& config);

    std::vector<double> push(std::span<const cplx> frame);
    std::vector<double> flush();
    void reset();

private:
    StftConfig config_;
    std::vector<double> window_;
    RealFft fft_;
    std::vector<double> overlap_;
    std::vector<double> scratch_;
};

}  // namespace taylorse::dsp
