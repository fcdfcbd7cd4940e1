#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace taylorse::nn {

/// Per-frame activation shape: channels x freq. Vectors use freq == 1.
struct Shape {
    int channels = 0;
    int freq = 1;

    std::size_t size() const { return static_cast<std::size_t>(channels) * static_cast<std::size_t>(freq); }
    bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

enum class LayerKind {
    input,
    glu2d,
    deglu2d,
    conv2d,
    deconv2d,
    conv1d,
    gru_grouped,
    lstm,
    linear,
    cln,
    prelu,
    sigmoid,
    tanh,
    shuffle,
    concat,
    add,
    mul,
    flatten,
    unflatten,
};

const char* to_string(LayerKind kind);

struct TensorDecl {
    std::string role;
    std::vector<int> shape;

    std::size_t elements() const;
};

/// Declarative description of one layer. Convolutions run causally over time
/// and with stride/zero-padding over frequency.
struct LayerSpec {
    LayerKind kind = LayerKind::input;
    std::string label;
    Shape in;
    Shape out;
    int kernel_t = 1;
    int kernel_f = 1;
    int stride_f = 1;
    int pad_f = 0;
    int output_padding = 0;  // transposed convs, frequency axis
    int dilation = 1;
    int groups = 1;
    int hidden = 0;
    int input_index = 0;  // LayerKind::input
    bool bias = true;

    /// Trainable tensors in archive order. Throws ConfigError if unshaped.
    std::vector<TensorDecl> tensors() const;

    /// Past frames read directly by the layer (conv taps): (kernel_t-1)*dilation.
    int lookback() const;
    bool recurrent() const { return kind == LayerKind::gru_grouped || kind == LayerKind::lstm; }
    bool has_weights() const;

    /// Throws ConfigError on non-positive kernel/stride/dilation, groups not
    /// dividing the features, or inconsistent in/out shapes.
    void validate() const;
};

std::size_t count_params(const LayerSpec& spec);

/// Multiply-accumulates per output frame. Weighted products count one MAC
/// each (recurrent gates in full), normalisation two per element.
std::size_t count_macs_per_frame(const LayerSpec& spec);

/// Output frequency size of a strided convolution.
int conv_out_freq(int in_freq, int kernel_f, int stride_f, int pad_f = 0);
int deconv_out_freq(int in_freq, int kernel_f, int stride_f, int output_padding = 0);

// ---------------------------------------------------------------------------
// Per-frame kernels. Every kernel is shared by the streaming and the
// whole-sequence evaluators so that the two differ only in state handling.
// ---------------------------------------------------------------------------

/// Resolved weights for one layer; spans follow LayerSpec::tensors() order.
/// `prepared` holds re-laid-out copies some kernels need (transposed convs).
struct LayerWeights {
    std::vector<std::span<const float>> tensors;
    std::vector<float> prepared;
    std::vector<float> prepared_gate;
};

LayerWeights prepare_weights(const LayerSpec& spec, std::vector<std::span<const float>> tensors);

/// Causal 2D convolution. taps[k] is the input frame at lag
/// (kernel_t-1-k)*dilation, or nullptr before the stream start.
void conv2d_frame(const LayerSpec& spec, std::span<const float> weight, std::span<const float> bias,
                  std::span<const float* const> taps, std::span<float> out, std::vector<float>& scratch);

/// Causal transposed 2D convolution. taps[k] is the input at lag k*dilation.
/// `prepared` comes from prepare_weights().
void deconv2d_frame(const LayerSpec& spec, std::span<const float> prepared, std::span<const float> bias,
                    std::span<const float* const> taps, std::span<float> out, std::vector<float>& scratch);

/// Gated linear unit on top of conv2d_frame / deconv2d_frame: a * sigmoid(b).
void glu_frame(const LayerSpec& spec, const LayerWeights& w, std::span<const float* const> taps,
               std::span<float> out, std::vector<float>& scratch);

void linear_frame(std::span<const float> weight, std::span<const float> bias, std::span<const float> x,
                  std::span<float> out);

/// Grouped GRU cell, gate order (r, z, n):
///   n = tanh(W_in x + b_n + r * (W_hn h)),  h' = (1 - z) * n + z * h.
/// Updates `h` in place; with groups == 1 this is a plain GRU cell.
void gru_grouped_frame(const LayerSpec& spec, const LayerWeights& w, std::span<const float> x,
                       std::span<float> h, std::vector<float>& scratch);

/// LSTM cell, gate order (i, f, g, o). Updates h and c in place.
void lstm_frame(const LayerSpec& spec, const LayerWeights& w, std::span<const float> x, std::span<float> h,
                std::span<float> c, std::vector<float>& scratch);

/// Sum and sum of squares of a frame, accumulated in double.
struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    double count = 0.0;

    Moments& operator+=(const Moments& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        count += o.count;
        return *this;
    }
};

Moments frame_moments(std::span<const float> x);

constexpr double kClnEps = 1e-5;

/// Normalises `x` with the given (cumulative) moments, then applies the
/// per-channel affine gain/bias.
void cln_frame(const LayerSpec& spec, std::span<const float> gain, std::span<const float> bias,
               const Moments& stats, std::span<const float> x, std::span<float> out);

void prelu_frame(const LayerSpec& spec, std::span<const float> slope, std::span<const float> x,
                 std::span<float> out);

void shuffle_frame(int groups, std::span<const float> x, std::span<float> out);

float sigmoid(float x);

}  // namespace taylorse::nn
