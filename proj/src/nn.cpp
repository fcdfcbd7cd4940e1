#include "taylorse/nn.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "taylorse/error.hpp"

namespace taylorse::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::Matrix<float, Eigen::Dynamic, 1>;

std::size_t prod(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    return n;
}

std::string where(const LayerSpec& s) { return "layer '" + s.label + "' (" + to_string(s.kind) + ")"; }

bool is_conv2d_like(LayerKind k) {
    return k == LayerKind::conv2d || k == LayerKind::glu2d;
}
bool is_deconv_like(LayerKind k) {
    return k == LayerKind::deconv2d || k == LayerKind::deglu2d;
}
bool is_gated(LayerKind k) { return k == LayerKind::glu2d || k == LayerKind::deglu2d; }

// Patch matrix (Cin*kt*kf) x Fout for a causal strided convolution.
void build_patch(const LayerSpec& s, std::span<const float* const> taps, float* patch) {
    const int cin = s.in.channels, fin = s.in.freq, fout = s.out.freq;
    const int kt = s.kernel_t, kf = s.kernel_f;
    for (int c = 0; c < cin; ++c)
        for (int k = 0; k < kt; ++k) {
            const float* src = taps[static_cast<std::size_t>(k)];
            for (int j = 0; j < kf; ++j) {
                float* row = patch + static_cast<std::ptrdiff_t>(((c * kt + k) * kf + j) * fout);
                if (src == nullptr) {
                    std::fill_n(row, fout, 0.0f);
                    continue;
                }
                const float* plane = src + static_cast<std::ptrdiff_t>(c * fin);
                for (int o = 0; o < fout; ++o) {
                    const int f = o * s.stride_f + j - s.pad_f;
                    row[o] = (f >= 0 && f < fin) ? plane[f] : 0.0f;
                }
            }
        }
}

void conv_from_patch(const LayerSpec& s, std::span<const float> weight, std::span<const float> bias,
                     const float* patch, float* out) {
    const int cout = s.out.channels, fout = s.out.freq;
    const int k = s.in.channels * s.kernel_t * s.kernel_f;
    Eigen::Map<const RowMat> w(weight.data(), cout, k);
    Eigen::Map<const RowMat> p(patch, k, fout);
    Eigen::Map<RowMat> y(out, cout, fout);
    y.noalias() = w * p;
    if (!bias.empty())
        for (int c = 0; c < cout; ++c) y.row(c).array() += bias[static_cast<std::size_t>(c)];
}

// Input matrix (Cin*kt) x Fin for a transposed convolution.
void build_deconv_input(const LayerSpec& s, std::span<const float* const> taps, float* x) {
    const int cin = s.in.channels, fin = s.in.freq, kt = s.kernel_t;
    for (int c = 0; c < cin; ++c)
        for (int k = 0; k < kt; ++k) {
            float* row = x + static_cast<std::ptrdiff_t>((c * kt + k) * fin);
            const float* src = taps[static_cast<std::size_t>(k)];
            if (src == nullptr) std::fill_n(row, fin, 0.0f);
            else std::copy_n(src + static_cast<std::ptrdiff_t>(c * fin), fin, row);
        }
}

void deconv_from_input(const LayerSpec& s, std::span<const float> prepared, std::span<const float> bias,
                       const float* x, float* z, float* out) {
    const int cin = s.in.channels, fin = s.in.freq, cout = s.out.channels, fout = s.out.freq;
    const int kt = s.kernel_t, kf = s.kernel_f;
    Eigen::Map<const RowMat> wt(prepared.data(), cout * kf, cin * kt);
    Eigen::Map<const RowMat> xin(x, cin * kt, fin);
    Eigen::Map<RowMat> zm(z, cout * kf, fin);
    zm.noalias() = wt * xin;
    for (int c = 0; c < cout; ++c) {
        float* orow = out + static_cast<std::ptrdiff_t>(c * fout);
        std::fill_n(orow, fout, bias.empty() ? 0.0f : bias[static_cast<std::size_t>(c)]);
        for (int j = 0; j < kf; ++j) {
            const float* zrow = z + static_cast<std::ptrdiff_t>((c * kf + j) * fin);
            for (int i = 0; i < fin; ++i) {
                const int f = i * s.stride_f + j;
                if (f < fout) orow[f] += zrow[i];
            }
        }
    }
}

}  // namespace

std::string to_string(const Shape& s) {
    return std::to_string(s.channels) + "x" + std::to_string(s.freq);
}

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::input: return "input";
        case LayerKind::glu2d: return "glu2d";
        case LayerKind::deglu2d: return "deglu2d";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::deconv2d: return "deconv2d";
        case LayerKind::conv1d: return "conv1d";
        case LayerKind::gru_grouped: return "gru_grouped";
        case LayerKind::lstm: return "lstm";
        case LayerKind::linear: return "linear";
        case LayerKind::cln: return "cln";
        case LayerKind::prelu: return "prelu";
        case LayerKind::sigmoid: return "sigmoid";
        case LayerKind::tanh: return "tanh";
        case LayerKind::shuffle: return "shuffle";
        case LayerKind::concat: return "concat";
        case LayerKind::add: return "add";
        case LayerKind::mul: return "mul";
        case LayerKind::flatten: return "flatten";
        case LayerKind::unflatten: return "unflatten";
    }
    return "?";
}

std::size_t TensorDecl::elements() const { return prod(shape); }

int conv_out_freq(int in_freq, int kernel_f, int stride_f, int pad_f) {
    return (in_freq + 2 * pad_f - kernel_f) / stride_f + 1;
}

int deconv_out_freq(int in_freq, int kernel_f, int stride_f, int output_padding) {
    return (in_freq - 1) * stride_f + kernel_f + output_padding;
}

bool LayerSpec::has_weights() const {
    switch (kind) {
        case LayerKind::glu2d:
        case LayerKind::deglu2d:
        case LayerKind::conv2d:
        case LayerKind::deconv2d:
        case LayerKind::conv1d:
        case LayerKind::gru_grouped:
        case LayerKind::lstm:
        case LayerKind::linear:
        case LayerKind::cln:
        case LayerKind::prelu: return true;
        default: return false;
    }
}

void LayerSpec::validate() const {
    if (in.channels <= 0 || in.freq <= 0 || out.channels <= 0 || out.freq <= 0)
        throw ConfigError(where(*this) + ": unshaped (in " + to_string(in) + ", out " + to_string(out) + ")");
    if (kernel_t <= 0 || kernel_f <= 0 || stride_f <= 0 || dilation <= 0 || groups <= 0)
        throw ConfigError(where(*this) + ": kernel, stride, dilation and groups must be positive");
    if (is_conv2d_like(kind)) {
        if (out.freq != conv_out_freq(in.freq, kernel_f, stride_f, pad_f))
            throw ConfigError(where(*this) + ": output freq " + std::to_string(out.freq) + " inconsistent with kernel/stride");
    } else if (is_deconv_like(kind)) {
        if (out.freq != deconv_out_freq(in.freq, kernel_f, stride_f, output_padding))
            throw ConfigError(where(*this) + ": output freq inconsistent with kernel/stride/output_padding");
    } else if (kind == LayerKind::conv1d) {
        if (in.freq != 1 || out.freq != 1 || kernel_f != 1)
            throw ConfigError(where(*this) + ": conv1d operates on vectors");
    } else if (kind == LayerKind::gru_grouped) {
        if (in.freq != 1 || hidden <= 0 || out != Shape{hidden, 1})
            throw ConfigError(where(*this) + ": recurrent layers take vectors and emit hidden");
        if (in.channels % groups != 0 || hidden % groups != 0)
            throw ConfigError(where(*this) + ": groups " + std::to_string(groups) + " must divide input " +
                              std::to_string(in.channels) + " and hidden " + std::to_string(hidden));
    } else if (kind == LayerKind::lstm) {
        if (in.freq != 1 || hidden <= 0 || out != Shape{hidden, 1})
            throw ConfigError(where(*this) + ": recurrent layers take vectors and emit hidden");
    } else if (kind == LayerKind::linear) {
        if (in.freq != 1 || out.freq != 1) throw ConfigError(where(*this) + ": linear operates on vectors");
    } else if (kind == LayerKind::shuffle) {
        if (in.freq != 1 || in.channels % groups != 0)
            throw ConfigError(where(*this) + ": groups must divide features");
    }
}

std::vector<TensorDecl> LayerSpec::tensors() const {
    validate();
    std::vector<TensorDecl> t;
    const int cin = in.channels, cout = out.channels;
    auto with_bias = [&](std::vector<TensorDecl> v, const char* role, int n) {
        if (bias) v.push_back({role, {n}});
        return v;
    };
    switch (kind) {
        case LayerKind::glu2d:
        case LayerKind::conv2d:
            t = with_bias({{"weight", {cout, cin, kernel_t, kernel_f}}}, "bias", cout);
            if (kind == LayerKind::glu2d) {
                t.push_back({"gate_weight", {cout, cin, kernel_t, kernel_f}});
                if (bias) t.push_back({"gate_bias", {cout}});
            }
            break;
        case LayerKind::deglu2d:
        case LayerKind::deconv2d:
            t = with_bias({{"weight", {cin, cout, kernel_t, kernel_f}}}, "bias", cout);
            if (kind == LayerKind::deglu2d) {
                t.push_back({"gate_weight", {cin, cout, kernel_t, kernel_f}});
                if (bias) t.push_back({"gate_bias", {cout}});
            }
            break;
        case LayerKind::conv1d: t = with_bias({{"weight", {cout, cin, kernel_t}}}, "bias", cout); break;
        case LayerKind::linear: t = with_bias({{"weight", {cout, cin}}}, "bias", cout); break;
        case LayerKind::gru_grouped: {
            const int hg = hidden / groups, ig = cin / groups;
            t = with_bias({{"w_ih", {groups, 3 * hg, ig}}, {"w_hh", {groups, 3 * hg, hg}}}, "bias", 0);
            if (bias) t.back().shape = {groups, 3 * hg};
            break;
        }
        case LayerKind::lstm:
            t = with_bias({{"w_ih", {4 * hidden, cin}}, {"w_hh", {4 * hidden, hidden}}}, "bias", 4 * hidden);
            break;
        case LayerKind::cln: t = {{"gain", {cin}}, {"bias", {cin}}}; break;
        case LayerKind::prelu: t = {{"slope", {cin}}}; break;
        default: break;
    }
    return t;
}

int LayerSpec::lookback() const {
    switch (kind) {
        case LayerKind::glu2d:
        case LayerKind::deglu2d:
        case LayerKind::conv2d:
        case LayerKind::deconv2d:
        case LayerKind::conv1d: return (kernel_t - 1) * dilation;
        default: return 0;
    }
}

std::size_t count_params(const LayerSpec& spec) {
    std::size_t n = 0;
    for (const auto& t : spec.tensors()) n += t.elements();
    return n;
}

std::size_t count_macs_per_frame(const LayerSpec& s) {
    s.validate();
    const auto cin = static_cast<std::size_t>(s.in.channels), cout = static_cast<std::size_t>(s.out.channels);
    const auto kt = static_cast<std::size_t>(s.kernel_t), kf = static_cast<std::size_t>(s.kernel_f);
    const std::size_t gate = is_gated(s.kind) ? 2 : 1;
    switch (s.kind) {
        case LayerKind::glu2d:
        case LayerKind::conv2d: return gate * cout * static_cast<std::size_t>(s.out.freq) * cin * kt * kf;
        case LayerKind::deglu2d:
        case LayerKind::deconv2d: return gate * cin * static_cast<std::size_t>(s.in.freq) * cout * kt * kf;
        case LayerKind::conv1d: return cout * cin * kt;
        case LayerKind::linear: return cout * cin;
        case LayerKind::gru_grouped: {
            const auto g = static_cast<std::size_t>(s.groups);
            const auto hg = static_cast<std::size_t>(s.hidden) / g, ig = cin / g;
            return g * 3 * hg * (ig + hg);
        }
        case LayerKind::lstm: {
            const auto h = static_cast<std::size_t>(s.hidden);
            return 4 * h * (cin + h);
        }
        case LayerKind::cln: return 2 * s.in.size();
        default: return 0;
    }
}

LayerWeights prepare_weights(const LayerSpec& spec, std::vector<std::span<const float>> tensors) {
    LayerWeights w;
    w.tensors = std::move(tensors);
    const auto decls = spec.tensors();
    if (decls.size() != w.tensors.size()) throw ShapeError(where(spec) + ": wrong number of weight tensors");
    for (std::size_t i = 0; i < decls.size(); ++i)
        if (decls[i].elements() != w.tensors[i].size())
            throw ShapeError(where(spec) + ": tensor '" + decls[i].role + "' has " +
                             std::to_string(w.tensors[i].size()) + " elements, expected " +
                             std::to_string(decls[i].elements()));
    if (is_deconv_like(spec.kind)) {
        // (Cin, Cout, kt, kf) -> row-major (Cout*kf) x (Cin*kt)
        const int cin = spec.in.channels, cout = spec.out.channels, kt = spec.kernel_t, kf = spec.kernel_f;
        auto relayout = [&](std::span<const float> src, std::vector<float>& dst) {
            dst.resize(src.size());
            for (int ci = 0; ci < cin; ++ci)
                for (int co = 0; co < cout; ++co)
                    for (int k = 0; k < kt; ++k)
                        for (int j = 0; j < kf; ++j)
                            dst[static_cast<std::size_t>((co * kf + j) * (cin * kt) + ci * kt + k)] =
                                src[static_cast<std::size_t>(((ci * cout + co) * kt + k) * kf + j)];
        };
        relayout(w.tensors[0], w.prepared);
        if (spec.kind == LayerKind::deglu2d) relayout(w.tensors[spec.bias ? 2 : 1], w.prepared_gate);
    }
    return w;
}

void conv2d_frame(const LayerSpec& s, std::span<const float> weight, std::span<const float> bias,
                  std::span<const float* const> taps, std::span<float> out, std::vector<float>& scratch) {
    const std::size_t k = static_cast<std::size_t>(s.in.channels * s.kernel_t * s.kernel_f);
    scratch.resize(k * static_cast<std::size_t>(s.out.freq));
    build_patch(s, taps, scratch.data());
    conv_from_patch(s, weight, bias, scratch.data(), out.data());
}

void deconv2d_frame(const LayerSpec& s, std::span<const float> prepared, std::span<const float> bias,
                    std::span<const float* const> taps, std::span<float> out, std::vector<float>& scratch) {
    const auto xsize = static_cast<std::size_t>(s.in.channels * s.kernel_t * s.in.freq);
    const auto zsize = static_cast<std::size_t>(s.out.channels * s.kernel_f * s.in.freq);
    scratch.resize(xsize + zsize);
    build_deconv_input(s, taps, scratch.data());
    deconv_from_input(s, prepared, bias, scratch.data(), scratch.data() + xsize, out.data());
}

void glu_frame(const LayerSpec& s, const LayerWeights& w, std::span<const float* const> taps,
               std::span<float> out, std::vector<float>& scratch) {
    const std::span<const float> none;
    const auto& t = w.tensors;
    const std::span<const float> bias_a = s.bias ? t[1] : none;
    const std::span<const float> bias_b = s.bias ? t[3] : none;
    const std::size_t n = s.out.size();
    if (s.kind == LayerKind::glu2d) {
        const std::span<const float> gate_w = t[s.bias ? 2 : 1];
        const std::size_t k = static_cast<std::size_t>(s.in.channels * s.kernel_t * s.kernel_f) *
                              static_cast<std::size_t>(s.out.freq);
        scratch.resize(k + n);
        build_patch(s, taps, scratch.data());
        conv_from_patch(s, t[0], bias_a, scratch.data(), out.data());
        conv_from_patch(s, gate_w, bias_b, scratch.data(), scratch.data() + k);
        for (std::size_t i = 0; i < n; ++i) out[i] *= sigmoid(scratch[k + i]);
    } else if (s.kind == LayerKind::deglu2d) {
        const auto xsize = static_cast<std::size_t>(s.in.channels * s.kernel_t * s.in.freq);
        const auto zsize = static_cast<std::size_t>(s.out.channels * s.kernel_f * s.in.freq);
        scratch.resize(xsize + zsize + n);
        build_deconv_input(s, taps, scratch.data());
        deconv_from_input(s, w.prepared, bias_a, scratch.data(), scratch.data() + xsize, out.data());
        float* gate = scratch.data() + xsize + zsize;
        deconv_from_input(s, w.prepared_gate, bias_b, scratch.data(), scratch.data() + xsize, gate);
        for (std::size_t i = 0; i < n; ++i) out[i] *= sigmoid(gate[i]);
    } else {
        throw ConfigError(where(s) + ": glu_frame needs a gated layer");
    }
}

void linear_frame(std::span<const float> weight, std::span<const float> bias, std::span<const float> x,
                  std::span<float> out) {
    const auto rows = static_cast<Eigen::Index>(out.size()), cols = static_cast<Eigen::Index>(x.size());
    Eigen::Map<const RowMat> w(weight.data(), rows, cols);
    Eigen::Map<const Vec> xv(x.data(), cols);
    Eigen::Map<Vec> y(out.data(), rows);
    y.noalias() = w * xv;
    if (!bias.empty()) y += Eigen::Map<const Vec>(bias.data(), rows);
}

void gru_grouped_frame(const LayerSpec& s, const LayerWeights& w, std::span<const float> x,
                       std::span<float> h, std::vector<float>& scratch) {
    const int g = s.groups, hg = s.hidden / g, ig = s.in.channels / g;
    const auto gates = static_cast<std::size_t>(3 * hg);
    scratch.resize(2 * gates);
    float* gi = scratch.data();
    float* gh = scratch.data() + gates;
    const auto& t = w.tensors;
    for (int grp = 0; grp < g; ++grp) {
        const std::span<const float> w_ih = t[0].subspan(static_cast<std::size_t>(grp) * gates * ig, gates * ig);
        const std::span<const float> w_hh = t[1].subspan(static_cast<std::size_t>(grp) * gates * hg, gates * hg);
        const std::span<const float> b = s.bias ? t[2].subspan(static_cast<std::size_t>(grp) * gates, gates)
                                                : std::span<const float>{};
        const auto xg = x.subspan(static_cast<std::size_t>(grp * ig), static_cast<std::size_t>(ig));
        const auto hgs = h.subspan(static_cast<std::size_t>(grp * hg), static_cast<std::size_t>(hg));
        linear_frame(w_ih, {}, xg, {gi, gates});
        linear_frame(w_hh, {}, hgs, {gh, gates});
        for (int i = 0; i < hg; ++i) {
            const float br = b.empty() ? 0.0f : b[static_cast<std::size_t>(i)];
            const float bz = b.empty() ? 0.0f : b[static_cast<std::size_t>(hg + i)];
            const float bn = b.empty() ? 0.0f : b[static_cast<std::size_t>(2 * hg + i)];
            const float r = sigmoid(gi[i] + gh[i] + br);
            const float z = sigmoid(gi[hg + i] + gh[hg + i] + bz);
            const float n = std::tanh(gi[2 * hg + i] + bn + r * gh[2 * hg + i]);
            hgs[static_cast<std::size_t>(i)] = (1.0f - z) * n + z * hgs[static_cast<std::size_t>(i)];
        }
    }
}

void lstm_frame(const LayerSpec& s, const LayerWeights& w, std::span<const float> x, std::span<float> h,
                std::span<float> c, std::vector<float>& scratch) {
    const int hid = s.hidden;
    const auto gates = static_cast<std::size_t>(4 * hid);
    scratch.resize(2 * gates);
    float* gi = scratch.data();
    float* gh = scratch.data() + gates;
    const auto& t = w.tensors;
    linear_frame(t[0], s.bias ? t[2] : std::span<const float>{}, x, {gi, gates});
    linear_frame(t[1], {}, h, {gh, gates});
    for (int j = 0; j < hid; ++j) {
        const float ig = sigmoid(gi[j] + gh[j]);
        const float fg = sigmoid(gi[hid + j] + gh[hid + j]);
        const float gg = std::tanh(gi[2 * hid + j] + gh[2 * hid + j]);
        const float og = sigmoid(gi[3 * hid + j] + gh[3 * hid + j]);
        const auto u = static_cast<std::size_t>(j);
        c[u] = fg * c[u] + ig * gg;
        h[u] = og * std::tanh(c[u]);
    }
}

Moments frame_moments(std::span<const float> x) {
    Moments m;
    for (float v : x) {
        const double d = v;
        m.sum += d;
        m.sum_sq += d * d;
    }
    m.count = static_cast<double>(x.size());
    return m;
}

void cln_frame(const LayerSpec& s, std::span<const float> gain, std::span<const float> bias, const Moments& stats,
               std::span<const float> x, std::span<float> out) {
    const double mean = stats.sum / stats.count;
    const double var = std::max(stats.sum_sq / stats.count - mean * mean, 0.0);
    const double inv = 1.0 / std::sqrt(var + kClnEps);
    const int ch = s.in.channels, f = s.in.freq;
    for (int c = 0; c < ch; ++c) {
        const double gn = gain[static_cast<std::size_t>(c)];
        const double bs = bias[static_cast<std::size_t>(c)];
        for (int k = 0; k < f; ++k) {
            const auto i = static_cast<std::size_t>(c * f + k);
            out[i] = static_cast<float>((static_cast<double>(x[i]) - mean) * inv * gn + bs);
        }
    }
}

void prelu_frame(const LayerSpec& s, std::span<const float> slope, std::span<const float> x, std::span<float> out) {
    const int ch = s.in.channels, f = s.in.freq;
    for (int c = 0; c < ch; ++c) {
        const float a = slope[static_cast<std::size_t>(c)];
        for (int k = 0; k < f; ++k) {
            const auto i = static_cast<std::size_t>(c * f + k);
            out[i] = x[i] >= 0.0f ? x[i] : a * x[i];
        }
    }
}

void shuffle_frame(int groups, std::span<const float> x, std::span<float> out) {
    const std::size_t chunk = x.size() / static_cast<std::size_t>(groups);
    for (int j = 0; j < groups; ++j)
        for (std::size_t i = 0; i < chunk; ++i)
            out[i * static_cast<std::size_t>(groups) + static_cast<std::size_t>(j)] =
                x[static_cast<std::size_t>(j) * chunk + i];
}

float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace taylorse::nn
