#include "taylorse/model_zoo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include <json.hpp>

#include "taylorse/error.hpp"

namespace taylorse::model {

namespace {

constexpr int kTaerChannels = 64;
constexpr int kBottleneck = 256;
constexpr int kStcmInner = 64;
constexpr int kStcmKernel = 5;
constexpr std::array<int, 4> kDilations = {1, 2, 5, 9};
constexpr std::array<int, 5> kUnetEncoderDepths = {4, 3, 2, 1, 0};
constexpr std::array<int, 5> kUnetDecoderDepths = {1, 2, 3, 4, 0};
constexpr int kLstmWidth = 256;

constexpr int kLiteGainWidth = 128;
constexpr int kLiteEncoderChannels = 32;
constexpr int kLiteSurrogateWidth = 256;
constexpr int kLitePostWidth = 32;
constexpr int kLiteGroups = 2;

void check_args(int order, int channels) {
    if (order < 0) throw ConfigError("expansion order must be >= 0, got " + std::to_string(order));
    if (channels < 1) throw ConfigError("channel count must be >= 1, got " + std::to_string(channels));
    if (order > 0xffff || channels > 0xffff) throw ConfigError("order/channels exceed archive limits");
}

// Residual UNet-block of the given depth at the input's frequency size.
int unet_block(nn::Component& c, int x, int depth, const std::string& tag) {
    std::vector<int> enc{x};
    int h = x;
    for (int i = 1; i <= depth; ++i) {
        const std::string t = tag + ".enc" + std::to_string(i);
        h = c.conv2d(h, kTaerChannels, 2, 3, 2, t + ".conv");
        h = c.cln(h, t + ".cln");
        h = c.prelu(h, t + ".prelu");
        enc.push_back(h);
    }
    int d = enc.back();
    for (int i = depth; i >= 1; --i) {
        const std::string t = tag + ".dec" + std::to_string(i);
        const int in = i == depth ? d : c.concat(d, enc[static_cast<std::size_t>(i)], t + ".skip");
        d = c.deconv2d(in, kTaerChannels, 2, 3, 2, c.shape(enc[static_cast<std::size_t>(i - 1)]).freq, t + ".deconv");
        d = c.cln(d, t + ".cln");
        d = c.prelu(d, t + ".prelu");
    }
    return c.add(x, d, tag + ".residual");
}

nn::Component taer_zeroth(int channels) {
    nn::Component c("zeroth");
    int h = c.input({2 * channels, kBins}, "noisy_ri");
    std::vector<int> skips;
    for (std::size_t i = 0; i < kUnetEncoderDepths.size(); ++i) {
        const std::string t = "rel" + std::to_string(i);
        h = c.glu2d(h, kTaerChannels, 1, 3, 2, t + ".glu");
        h = c.cln(h, t + ".cln");
        h = c.prelu(h, t + ".prelu");
        if (kUnetEncoderDepths[i] > 0) h = unet_block(c, h, kUnetEncoderDepths[i], t + ".unet");
        skips.push_back(h);
    }
    const nn::Shape bottom = c.shape(h);
    int b = c.flatten(h, "bottleneck.flatten");
    if (c.shape(b).channels != kBottleneck) throw ConfigError("TaEr bottleneck width is not 256");
    b = stcn(c, b, "bottleneck.stcn0");
    b = stcn(c, b, "bottleneck.stcn1");
    const int feature = b;
    h = c.unflatten(b, bottom, "bottleneck.unflatten");
    for (std::size_t i = 0; i < kUnetDecoderDepths.size(); ++i) {
        const std::string t = "rdl" + std::to_string(i);
        const int in = c.concat(h, skips[skips.size() - 1 - i], t + ".skip");
        const int out_freq = i + 1 < skips.size() ? c.shape(skips[skips.size() - 2 - i]).freq : kBins;
        h = c.deglu2d(in, kTaerChannels, 1, 3, 2, out_freq, t + ".deglu");
        h = c.cln(h, t + ".cln");
        h = c.prelu(h, t + ".prelu");
        if (kUnetDecoderDepths[i] > 0) h = unet_block(c, h, kUnetDecoderDepths[i], t + ".unet");
    }
    int gain = c.conv2d(h, 1, 1, 1, 1, "gain.conv");
    gain = c.sigmoid(gain, "gain.sigmoid");
    c.set_outputs({gain, feature});
    return c;
}

nn::Component taer_surrogate(int q) {
    nn::Component c("surrogate" + std::to_string(q));
    const int prev = c.input({2 * kBins, 1}, "previous_term_ri");
    const int feat = c.input({kBottleneck, 1}, "shared_feature");
    int x = c.concat(prev, feat, "join");
    x = c.conv1d(x, kBottleneck, 1, 1, "in_conv");
    x = stcn(c, x, "stcn0");
    x = stcn(c, x, "stcn1");
    const int l = c.lstm(x, kLstmWidth, "lstm");
    x = c.add(x, l, "lstm.residual");
    const int re = c.linear(x, kBins, "head.real");
    const int im = c.linear(x, kBins, "head.imag");
    c.set_outputs({re, im});
    return c;
}

nn::Component lite_zeroth(int channels) {
    nn::Component c("zeroth");
    int x = c.input({kErbBands * channels, 1}, "noisy_erb");
    x = c.linear(x, kLiteGainWidth, "in_proj");
    x = c.gru(x, kLiteGainWidth, kLiteGroups, "gru0");
    x = c.shuffle(x, kLiteGroups, "shuffle");
    x = c.gru(x, kLiteGainWidth, kLiteGroups, "gru1");
    x = c.linear(x, kErbBands, "gain.linear");
    x = c.sigmoid(x, "gain.sigmoid");
    c.set_outputs({x});
    return c;
}

nn::Component lite_encoder(int channels) {
    nn::Component c("encoder");
    int h = c.input({2 * channels, kBins}, "noisy_ri");
    for (int i = 0; i < 5; ++i) {
        const std::string t = "enc" + std::to_string(i);
        h = c.glu2d(h, kLiteEncoderChannels, 1, 3, 2, t + ".glu");
        h = c.cln(h, t + ".cln");
        h = c.prelu(h, t + ".prelu");
    }
    c.set_outputs({c.flatten(h, "flatten")});
    return c;
}

nn::Component lite_surrogate(int q, int feature) {
    nn::Component c("surrogate" + std::to_string(q));
    const int prev = c.input({2 * kBins, 1}, "previous_term_ri");
    const int feat = c.input({feature, 1}, "encoder_feature");
    int x = c.concat(prev, feat, "join");
    x = c.linear(x, kLiteSurrogateWidth, "in_proj");
    x = c.gru(x, kLiteSurrogateWidth, kLiteGroups, "gru0");
    x = c.shuffle(x, kLiteGroups, "shuffle");
    x = c.gru(x, kLiteSurrogateWidth, kLiteGroups, "gru1");
    const int re = c.linear(x, kBins, "head.real");
    const int im = c.linear(x, kBins, "head.imag");
    c.set_outputs({re, im});
    return c;
}

nn::Component lite_post_filter() {
    nn::Component c("postfilter");
    int x = c.input({kErbBands, 1}, "estimate_erb");
    x = c.gru(x, kLitePostWidth, 1, "gru0");
    x = c.gru(x, kLitePostWidth, 1, "gru1");
    x = c.linear(x, 1, "gain.linear");
    x = c.sigmoid(x, "gain.sigmoid");
    c.set_outputs({x});
    return c;
}

}  // namespace

int stcm(nn::Component& c, int x, int dilation, const std::string& tag) {
    const int width = c.shape(x).channels;
    const int h = c.conv1d(x, kStcmInner, 1, 1, tag + ".in");
    int main = c.prelu(h, tag + ".main.prelu");
    main = c.cln(main, tag + ".main.cln");
    main = c.conv1d(main, kStcmInner, kStcmKernel, dilation, tag + ".main.dconv");
    int gate = c.prelu(h, tag + ".gate.prelu");
    gate = c.cln(gate, tag + ".gate.cln");
    gate = c.conv1d(gate, kStcmInner, kStcmKernel, dilation, tag + ".gate.dconv");
    gate = c.sigmoid(gate, tag + ".gate.sigmoid");
    int y = c.mul(main, gate, tag + ".gated");
    y = c.prelu(y, tag + ".out.prelu");
    y = c.cln(y, tag + ".out.cln");
    y = c.conv1d(y, width, 1, 1, tag + ".out");
    return c.add(x, y, tag + ".residual");
}

int stcn(nn::Component& c, int x, const std::string& tag) {
    for (std::size_t i = 0; i < kDilations.size(); ++i)
        x = stcm(c, x, kDilations[i], tag + ".stcm" + std::to_string(i));
    return x;
}

std::vector<const nn::Component*> ModelGraph::components() const {
    std::vector<const nn::Component*> out{&zeroth};
    if (encoder) out.push_back(&*encoder);
    for (const auto& s : surrogates) out.push_back(&s);
    if (post_filter) out.push_back(&*post_filter);
    return out;
}

std::vector<nn::TensorDecl> ModelGraph::weight_decls() const {
    std::vector<nn::TensorDecl> out;
    for (const auto* c : components()) {
        auto d = c->weight_decls();
        out.insert(out.end(), d.begin(), d.end());
    }
    return out;
}

std::size_t ModelGraph::count_params() const {
    std::size_t n = 0;
    for (const auto* c : components()) n += c->param_count();
    return n;
}

std::size_t ModelGraph::count_macs_per_frame() const {
    std::size_t n = 0;
    for (const auto* c : components()) n += c->macs_per_frame();
    const std::size_t ri = 2 * kBins;
    n += ri;                                           // 0th-order gain on the reference channel
    n += static_cast<std::size_t>(order) * 2 * ri;     // recursion + weighted accumulation
    if (variant == Variant::taerlite) {
        const std::size_t erb = static_cast<std::size_t>(kErbBands) * kBins;
        n += static_cast<std::size_t>(channels) * erb;  // Linear2ERB of the inputs
        n += erb;                                       // ERB2Linear of the gains
        n += erb + ri;                                  // post-filter features and gain
    }
    return n;
}

int ModelGraph::feature_width() const {
    if (variant == Variant::taer) return zeroth.shape(zeroth.outputs().at(1)).channels;
    return encoder->shape(encoder->outputs().at(0)).channels;
}

ModelGraph build_taer(int order, int channels) {
    check_args(order, channels);
    ModelGraph g;
    g.variant = Variant::taer;
    g.order = order;
    g.channels = channels;
    g.zeroth = taer_zeroth(channels);
    for (int q = 1; q <= order; ++q) g.surrogates.push_back(taer_surrogate(q));
    return g;
}

ModelGraph build_taerlite(int order, int channels) {
    check_args(order, channels);
    ModelGraph g;
    g.variant = Variant::taerlite;
    g.order = order;
    g.channels = channels;
    g.zeroth = lite_zeroth(channels);
    g.encoder = lite_encoder(channels);
    const int feature = g.feature_width();
    for (int q = 1; q <= order; ++q) g.surrogates.push_back(lite_surrogate(q, feature));
    g.post_filter = lite_post_filter();
    return g;
}

ModelGraph build(Variant variant, int order, int channels) {
    return variant == Variant::taer ? build_taer(order, channels) : build_taerlite(order, channels);
}

namespace {

int field_of(const nn::Component& c, int output) {
    const auto lb = c.lookback(output);
    return 1 + std::max(lb.frames, lb.recurrent ? 1 : 0);
}

bool frames_differ(const std::vector<float>& a, const std::vector<float>& b, std::size_t t, std::size_t width) {
    for (std::size_t i = 0; i < width; ++i)
        if (a[t * width + i] != b[t * width + i]) return true;
    return false;
}

}  // namespace

ReceptiveField receptive_field(const ModelGraph& graph) {
    ReceptiveField rf;
    rf.zeroth_order = field_of(graph.zeroth, graph.zeroth.outputs().at(0));
    if (!graph.surrogates.empty()) {
        const auto& s = graph.surrogates.front();
        rf.high_order = field_of(s, s.outputs().at(0));
    }
    return rf;
}

int probe_component(const nn::Component& component, const weights::WeightArchive& archive, int output_index,
                    std::uint64_t seed, bool* causal) {
    const nn::BoundComponent bound(component, [&](const std::string& n) { return archive.lookup(n); });
    const auto out_node = component.outputs().at(static_cast<std::size_t>(output_index));
    const std::size_t width = component.shape(out_node).size();
    const auto k = static_cast<std::size_t>(output_index);
    constexpr std::size_t perturbed = 3;

    std::vector<std::size_t> input_sizes;
    for (const auto& node : component.nodes())
        if (node.spec.kind == nn::LayerKind::input) input_sizes.push_back(node.spec.out.size());

    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    auto make_inputs = [&](std::size_t frames) {
        std::vector<std::vector<float>> in;
        for (auto n : input_sizes) {
            std::vector<float> v(frames * n);
            for (auto& x : v) x = normal(rng);
            in.push_back(std::move(v));
        }
        return in;
    };
    auto perturb = [&](std::vector<std::vector<float>> in, std::size_t frame) {
        for (std::size_t i = 0; i < in.size(); ++i)
            for (std::size_t j = 0; j < input_sizes[i]; ++j) in[i][frame * input_sizes[i] + j] += 1.0f + normal(rng) * 0.1f;
        return in;
    };

    bool is_causal = true;
    std::size_t window = static_cast<std::size_t>(component.lookback(out_node).frames) + 8;
    long feedforward = 0;
    const nn::RunMode taps_only{true, true};
    for (;;) {
        const std::size_t frames = perturbed + window;
        const auto base_in = make_inputs(frames);
        const auto base = bound.run(base_in, frames, taps_only)[k];
        const auto moved = bound.run(perturb(base_in, perturbed), frames, taps_only)[k];
        long last = -1;
        for (std::size_t t = 0; t < frames; ++t)
            if (frames_differ(base, moved, t, width)) {
                if (t < perturbed) is_causal = false;
                last = static_cast<long>(t);
            }
        if (last == static_cast<long>(frames) - 1) {
            window *= 2;
            continue;
        }
        feedforward = std::max(0L, last - static_cast<long>(perturbed));
        break;
    }

    long recurrent = 0;
    const bool has_recurrence = std::any_of(component.nodes().begin(), component.nodes().end(),
                                            [](const nn::Node& n) { return n.spec.recurrent(); });
    if (has_recurrence) {
        const nn::RunMode stateful{true, false};
        const std::size_t frames = perturbed + 2;
        const auto base_in = make_inputs(frames);
        const auto base = bound.run(base_in, frames, stateful)[k];
        const auto moved = bound.run(perturb(base_in, perturbed), frames, stateful)[k];
        if (frames_differ(base, moved, perturbed + 1, width)) recurrent = 1;
    }
    if (causal) *causal = is_causal;
    return 1 + static_cast<int>(std::max(feedforward, recurrent));
}

ProbeResult probe_receptive_field(const ModelGraph& graph, const weights::WeightArchive& archive,
                                  std::uint64_t seed) {
    ProbeResult r;
    bool causal = true;
    r.field.zeroth_order = probe_component(graph.zeroth, archive, 0, seed, &causal);
    r.causal = r.causal && causal;
    if (!graph.surrogates.empty()) {
        r.field.high_order = probe_component(graph.surrogates.front(), archive, 0, seed + 1, &causal);
        r.causal = r.causal && causal;
    }
    return r;
}

weights::WeightArchive random_weights(const ModelGraph& graph, RandomInit init) {
    weights::WeightArchive a;
    a.header.variant = graph.variant;
    a.header.order = static_cast<std::uint16_t>(graph.order);
    a.header.channels = static_cast<std::uint16_t>(graph.channels);
    std::mt19937_64 rng(init.seed);
    std::uniform_real_distribution<float> unit(-1.0f, 1.0f);

    for (const auto* comp : graph.components()) {
        const auto& nodes = comp->nodes();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& s = nodes[i].spec;
            if (!s.has_weights()) continue;
            for (const auto& decl : s.tensors()) {
                std::vector<float> data(decl.elements());
                double fan_in = 1.0;
                switch (s.kind) {
                    case nn::LayerKind::glu2d:
                    case nn::LayerKind::conv2d: fan_in = s.in.channels * s.kernel_t * s.kernel_f; break;
                    case nn::LayerKind::deglu2d:
                    case nn::LayerKind::deconv2d:
                        fan_in = s.in.channels * s.kernel_t * std::ceil(double(s.kernel_f) / s.stride_f);
                        break;
                    case nn::LayerKind::conv1d: fan_in = s.in.channels * s.kernel_t; break;
                    case nn::LayerKind::linear: fan_in = s.in.channels; break;
                    case nn::LayerKind::gru_grouped:
                    case nn::LayerKind::lstm: fan_in = s.hidden / s.groups; break;
                    default: break;
                }
                const float bound = init.scale / static_cast<float>(std::sqrt(fan_in));
                if (s.kind == nn::LayerKind::prelu) {
                    std::fill(data.begin(), data.end(), 0.25f);
                } else if (s.kind == nn::LayerKind::cln) {
                    const bool gain = decl.role == "gain";
                    for (auto& v : data) v = (gain ? 1.0f : 0.0f) + 0.1f * unit(rng);
                } else {
                    for (auto& v : data) v = bound * unit(rng);
                }
                std::vector<std::uint32_t> shape(decl.shape.begin(), decl.shape.end());
                a.add(comp->tensor_name(static_cast<int>(i), decl.role), std::move(shape), std::move(data));
            }
        }
    }
    return a;
}

std::string describe_text(const ModelGraph& graph) {
    std::ostringstream os;
    const auto rf = receptive_field(graph);
    os << to_string(graph.variant) << " Q=" << graph.order << " M=" << graph.channels << "\n";
    os << "params " << graph.count_params() << ", MACs/frame " << graph.count_macs_per_frame()
       << ", receptive field " << rf.zeroth_order << " (0th order) / " << rf.high_order << " (high order)\n";
    for (const auto* c : graph.components()) {
        os << "\n[" << c->name() << "] params " << c->param_count() << ", MACs/frame " << c->macs_per_frame() << "\n";
        os << std::left << std::setw(5) << "#" << std::setw(34) << "layer" << std::setw(13) << "kind" << std::setw(10)
           << "in" << std::setw(10) << "out" << std::right << std::setw(10) << "params" << std::setw(11) << "MACs"
           << std::setw(9) << "lookback" << "\n";
        const auto& nodes = c->nodes();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& s = nodes[i].spec;
            os << std::left << std::setw(5) << i << std::setw(34) << s.label << std::setw(13) << nn::to_string(s.kind)
               << std::setw(10) << nn::to_string(s.in) << std::setw(10) << nn::to_string(s.out) << std::right
               << std::setw(10) << (s.kind == nn::LayerKind::input ? 0 : nn::count_params(s)) << std::setw(11)
               << (s.kind == nn::LayerKind::input ? 0 : nn::count_macs_per_frame(s)) << std::setw(9) << s.lookback()
               << "\n";
        }
    }
    return os.str();
}

std::string describe_json(const ModelGraph& graph, int indent) {
    using nlohmann::json;
    const auto rf = receptive_field(graph);
    json j;
    j["variant"] = std::string(to_string(graph.variant));
    j["order"] = graph.order;
    j["channels"] = graph.channels;
    j["params"] = graph.count_params();
    j["macs_per_frame"] = graph.count_macs_per_frame();
    j["receptive_field"] = {{"zeroth_order", rf.zeroth_order}, {"high_order", rf.high_order}};
    j["components"] = json::array();
    for (const auto* c : graph.components()) {
        json comp{{"name", c->name()}, {"params", c->param_count()}, {"macs_per_frame", c->macs_per_frame()}};
        comp["layers"] = json::array();
        const auto& nodes = c->nodes();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& s = nodes[i].spec;
            const bool input = s.kind == nn::LayerKind::input;
            comp["layers"].push_back({{"index", i},
                                      {"label", s.label},
                                      {"kind", nn::to_string(s.kind)},
                                      {"in", {s.in.channels, s.in.freq}},
                                      {"out", {s.out.channels, s.out.freq}},
                                      {"inputs", nodes[i].inputs},
                                      {"params", input ? 0 : nn::count_params(s)},
                                      {"macs_per_frame", input ? 0 : nn::count_macs_per_frame(s)},
                                      {"lookback", s.lookback()}});
        }
        j["components"].push_back(std::move(comp));
    }
    return j.dump(indent);
}

}  // namespace taylorse::model
