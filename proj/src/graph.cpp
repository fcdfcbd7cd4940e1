#include "taylorse/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "taylorse/error.hpp"

namespace taylorse::nn {

namespace {

bool conv_like(LayerKind k) {
    return k == LayerKind::glu2d || k == LayerKind::conv2d || k == LayerKind::conv1d ||
           k == LayerKind::deglu2d || k == LayerKind::deconv2d;
}

}  // namespace

int Component::push(LayerSpec spec, std::vector<int> inputs) {
    for (int i : inputs)
        if (i < 0 || i >= static_cast<int>(nodes_.size()))
            throw ConfigError(name_ + ": layer '" + spec.label + "' references unknown node " + std::to_string(i));
    if (spec.kind != LayerKind::input) spec.validate();
    nodes_.push_back({std::move(spec), std::move(inputs)});
    return static_cast<int>(nodes_.size()) - 1;
}

int Component::input(Shape shape, std::string label) {
    LayerSpec s;
    s.kind = LayerKind::input;
    s.label = std::move(label);
    s.in = s.out = shape;
    s.input_index = static_cast<int>(input_count_++);
    return push(std::move(s), {});
}

int Component::glu2d(int x, int out_channels, int kernel_t, int kernel_f, int stride_f, std::string label) {
    LayerSpec s;
    s.kind = LayerKind::glu2d;
    s.label = std::move(label);
    s.in = shape(x);
    s.kernel_t = kernel_t;
    s.kernel_f = kernel_f;
    s.stride_f = stride_f;
    s.out = {out_channels, conv_out_freq(s.in.freq, kernel_f, stride_f)};
    return push(std::move(s), {x});
}

int Component::conv2d(int x, int out_channels, int kernel_t, int kernel_f, int stride_f, std::string label) {
    const int id = glu2d(x, out_channels, kernel_t, kernel_f, stride_f, std::move(label));
    nodes_.back().spec.kind = LayerKind::conv2d;
    return id;
}

int Component::deglu2d(int x, int out_channels, int kernel_t, int kernel_f, int stride_f, int out_freq,
                       std::string label) {
    LayerSpec s;
    s.kind = LayerKind::deglu2d;
    s.label = std::move(label);
    s.in = shape(x);
    s.kernel_t = kernel_t;
    s.kernel_f = kernel_f;
    s.stride_f = stride_f;
    s.output_padding = out_freq - deconv_out_freq(s.in.freq, kernel_f, stride_f);
    if (s.output_padding < 0 || s.output_padding >= stride_f)
        throw ConfigError(name_ + ": '" + s.label + "' cannot reach " + std::to_string(out_freq) + " bins from " +
                          std::to_string(s.in.freq));
    s.out = {out_channels, out_freq};
    return push(std::move(s), {x});
}

int Component::deconv2d(int x, int out_channels, int kernel_t, int kernel_f, int stride_f, int out_freq,
                        std::string label) {
    const int id = deglu2d(x, out_channels, kernel_t, kernel_f, stride_f, out_freq, std::move(label));
    nodes_.back().spec.kind = LayerKind::deconv2d;
    return id;
}

int Component::conv1d(int x, int out_channels, int kernel_t, int dilation, std::string label) {
    LayerSpec s;
    s.kind = LayerKind::conv1d;
    s.label = std::move(label);
    s.in = shape(x);
    s.kernel_t = kernel_t;
    s.dilation = dilation;
    s.out = {out_channels, 1};
    return push(std::move(s), {x});
}

int Component::linear(int x, int out_features, std::string label) {
    LayerSpec s;
    s.kind = LayerKind::linear;
    s.label = std::move(label);
    s.in = shape(x);
    s.out = {out_features, 1};
    return push(std::move(s), {x});
}

int Component::gru(int x, int hidden, int groups, std::string label) {
    LayerSpec s;
    s.kind = LayerKind::gru_grouped;
    s.label = std::move(label);
    s.in = shape(x);
    s.hidden = hidden;
    s.groups = groups;
    s.out = {hidden, 1};
    return push(std::move(s), {x});
}

int Component::lstm(int x, int hidden, std::string label) {
    LayerSpec s;
    s.kind = LayerKind::lstm;
    s.label = std::move(label);
    s.in = shape(x);
    s.hidden = hidden;
    s.out = {hidden, 1};
    return push(std::move(s), {x});
}

namespace {

LayerSpec elementwise(LayerKind kind, std::string label, Shape shape) {
    LayerSpec s;
    s.kind = kind;
    s.label = std::move(label);
    s.in = s.out = shape;
    return s;
}

}  // namespace

int Component::cln(int x, std::string label) { return push(elementwise(LayerKind::cln, std::move(label), shape(x)), {x}); }
int Component::prelu(int x, std::string label) {
    return push(elementwise(LayerKind::prelu, std::move(label), shape(x)), {x});
}
int Component::sigmoid(int x, std::string label) {
    return push(elementwise(LayerKind::sigmoid, std::move(label), shape(x)), {x});
}
int Component::tanh(int x, std::string label) { return push(elementwise(LayerKind::tanh, std::move(label), shape(x)), {x}); }

int Component::shuffle(int x, int groups, std::string label) {
    auto s = elementwise(LayerKind::shuffle, std::move(label), shape(x));
    s.groups = groups;
    return push(std::move(s), {x});
}

int Component::concat(int a, int b, std::string label) {
    const Shape sa = shape(a), sb = shape(b);
    if (sa.freq != sb.freq)
        throw ShapeError(name_ + ": concat '" + label + "' of " + to_string(sa) + " and " + to_string(sb));
    auto s = elementwise(LayerKind::concat, std::move(label), sa);
    s.out = {sa.channels + sb.channels, sa.freq};
    return push(std::move(s), {a, b});
}

int Component::add(int a, int b, std::string label) {
    if (shape(a) != shape(b)) throw ShapeError(name_ + ": add '" + label + "' shape mismatch");
    return push(elementwise(LayerKind::add, std::move(label), shape(a)), {a, b});
}

int Component::mul(int a, int b, std::string label) {
    if (shape(a) != shape(b)) throw ShapeError(name_ + ": mul '" + label + "' shape mismatch");
    return push(elementwise(LayerKind::mul, std::move(label), shape(a)), {a, b});
}

int Component::flatten(int x, std::string label) {
    auto s = elementwise(LayerKind::flatten, std::move(label), shape(x));
    s.out = {static_cast<int>(s.in.size()), 1};
    return push(std::move(s), {x});
}

int Component::unflatten(int x, Shape target, std::string label) {
    auto s = elementwise(LayerKind::unflatten, std::move(label), shape(x));
    if (target.size() != s.in.size()) throw ShapeError(name_ + ": unflatten size mismatch");
    s.out = target;
    return push(std::move(s), {x});
}

void Component::set_outputs(std::vector<int> outputs) {
    for (int o : outputs)
        if (o < 0 || o >= static_cast<int>(nodes_.size())) throw ConfigError(name_ + ": bad output node");
    outputs_ = std::move(outputs);
}

std::string Component::tensor_name(int node, const std::string& role) const {
    return name_ + "/" + std::to_string(node) + "/" + role;
}

std::vector<TensorDecl> Component::weight_decls() const {
    std::vector<TensorDecl> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& spec = nodes_[i].spec;
        if (!spec.has_weights()) continue;
        for (auto t : spec.tensors()) {
            t.role = tensor_name(static_cast<int>(i), t.role);
            out.push_back(std::move(t));
        }
    }
    return out;
}

std::size_t Component::param_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes_)
        if (node.spec.kind != LayerKind::input) n += count_params(node.spec);
    return n;
}

std::size_t Component::macs_per_frame() const {
    std::size_t n = 0;
    for (const auto& node : nodes_)
        if (node.spec.kind != LayerKind::input) n += count_macs_per_frame(node.spec);
    return n;
}

Component::PathLookback Component::lookback(int output) const {
    std::vector<PathLookback> lb(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        PathLookback best;
        for (int in : nodes_[i].inputs) {
            best.frames = std::max(best.frames, lb[static_cast<std::size_t>(in)].frames);
            best.recurrent = best.recurrent || lb[static_cast<std::size_t>(in)].recurrent;
        }
        best.frames += nodes_[i].spec.lookback();
        best.recurrent = best.recurrent || nodes_[i].spec.recurrent();
        lb[i] = best;
    }
    return lb.at(static_cast<std::size_t>(output));
}

// ---------------------------------------------------------------------------

BoundComponent::BoundComponent(const Component& component, const WeightLookup& lookup) : component_(&component) {
    const auto& nodes = component.nodes();
    weights_.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& spec = nodes[i].spec;
        if (!spec.has_weights()) continue;
        std::vector<std::span<const float>> spans;
        for (const auto& decl : spec.tensors())
            spans.push_back(lookup(component.tensor_name(static_cast<int>(i), decl.role)));
        weights_[i] = prepare_weights(spec, std::move(spans));
    }
}

BoundComponent::State BoundComponent::make_state() const {
    State st;
    const auto& nodes = component_->nodes();
    st.layers.resize(nodes.size());
    st.acts.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& spec = nodes[i].spec;
        st.acts[i].assign(spec.out.size(), 0.0f);
        auto& ls = st.layers[i];
        ls.history.assign(static_cast<std::size_t>(spec.lookback()) * spec.in.size(), 0.0f);
        if (spec.recurrent()) ls.hidden.assign(static_cast<std::size_t>(spec.hidden), 0.0f);
        if (spec.kind == LayerKind::lstm) ls.cell.assign(static_cast<std::size_t>(spec.hidden), 0.0f);
    }
    return st;
}

void BoundComponent::reset(State& state) const { state = make_state(); }

int BoundComponent::tap_lag(const LayerSpec& spec, int k) {
    if (spec.kind == LayerKind::deglu2d || spec.kind == LayerKind::deconv2d) return k * spec.dilation;
    return (spec.kernel_t - 1 - k) * spec.dilation;
}

void BoundComponent::eval(int id, std::span<const float* const> args, std::span<const float* const> taps,
                          LayerState& ls, RunMode mode, float* out, std::vector<float>& scratch) const {
    const auto& node = component_->nodes()[static_cast<std::size_t>(id)];
    const auto& spec = node.spec;
    const auto& w = weights_[static_cast<std::size_t>(id)];
    const std::size_t n_in = spec.in.size(), n_out = spec.out.size();
    const std::span<float> y(out, n_out);
    const std::span<const float> x(args.empty() ? nullptr : args[0], n_in);
    const std::span<const float> none;

    switch (spec.kind) {
        case LayerKind::input: break;
        case LayerKind::glu2d:
        case LayerKind::deglu2d: glu_frame(spec, w, taps, y, scratch); break;
        case LayerKind::conv2d:
        case LayerKind::conv1d:
            conv2d_frame(spec, w.tensors[0], spec.bias ? w.tensors[1] : none, taps, y, scratch);
            break;
        case LayerKind::deconv2d:
            deconv2d_frame(spec, w.prepared, spec.bias ? w.tensors[1] : none, taps, y, scratch);
            break;
        case LayerKind::linear: linear_frame(w.tensors[0], spec.bias ? w.tensors[1] : none, x, y); break;
        case LayerKind::gru_grouped:
            if (mode.memoryless_recurrence) std::fill(ls.hidden.begin(), ls.hidden.end(), 0.0f);
            gru_grouped_frame(spec, w, x, ls.hidden, scratch);
            std::copy(ls.hidden.begin(), ls.hidden.end(), y.begin());
            break;
        case LayerKind::lstm:
            if (mode.memoryless_recurrence) {
                std::fill(ls.hidden.begin(), ls.hidden.end(), 0.0f);
                std::fill(ls.cell.begin(), ls.cell.end(), 0.0f);
            }
            lstm_frame(spec, w, x, ls.hidden, ls.cell, scratch);
            std::copy(ls.hidden.begin(), ls.hidden.end(), y.begin());
            break;
        case LayerKind::cln: {
            const Moments m = frame_moments(x);
            if (mode.frame_local_norm) {
                cln_frame(spec, w.tensors[0], w.tensors[1], m, x, y);
            } else {
                ls.stats += m;
                cln_frame(spec, w.tensors[0], w.tensors[1], ls.stats, x, y);
            }
            break;
        }
        case LayerKind::prelu: prelu_frame(spec, w.tensors[0], x, y); break;
        case LayerKind::sigmoid:
            for (std::size_t i = 0; i < n_out; ++i) y[i] = sigmoid(x[i]);
            break;
        case LayerKind::tanh:
            for (std::size_t i = 0; i < n_out; ++i) y[i] = std::tanh(x[i]);
            break;
        case LayerKind::shuffle: shuffle_frame(spec.groups, x, y); break;
        case LayerKind::concat: {
            // channel-major layout: concatenation along channels is a plain append
            const std::size_t n_a = component_->shape(node.inputs[0]).size();
            std::copy_n(args[0], n_a, out);
            std::copy_n(args[1], n_out - n_a, out + n_a);
            break;
        }
        case LayerKind::add:
            for (std::size_t i = 0; i < n_out; ++i) y[i] = args[0][i] + args[1][i];
            break;
        case LayerKind::mul:
            for (std::size_t i = 0; i < n_out; ++i) y[i] = args[0][i] * args[1][i];
            break;
        case LayerKind::flatten:
        case LayerKind::unflatten: std::copy_n(args[0], n_out, out); break;
    }
}

void BoundComponent::step(std::span<const std::span<const float>> inputs, State& st, RunMode mode) const {
    const auto& nodes = component_->nodes();
    if (inputs.size() != component_->input_count())
        throw ShapeError(component_->name() + ": expected " + std::to_string(component_->input_count()) + " inputs");
    std::vector<const float*> args;
    std::vector<const float*> taps;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& node = nodes[i];
        const auto& spec = node.spec;
        if (spec.kind == LayerKind::input) {
            const auto& in = inputs[static_cast<std::size_t>(spec.input_index)];
            if (in.size() != spec.out.size())
                throw ShapeError(component_->name() + ": input '" + spec.label + "' has " + std::to_string(in.size()) +
                                 " values, expected " + std::to_string(spec.out.size()));
            std::copy(in.begin(), in.end(), st.acts[i].begin());
            continue;
        }
        args.clear();
        for (int in : node.inputs) args.push_back(st.acts[static_cast<std::size_t>(in)].data());
        auto& ls = st.layers[i];
        taps.clear();
        const int lookback = spec.lookback();
        if (conv_like(spec.kind)) {
            const std::size_t frame = spec.in.size();
            for (int k = 0; k < spec.kernel_t; ++k) {
                const int lag = tap_lag(spec, k);
                if (lag == 0) {
                    taps.push_back(args[0]);
                } else if (static_cast<std::size_t>(lag) > st.steps) {
                    taps.push_back(nullptr);
                } else {
                    const auto slot = (ls.head + static_cast<std::size_t>(lookback - lag)) % static_cast<std::size_t>(lookback);
                    taps.push_back(ls.history.data() + slot * frame);
                }
            }
        }
        eval(static_cast<int>(i), args, taps, ls, mode, st.acts[i].data(), st.scratch);
        if (lookback > 0) {
            const std::size_t frame = spec.in.size();
            std::copy_n(args[0], frame, ls.history.data() + ls.head * frame);
            ls.head = (ls.head + 1) % static_cast<std::size_t>(lookback);
        }
    }
    ++st.steps;
}

std::span<const float> BoundComponent::output(const State& state, std::size_t k) const {
    return state.acts.at(static_cast<std::size_t>(component_->outputs().at(k)));
}

std::vector<std::vector<float>> BoundComponent::run(std::span<const std::vector<float>> inputs, std::size_t frames,
                                                    RunMode mode) const {
    const auto& nodes = component_->nodes();
    if (inputs.size() != component_->input_count())
        throw ShapeError(component_->name() + ": expected " + std::to_string(component_->input_count()) + " inputs");

    // Release each node's sequence after its last consumer.
    std::vector<std::size_t> last_use(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (int in : nodes[i].inputs) last_use[static_cast<std::size_t>(in)] = i;
    for (int o : component_->outputs()) last_use[static_cast<std::size_t>(o)] = nodes.size();

    std::vector<std::vector<float>> seq(nodes.size());
    std::vector<float> scratch;
    std::vector<const float*> args;
    std::vector<const float*> taps;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& node = nodes[i];
        const auto& spec = node.spec;
        const std::size_t n_out = spec.out.size();
        if (spec.kind == LayerKind::input) {
            const auto& in = inputs[static_cast<std::size_t>(spec.input_index)];
            if (in.size() != frames * n_out)
                throw ShapeError(component_->name() + ": input '" + spec.label + "' has wrong length");
            seq[i] = in;
            continue;
        }
        seq[i].assign(frames * n_out, 0.0f);
        LayerState ls;
        if (spec.recurrent()) ls.hidden.assign(static_cast<std::size_t>(spec.hidden), 0.0f);
        if (spec.kind == LayerKind::lstm) ls.cell.assign(static_cast<std::size_t>(spec.hidden), 0.0f);
        for (std::size_t t = 0; t < frames; ++t) {
            args.clear();
            for (int in : node.inputs) {
                const auto src = static_cast<std::size_t>(in);
                args.push_back(seq[src].data() + t * nodes[src].spec.out.size());
            }
            taps.clear();
            if (conv_like(spec.kind)) {
                const auto& src = seq[static_cast<std::size_t>(node.inputs[0])];
                for (int k = 0; k < spec.kernel_t; ++k) {
                    const auto lag = static_cast<std::size_t>(tap_lag(spec, k));
                    taps.push_back(lag > t ? nullptr : src.data() + (t - lag) * spec.in.size());
                }
            }
            eval(static_cast<int>(i), args, taps, ls, mode, seq[i].data() + t * n_out, scratch);
        }
        for (int in : node.inputs) {
            const auto src = static_cast<std::size_t>(in);
            if (last_use[src] == i) std::vector<float>().swap(seq[src]);
        }
    }
    std::vector<std::vector<float>> out;
    for (int o : component_->outputs()) out.push_back(seq[static_cast<std::size_t>(o)]);
    return out;
}

}  // namespace taylorse::nn
