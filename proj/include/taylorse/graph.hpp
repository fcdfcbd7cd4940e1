#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "taylorse/nn.hpp"

namespace taylorse::nn {

struct Node {
    LayerSpec spec;
    std::vector<int> inputs;
};

/// A per-frame layer DAG, nodes in topological order. Trainable tensors are
/// named "<component>/<node index>/<role>".
class Component {
public:
    explicit Component(std::string name = {}) : name_(std::move(name)) {}

    const std::string& name() const { return name_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<int>& outputs() const { return outputs_; }
    std::size_t input_count() const { return input_count_; }
    Shape shape(int id) const { return nodes_.at(static_cast<std::size_t>(id)).spec.out; }

    int input(Shape shape, std::string label = "input");
    int glu2d(int x, int out_channels, int kernel_t, int kernel_f, int stride_f, std::string label);
    /// Transposed GLU; output_padding is derived from `out_freq`.
    int deglu2d(int x, int out_channels, int kernel_t, int kernel_f, int stride_f, int out_freq, std::string label);
    int conv2d(int x, int out_channels, int kernel_t, int kernel_f, int stride_f, std::string label);
    int deconv2d(int x, int out_channels, int kernel_t, int kernel_f, int stride_f, int out_freq, std::string label);
    int conv1d(int x, int out_channels, int kernel_t, int dilation, std::string label);
    int linear(int x, int out_features, std::string label);
    int gru(int x, int hidden, int groups, std::string label);
    int lstm(int x, int hidden, std::string label);
    int cln(int x, std::string label);
    int prelu(int x, std::string label);
    int sigmoid(int x, std::string label = "sigmoid");
    int tanh(int x, std::string label = "tanh");
    int shuffle(int x, int groups, std::string label = "shuffle");
    int concat(int a, int b, std::string label = "concat");
    int add(int a, int b, std::string label = "add");
    int mul(int a, int b, std::string label = "mul");
    int flatten(int x, std::string label = "flatten");
    int unflatten(int x, Shape shape, std::string label = "unflatten");
    void set_outputs(std::vector<int> outputs);

    std::string tensor_name(int node, const std::string& role) const;
    std::vector<TensorDecl> weight_decls() const;  // role holds the full name

    std::size_t param_count() const;
    std::size_t macs_per_frame() const;

    /// Longest chain of conv taps from any input to `output`, and whether a
    /// recurrent layer sits on any path to it.
    struct PathLookback {
        int frames = 0;
        bool recurrent = false;
    };
    PathLookback lookback(int output) const;

private:
    int push(LayerSpec spec, std::vector<int> inputs);

    std::string name_;
    std::vector<Node> nodes_;
    std::vector<int> outputs_;
    std::size_t input_count_ = 0;
};

/// Evaluation switches used by the receptive-field probe: statistics from
/// the current frame only, and recurrent layers restarted every frame.
struct RunMode {
    bool frame_local_norm = false;
    bool memoryless_recurrence = false;
};

using WeightLookup = std::function<std::span<const float>(const std::string& name)>;

/// Streaming state of one layer.
struct LayerState {
    std::vector<float> history;  // ring of lookback() past input frames
    std::size_t head = 0;
    std::vector<float> hidden;
    std::vector<float> cell;
    Moments stats;
};

/// A component with resolved weights. Immutable; one State per stream.
class BoundComponent {
public:
    BoundComponent(const Component& component, const WeightLookup& lookup);

    struct State {
        std::vector<LayerState> layers;
        std::vector<std::vector<float>> acts;
        std::vector<float> scratch;
        std::size_t steps = 0;
    };

    const Component& component() const { return *component_; }
    State make_state() const;
    void reset(State& state) const;

    /// Frame-by-frame evaluation; read results with output().
    void step(std::span<const std::span<const float>> inputs, State& state, RunMode mode = {}) const;
    std::span<const float> output(const State& state, std::size_t k) const;

    /// Whole-sequence evaluation, layer by layer. inputs[k] holds T frames
    /// row-major; returns one T-frame buffer per component output.
    std::vector<std::vector<float>> run(std::span<const std::vector<float>> inputs, std::size_t frames,
                                        RunMode mode = {}) const;

private:
    void eval(int id, std::span<const float* const> args, std::span<const float* const> taps, LayerState& ls,
              RunMode mode, float* out, std::vector<float>& scratch) const;
    static int tap_lag(const LayerSpec& spec, int k);

    const Component* component_;
    std::vector<LayerWeights> weights_;
};

}  // namespace taylorse::nn
