#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taylorse/graph.hpp"
#include "taylorse/variant.hpp"
#include "taylorse/weights.hpp"

namespace taylorse::model {

inline constexpr int kBins = 161;
inline constexpr int kErbBands = 32;

/// Full model description at expansion order Q for M input channels.
///
/// Component interfaces (per frame):
///   zeroth      TaEr: {2M,161} RI planes -> gain {1,161}, shared feature R {256}
///               TaErLite: {32M} ERB magnitudes -> band gains {32}
///   encoder     TaErLite only: {2M,161} -> R {128}
///   surrogateq  previous term RI {322} + R -> real {161}, imag {161}
///   postfilter  TaErLite only: {32} ERB magnitudes of the estimate -> {1}
struct ModelGraph {
    Variant variant = Variant::taer;
    int order = 0;
    int channels = 1;
    nn::Component zeroth{"zeroth"};
    std::optional<nn::Component> encoder;
    std::vector<nn::Component> surrogates;
    std::optional<nn::Component> post_filter;

    std::vector<const nn::Component*> components() const;
    std::vector<nn::TensorDecl> weight_decls() const;  // role = full tensor name

    std::size_t count_params() const;
    /// Layer MACs plus the fixed per-frame glue: ERB projections, gain
    /// application, order recursion and superimposition.
    std::size_t count_macs_per_frame() const;
    int feature_width() const;  // width of R
};

/// Squeezed temporal conv module on a 256-wide vector: 1x1 squeeze to 64,
/// PReLU/cLN/dilated conv (k=5) gated by a sigmoid branch of the same form,
/// PReLU/cLN/1x1 expand, residual add. Returns the output node.
int stcm(nn::Component& c, int x, int dilation, const std::string& tag);
/// Four S-TCMs with dilations 1, 2, 5, 9.
int stcn(nn::Component& c, int x, const std::string& tag);

ModelGraph build_taer(int order, int channels);
ModelGraph build_taerlite(int order, int channels);
ModelGraph build(Variant variant, int order, int channels);

/// Consecutive input frames that influence one output frame. Recurrent
/// layers count as one past frame plus the current frame.
struct ReceptiveField {
    int zeroth_order = 0;
    int high_order = 0;  // one surrogate, from its inputs; 0 when Q = 0
};

/// From accumulated conv lookback along the longest path.
ReceptiveField receptive_field(const ModelGraph& graph);

struct ProbeResult {
    ReceptiveField field;
    bool causal = true;  // no output frame before a perturbation ever changed
};

/// Measured by perturbing one input frame of each component and locating
/// the last output frame that moves. Normalisation statistics are taken
/// per frame and recurrent layers are restarted every frame while
/// measuring conv taps; recurrence itself is detected separately.
ProbeResult probe_receptive_field(const ModelGraph& graph, const weights::WeightArchive& archive,
                                  std::uint64_t seed = 1);
/// Same probe on one component output.
int probe_component(const nn::Component& component, const weights::WeightArchive& archive, int output_index,
                    std::uint64_t seed, bool* causal = nullptr);

struct RandomInit {
    std::uint64_t seed = 0;
    float scale = 1.0f;  // multiplies the 1/sqrt(fan_in) uniform bound
};

/// Archive holding every tensor of `graph`, uniformly initialised.
/// PReLU slopes start at 0.25; norm gains near 1.
weights::WeightArchive random_weights(const ModelGraph& graph, RandomInit init = {});

std::string describe_text(const ModelGraph& graph);
std::string describe_json(const ModelGraph& graph, int indent = 2);

}  // namespace taylorse::model
