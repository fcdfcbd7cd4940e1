#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "taylorse/dsp.hpp"
#include "taylorse/graph.hpp"
#include "taylorse/model_zoo.hpp"
#include "taylorse/weights.hpp"

namespace taylorse::taylor {

using dsp::ComplexSpectrogram;
using dsp::cplx;

struct OrderTerm {
    int q = 0;
    ComplexSpectrogram term;  // reference channel, T x 161
};

struct TaylorOutput {
    ComplexSpectrogram enhanced;
    std::vector<OrderTerm> orders;                 // q = 0..Q
    std::vector<ComplexSpectrogram> partial_sums;  // sum_{j<=q} orders[j] / j!
    std::vector<double> frame_gains;               // post-filter gain per frame; empty without one

    const ComplexSpectrogram& superimposed() const { return partial_sums.back(); }
};

/// 1/q!, in double.
double inverse_factorial(int q);

/// Builds partial sums from the terms; enhanced = last partial sum.
TaylorOutput assemble(std::vector<ComplexSpectrogram> terms);

/// sum_q terms[q] / q!
ComplexSpectrogram superimpose(std::span<const ComplexSpectrogram> terms);

/// Mean squared RI difference between the final estimates of two outputs:
/// (1/KL) sum |dRe|^2 + (1/KL) sum |dIm|^2.
double remaining_term_mse(const TaylorOutput& lower, const TaylorOutput& higher);
double remaining_term_mse(const ComplexSpectrogram& lower, const ComplexSpectrogram& higher);

/// Per-bin mean over frames of |enhanced - clean|^2.
std::vector<double> approximation_mse(const ComplexSpectrogram& enhanced, const ComplexSpectrogram& clean);

/// Result of one streamed frame.
struct FrameResult {
    std::vector<std::vector<cplx>> orders;  // Q+1 terms
    std::vector<cplx> superimposed;
    std::vector<cplx> enhanced;
    double frame_gain = 1.0;
};

/// Runs the unfolded model over noisy spectra. Immutable after construction,
/// so one engine may serve any number of streams.
class Engine {
public:
    /// Throws ConfigError when the archive does not match the graph.
    Engine(std::shared_ptr<const model::ModelGraph> graph, std::shared_ptr<const weights::WeightArchive> archive);
    Engine(model::ModelGraph graph, weights::WeightArchive archive);

    const model::ModelGraph& graph() const { return *graph_; }
    const weights::WeightArchive& archive() const { return *archive_; }
    int order() const { return graph_->order; }
    int channels() const { return graph_->channels; }

    struct State {
        nn::BoundComponent::State zeroth;
        std::optional<nn::BoundComponent::State> encoder;
        std::vector<nn::BoundComponent::State> surrogates;
        std::optional<nn::BoundComponent::State> post_filter;
        std::size_t frames = 0;
    };
    State make_state() const;
    void reset(State& state) const;

    /// One frame of all channels (channels() spans of 161 bins).
    void step(std::span<const std::span<const cplx>> noisy, State& state, FrameResult& out) const;

    /// Frame-by-frame over a whole spectrogram with a fresh state.
    TaylorOutput forward_streaming(const ComplexSpectrogram& noisy) const;
    /// Layer-major evaluation of the whole sequence, order by order.
    TaylorOutput forward_offline(const ComplexSpectrogram& noisy) const;

private:
    void check_input(const ComplexSpectrogram& noisy) const;

    std::shared_ptr<const model::ModelGraph> graph_;
    std::shared_ptr<const weights::WeightArchive> archive_;
    std::unique_ptr<nn::BoundComponent> zeroth_;
    std::unique_ptr<nn::BoundComponent> encoder_;
    std::vector<std::unique_ptr<nn::BoundComponent>> surrogates_;
    std::unique_ptr<nn::BoundComponent> post_filter_;
};

// Per-order magnitude dumps: 16-byte header ("TAYO", T, F, q as u32 LE)
// followed by T x F float32 magnitudes, row-major.
struct OrderDump {
    std::uint32_t q = 0;
    std::uint32_t frames = 0;
    std::uint32_t bins = 0;
    std::vector<float> magnitudes;
};

void write_order_dump(const std::filesystem::path& path, const OrderDump& dump);
OrderDump read_order_dump(const std::filesystem::path& path);
OrderDump magnitude_dump(const OrderTerm& term);
/// Writes order_<q>.bin for every term into `dir` (created if needed).
void dump_orders(const TaylorOutput& out, const std::filesystem::path& dir);

}  // namespace taylorse::taylor
