#include "taylorse/taylor.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "taylorse/erb.hpp"
#include "taylorse/error.hpp"

namespace taylorse::taylor {

namespace {

constexpr std::size_t kF = model::kBins;
constexpr std::size_t kB = model::kErbBands;
constexpr char kDumpMagic[4] = {'T', 'A', 'Y', 'O'};

// RI planes of all channels: [re0, im0, re1, im1, ...], 161 each.
void ri_planes(std::span<const std::span<const cplx>> noisy, float* out) {
    for (std::size_t m = 0; m < noisy.size(); ++m) {
        float* re = out + 2 * m * kF;
        float* im = re + kF;
        for (std::size_t k = 0; k < kF; ++k) {
            re[k] = static_cast<float>(noisy[m][k].real());
            im[k] = static_cast<float>(noisy[m][k].imag());
        }
    }
}

void erb_magnitudes(std::span<const cplx> row, float* out) {
    std::array<float, kF> mag;
    for (std::size_t k = 0; k < kF; ++k) mag[k] = static_cast<float>(std::abs(row[k]));
    erb::default_bank().to_erb(std::span<const float>(mag), std::span<float>(out, kB));
}

void erb_features(std::span<const std::span<const cplx>> noisy, float* out) {
    for (std::size_t m = 0; m < noisy.size(); ++m) erb_magnitudes(noisy[m], out + m * kB);
}

void zeroth_term(Variant variant, const float* gain, std::span<const cplx> ref, cplx* out) {
    std::array<float, kF> g;
    if (variant == Variant::taerlite)
        erb::default_bank().to_linear(std::span<const float>(gain, kB), std::span<float>(g));
    else
        std::memcpy(g.data(), gain, kF * sizeof(float));
    for (std::size_t k = 0; k < kF; ++k) out[k] = static_cast<double>(g[k]) * ref[k];
}

void term_ri(const cplx* term, float* out) {
    for (std::size_t k = 0; k < kF; ++k) {
        out[k] = static_cast<float>(term[k].real());
        out[kF + k] = static_cast<float>(term[k].imag());
    }
}

// H(q) = (q-1) H(q-1) + P_{q-1}
void next_term(int q, const cplx* prev, const float* re, const float* im, cplx* out) {
    const double w = static_cast<double>(q - 1);
    for (std::size_t k = 0; k < kF; ++k)
        out[k] = w * prev[k] + cplx(static_cast<double>(re[k]), static_cast<double>(im[k]));
}

std::vector<float> row_ri(std::span<const std::span<const cplx>> noisy) {
    std::vector<float> v(2 * noisy.size() * kF);
    ri_planes(noisy, v.data());
    return v;
}

std::vector<std::span<const cplx>> frame_rows(const ComplexSpectrogram& s, std::size_t t) {
    std::vector<std::span<const cplx>> rows;
    for (std::size_t m = 0; m < s.channels(); ++m) rows.push_back(s.row(m, t));
    return rows;
}

void put_u32(std::ofstream& os, std::uint32_t v) {
    const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                   static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b.data(), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

double inverse_factorial(int q) {
    if (q < 0) throw ConfigError("negative order");
    double f = 1.0;
    for (int i = 2; i <= q; ++i) f *= i;
    return 1.0 / f;
}

TaylorOutput assemble(std::vector<ComplexSpectrogram> terms) {
    if (terms.empty()) throw ShapeError("no terms to superimpose");
    TaylorOutput out;
    for (std::size_t q = 0; q < terms.size(); ++q) {
        if (!terms[q].same_shape(terms[0])) throw ShapeError("order terms differ in shape");
        ComplexSpectrogram scaled = terms[q];
        scaled *= inverse_factorial(static_cast<int>(q));
        if (q == 0) {
            out.partial_sums.push_back(std::move(scaled));
        } else {
            ComplexSpectrogram sum = out.partial_sums.back();
            sum += scaled;
            out.partial_sums.push_back(std::move(sum));
        }
        out.orders.push_back({static_cast<int>(q), std::move(terms[q])});
    }
    out.enhanced = out.partial_sums.back();
    return out;
}

ComplexSpectrogram superimpose(std::span<const ComplexSpectrogram> terms) {
    return assemble(std::vector<ComplexSpectrogram>(terms.begin(), terms.end())).enhanced;
}

double remaining_term_mse(const ComplexSpectrogram& lower, const ComplexSpectrogram& higher) {
    if (!lower.same_shape(higher)) throw ShapeError("remaining-term MSE needs equally shaped spectra");
    const auto a = lower.data();
    const auto b = higher.data();
    if (a.empty()) return 0.0;
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const cplx d = b[i] - a[i];
        re += d.real() * d.real();
        im += d.imag() * d.imag();
    }
    const double n = static_cast<double>(a.size());
    return re / n + im / n;
}

double remaining_term_mse(const TaylorOutput& lower, const TaylorOutput& higher) {
    return remaining_term_mse(lower.superimposed(), higher.superimposed());
}

std::vector<double> approximation_mse(const ComplexSpectrogram& enhanced, const ComplexSpectrogram& clean) {
    if (!enhanced.same_shape(clean)) throw ShapeError("approximation MSE needs equally shaped spectra");
    std::vector<double> out(enhanced.bins(), 0.0);
    if (enhanced.frames() == 0) return out;
    for (std::size_t c = 0; c < enhanced.channels(); ++c)
        for (std::size_t t = 0; t < enhanced.frames(); ++t)
            for (std::size_t k = 0; k < enhanced.bins(); ++k)
                out[k] += std::norm(enhanced.at(c, t, k) - clean.at(c, t, k));
    const double n = static_cast<double>(enhanced.frames() * enhanced.channels());
    for (auto& v : out) v /= n;
    return out;
}

Engine::Engine(std::shared_ptr<const model::ModelGraph> graph, std::shared_ptr<const weights::WeightArchive> archive)
    : graph_(std::move(graph)), archive_(std::move(archive)) {
    if (!graph_ || !archive_) throw ConfigError("engine needs a graph and an archive");
    const auto& h = archive_->header;
    if (h.variant != graph_->variant)
        throw ConfigError("archive holds a " + std::string(to_string(h.variant)) + " model, graph is " +
                          std::string(to_string(graph_->variant)));
    if (h.order != graph_->order)
        throw ConfigError("archive order Q=" + std::to_string(h.order) + " does not match graph Q=" +
                          std::to_string(graph_->order));
    if (h.channels != graph_->channels)
        throw ConfigError("archive expects " + std::to_string(h.channels) + " channels, graph has " +
                          std::to_string(graph_->channels));
    const auto report = weights::validate(*archive_, *graph_);
    if (!report.ok()) throw ConfigError("archive does not fit the graph: " + report.summary());

    const nn::WeightLookup lookup = [a = archive_](const std::string& n) { return a->lookup(n); };
    zeroth_ = std::make_unique<nn::BoundComponent>(graph_->zeroth, lookup);
    if (graph_->encoder) encoder_ = std::make_unique<nn::BoundComponent>(*graph_->encoder, lookup);
    for (const auto& s : graph_->surrogates) surrogates_.push_back(std::make_unique<nn::BoundComponent>(s, lookup));
    if (graph_->post_filter) post_filter_ = std::make_unique<nn::BoundComponent>(*graph_->post_filter, lookup);
}

Engine::Engine(model::ModelGraph graph, weights::WeightArchive archive)
    : Engine(std::make_shared<const model::ModelGraph>(std::move(graph)),
             std::make_shared<const weights::WeightArchive>(std::move(archive))) {}

Engine::State Engine::make_state() const {
    State s;
    s.zeroth = zeroth_->make_state();
    if (encoder_) s.encoder = encoder_->make_state();
    for (const auto& b : surrogates_) s.surrogates.push_back(b->make_state());
    if (post_filter_) s.post_filter = post_filter_->make_state();
    return s;
}

void Engine::reset(State& s) const {
    zeroth_->reset(s.zeroth);
    if (encoder_) encoder_->reset(*s.encoder);
    for (std::size_t i = 0; i < surrogates_.size(); ++i) surrogates_[i]->reset(s.surrogates[i]);
    if (post_filter_) post_filter_->reset(*s.post_filter);
    s.frames = 0;
}

void Engine::step(std::span<const std::span<const cplx>> noisy, State& state, FrameResult& out) const {
    const auto m = static_cast<std::size_t>(channels());
    if (noisy.size() != m)
        throw ShapeError("frame has " + std::to_string(noisy.size()) + " channels, model expects " +
                         std::to_string(m));
    for (const auto& row : noisy)
        if (row.size() != kF) throw ShapeError("frame rows must hold 161 bins");
    const Variant variant = graph_->variant;
    const int order = graph_->order;

    std::vector<float> zin;
    std::vector<float> ri;
    if (variant == Variant::taer) {
        zin = row_ri(noisy);
    } else {
        zin.resize(m * kB);
        erb_features(noisy, zin.data());
        ri = row_ri(noisy);
    }
    const std::span<const float> zargs[] = {zin};
    zeroth_->step(zargs, state.zeroth);

    out.orders.assign(static_cast<std::size_t>(order) + 1, std::vector<cplx>(kF));
    zeroth_term(variant, zeroth_->output(state.zeroth, 0).data(), noisy[0], out.orders[0].data());

    std::span<const float> feature;
    if (variant == Variant::taer) {
        feature = zeroth_->output(state.zeroth, 1);
    } else {
        const std::span<const float> eargs[] = {ri};
        encoder_->step(eargs, *state.encoder);
        feature = encoder_->output(*state.encoder, 0);
    }

    std::vector<float> prev(2 * kF);
    for (int q = 1; q <= order; ++q) {
        const auto i = static_cast<std::size_t>(q - 1);
        term_ri(out.orders[i].data(), prev.data());
        const std::span<const float> sargs[] = {prev, feature};
        surrogates_[i]->step(sargs, state.surrogates[i]);
        next_term(q, out.orders[i].data(), surrogates_[i]->output(state.surrogates[i], 0).data(),
                  surrogates_[i]->output(state.surrogates[i], 1).data(), out.orders[i + 1].data());
    }

    out.superimposed.assign(kF, cplx{});
    for (int q = 0; q <= order; ++q) {
        const double w = inverse_factorial(q);
        const auto& h = out.orders[static_cast<std::size_t>(q)];
        for (std::size_t k = 0; k < kF; ++k) out.superimposed[k] += h[k] * w;
    }
    out.frame_gain = 1.0;
    if (post_filter_) {
        std::vector<float> pin(kB);
        erb_magnitudes(out.superimposed, pin.data());
        const std::span<const float> pargs[] = {pin};
        post_filter_->step(pargs, *state.post_filter);
        out.frame_gain = static_cast<double>(post_filter_->output(*state.post_filter, 0)[0]);
        out.enhanced.resize(kF);
        for (std::size_t k = 0; k < kF; ++k) out.enhanced[k] = out.frame_gain * out.superimposed[k];
    } else {
        out.enhanced = out.superimposed;
    }
    ++state.frames;
}

void Engine::check_input(const ComplexSpectrogram& noisy) const {
    if (noisy.channels() != static_cast<std::size_t>(channels()))
        throw ShapeError("spectrogram has " + std::to_string(noisy.channels()) + " channels, model expects " +
                         std::to_string(channels()));
    if (noisy.bins() != kF) throw ShapeError("spectrogram must hold 161 bins, got " + std::to_string(noisy.bins()));
}

TaylorOutput Engine::forward_streaming(const ComplexSpectrogram& noisy) const {
    check_input(noisy);
    const std::size_t frames = noisy.frames();
    const auto terms_n = static_cast<std::size_t>(order()) + 1;
    std::vector<ComplexSpectrogram> terms(terms_n, ComplexSpectrogram(frames, kF));
    ComplexSpectrogram enhanced(frames, kF);
    std::vector<double> gains;
    State state = make_state();
    FrameResult r;
    for (std::size_t t = 0; t < frames; ++t) {
        const auto rows = frame_rows(noisy, t);
        step(rows, state, r);
        for (std::size_t q = 0; q < terms_n; ++q) std::copy(r.orders[q].begin(), r.orders[q].end(), terms[q].row(0, t).begin());
        std::copy(r.enhanced.begin(), r.enhanced.end(), enhanced.row(0, t).begin());
        if (post_filter_) gains.push_back(r.frame_gain);
    }
    TaylorOutput out = assemble(std::move(terms));
    out.enhanced = std::move(enhanced);
    out.frame_gains = std::move(gains);
    return out;
}

TaylorOutput Engine::forward_offline(const ComplexSpectrogram& noisy) const {
    check_input(noisy);
    const std::size_t frames = noisy.frames();
    const Variant variant = graph_->variant;
    const auto m = static_cast<std::size_t>(channels());

    std::vector<float> ri(frames * 2 * m * kF);
    for (std::size_t t = 0; t < frames; ++t) ri_planes(frame_rows(noisy, t), ri.data() + t * 2 * m * kF);

    std::vector<std::vector<float>> zin;
    if (variant == Variant::taer) {
        zin.push_back(ri);
    } else {
        std::vector<float> e(frames * m * kB);
        for (std::size_t t = 0; t < frames; ++t) erb_features(frame_rows(noisy, t), e.data() + t * m * kB);
        zin.push_back(std::move(e));
    }
    auto zout = zeroth_->run(zin, frames);
    zin.clear();

    const std::size_t gain_width = variant == Variant::taer ? kF : kB;
    std::vector<ComplexSpectrogram> terms;
    terms.emplace_back(frames, kF);
    for (std::size_t t = 0; t < frames; ++t)
        zeroth_term(variant, zout[0].data() + t * gain_width, noisy.row(0, t), terms[0].row(0, t).data());

    std::vector<float> feature;
    if (variant == Variant::taer) {
        feature = std::move(zout[1]);
    } else {
        const std::vector<float> eargs[] = {std::move(ri)};
        feature = std::move(encoder_->run(eargs, frames)[0]);
    }
    zout.clear();

    for (int q = 1; q <= order(); ++q) {
        const auto i = static_cast<std::size_t>(q - 1);
        std::vector<std::vector<float>> sargs(2);
        sargs[0].resize(frames * 2 * kF);
        for (std::size_t t = 0; t < frames; ++t) term_ri(terms[i].row(0, t).data(), sargs[0].data() + t * 2 * kF);
        sargs[1] = feature;
        const auto p = surrogates_[i]->run(sargs, frames);
        terms.emplace_back(frames, kF);
        for (std::size_t t = 0; t < frames; ++t)
            next_term(q, terms[i].row(0, t).data(), p[0].data() + t * kF, p[1].data() + t * kF,
                      terms[i + 1].row(0, t).data());
    }

    TaylorOutput out = assemble(std::move(terms));
    if (post_filter_) {
        std::vector<std::vector<float>> pin(1, std::vector<float>(frames * kB));
        const auto& s = out.superimposed();
        for (std::size_t t = 0; t < frames; ++t) erb_magnitudes(s.row(0, t), pin[0].data() + t * kB);
        const auto g = post_filter_->run(pin, frames);
        out.frame_gains.resize(frames);
        for (std::size_t t = 0; t < frames; ++t) {
            const double gain = static_cast<double>(g[0][t]);
            out.frame_gains[t] = gain;
            auto dst = out.enhanced.row(0, t);
            const auto src = s.row(0, t);
            for (std::size_t k = 0; k < kF; ++k) dst[k] = gain * src[k];
        }
    }
    return out;
}

OrderDump magnitude_dump(const OrderTerm& term) {
    OrderDump d;
    d.q = static_cast<std::uint32_t>(term.q);
    d.frames = static_cast<std::uint32_t>(term.term.frames());
    d.bins = static_cast<std::uint32_t>(term.term.bins());
    d.magnitudes.reserve(term.term.frames() * term.term.bins());
    for (std::size_t t = 0; t < term.term.frames(); ++t)
        for (const auto& v : term.term.row(0, t)) d.magnitudes.push_back(static_cast<float>(std::abs(v)));
    return d;
}

void write_order_dump(const std::filesystem::path& path, const OrderDump& dump) {
    if (dump.magnitudes.size() != static_cast<std::size_t>(dump.frames) * dump.bins)
        throw ShapeError("order dump payload does not match T x F");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    os.write(kDumpMagic, 4);
    put_u32(os, dump.frames);
    put_u32(os, dump.bins);
    put_u32(os, dump.q);
    for (float v : dump.magnitudes) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(os, bits);
    }
    if (!os) throw Error("failed writing " + path.string());
}

OrderDump read_order_dump(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot read " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kDumpMagic, 4) != 0)
        throw FormatError(path.string() + ": not an order dump");
    OrderDump d;
    d.frames = get_u32(bytes.data() + 4);
    d.bins = get_u32(bytes.data() + 8);
    d.q = get_u32(bytes.data() + 12);
    const std::size_t n = static_cast<std::size_t>(d.frames) * d.bins;
    if (bytes.size() != 16 + 4 * n) throw FormatError(path.string() + ": truncated order dump");
    d.magnitudes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = get_u32(bytes.data() + 16 + 4 * i);
        std::memcpy(&d.magnitudes[i], &bits, 4);
    }
    return d;
}

void dump_orders(const TaylorOutput& out, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& term : out.orders)
        write_order_dump(dir / ("order_" + std::to_string(term.q) + ".bin"), magnitude_dump(term));
}

}  // namespace taylorse::taylor
