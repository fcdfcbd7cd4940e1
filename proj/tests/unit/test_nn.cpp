#include <doctest.h>

#include <cmath>
#include <map>

#include "support.hpp"
#include "taylorse/error.hpp"
#include "taylorse/graph.hpp"
#include "taylorse/nn.hpp"

using namespace taylorse;
using nn::LayerKind;
using nn::LayerSpec;

namespace {

LayerSpec conv_spec(LayerKind kind, int cin, int fin, int cout, int kt, int kf, int sf, int fout) {
    LayerSpec s;
    s.kind = kind;
    s.label = "t";
    s.in = {cin, fin};
    s.out = {cout, fout};
    s.kernel_t = kt;
    s.kernel_f = kf;
    s.stride_f = sf;
    if (kind == LayerKind::deconv2d || kind == LayerKind::deglu2d) s.output_padding = fout - nn::deconv_out_freq(fin, kf, sf);
    return s;
}

struct Owned {
    std::vector<std::vector<float>> data;
    nn::LayerWeights w;
};

Owned random_weights(const LayerSpec& s, std::uint64_t seed, float scale = 0.5f) {
    Owned o;
    std::vector<std::span<const float>> spans;
    for (const auto& d : s.tensors()) o.data.push_back(support::uniform(d.elements(), seed++, -scale, scale));
    for (const auto& v : o.data) spans.emplace_back(v);
    o.w = nn::prepare_weights(s, spans);
    return o;
}

float sig(double x) { return static_cast<float>(1.0 / (1.0 + std::exp(-x))); }

}  // namespace

TEST_CASE("strided frequency sizes follow the downsampling chain") {
    int f = 161;
    std::vector<int> chain{f};
    for (int i = 0; i < 5; ++i) chain.push_back(f = nn::conv_out_freq(f, 3, 2));
    CHECK(chain == std::vector<int>{161, 80, 39, 19, 9, 4});
    CHECK(nn::deconv_out_freq(4, 3, 2) == 9);
    CHECK(nn::deconv_out_freq(9, 3, 2) == 19);
    CHECK(nn::deconv_out_freq(39, 3, 2, 1) == 80);
}

TEST_CASE("conv2d matches a direct causal convolution") {
    const auto s = conv_spec(LayerKind::conv2d, 3, 17, 4, 2, 3, 2, 8);
    auto w = random_weights(s, 1);
    const auto cur = support::uniform(3 * 17, 10), past = support::uniform(3 * 17, 11);
    const float* taps[] = {past.data(), cur.data()};  // tap 0 is lag 1
    std::vector<float> y(4 * 8), scratch;
    nn::conv2d_frame(s, w.w.tensors[0], w.w.tensors[1], taps, y, scratch);
    for (int co = 0; co < 4; ++co)
        for (int o = 0; o < 8; ++o) {
            double acc = w.data[1][static_cast<std::size_t>(co)];
            for (int ci = 0; ci < 3; ++ci)
                for (int k = 0; k < 2; ++k)
                    for (int j = 0; j < 3; ++j) {
                        const int f = o * 2 + j;
                        if (f >= 17) continue;
                        const auto& src = k == 0 ? past : cur;
                        acc += double(w.data[0][static_cast<std::size_t>(((co * 3 + ci) * 2 + k) * 3 + j)]) *
                               src[static_cast<std::size_t>(ci * 17 + f)];
                    }
            CHECK(y[static_cast<std::size_t>(co * 8 + o)] == doctest::Approx(acc).epsilon(1e-5));
        }
}

TEST_CASE("transposed conv matches a direct scatter") {
    const auto s = conv_spec(LayerKind::deconv2d, 3, 9, 2, 2, 3, 2, 19);
    auto w = random_weights(s, 2);
    const auto cur = support::uniform(3 * 9, 20), past = support::uniform(3 * 9, 21);
    const float* taps[] = {cur.data(), past.data()};  // tap k is lag k
    std::vector<float> y(2 * 19), scratch;
    nn::deconv2d_frame(s, w.w.prepared, w.w.tensors[1], taps, y, scratch);
    std::vector<double> ref(2 * 19);
    for (int co = 0; co < 2; ++co)
        for (int f = 0; f < 19; ++f) ref[static_cast<std::size_t>(co * 19 + f)] = w.data[1][static_cast<std::size_t>(co)];
    for (int ci = 0; ci < 3; ++ci)
        for (int co = 0; co < 2; ++co)
            for (int k = 0; k < 2; ++k)
                for (int j = 0; j < 3; ++j)
                    for (int i = 0; i < 9; ++i) {
                        const int f = i * 2 + j;
                        if (f >= 19) continue;
                        const auto& src = k == 0 ? cur : past;
                        ref[static_cast<std::size_t>(co * 19 + f)] +=
                            double(w.data[0][static_cast<std::size_t>(((ci * 2 + co) * 2 + k) * 3 + j)]) *
                            src[static_cast<std::size_t>(ci * 9 + i)];
                    }
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-5));
}

TEST_CASE("GLU with zero weights outputs zero") {
    const auto s = conv_spec(LayerKind::glu2d, 2, 161, 64, 1, 3, 2, 80);
    Owned o;
    for (const auto& d : s.tensors()) o.data.emplace_back(d.elements(), 0.0f);
    o.w = nn::prepare_weights(s, {o.data.begin(), o.data.end()});
    const auto x = support::uniform(2 * 161, 3);
    const float* taps[] = {x.data()};
    std::vector<float> y(64 * 80, 1.0f), scratch;
    nn::glu_frame(s, o.w, taps, y, scratch);
    for (float v : y) CHECK(v == 0.0f);
}

TEST_CASE("GLU with a delta kernel and saturated gate passes its input") {
    const int c = 3, f = 20;
    const auto s = conv_spec(LayerKind::glu2d, c, f, c, 1, 3, 1, f - 2);
    Owned o;
    for (const auto& d : s.tensors()) o.data.emplace_back(d.elements(), 0.0f);
    for (int i = 0; i < c; ++i) o.data[0][static_cast<std::size_t>((i * c + i) * 3 + 1)] = 1.0f;  // centre tap
    for (auto& b : o.data[3]) b = 20.0f;                                                         // gate bias
    o.w = nn::prepare_weights(s, {o.data.begin(), o.data.end()});
    const auto x = support::uniform(c * f, 4);
    const float* taps[] = {x.data()};
    std::vector<float> y(static_cast<std::size_t>(c * (f - 2))), scratch;
    nn::glu_frame(s, o.w, taps, y, scratch);
    for (int ch = 0; ch < c; ++ch)
        for (int k = 0; k < f - 2; ++k)
            CHECK(std::abs(y[static_cast<std::size_t>(ch * (f - 2) + k)] - x[static_cast<std::size_t>(ch * f + k + 1)]) <= 1e-6);
}

TEST_CASE("cumulative layer norm") {
    nn::Component comp("c");
    const int x = comp.input({4, 10});
    comp.set_outputs({comp.cln(x, "n")});
    std::map<std::string, std::vector<float>> w{{"c/1/gain", std::vector<float>(4, 1.0f)},
                                                {"c/1/bias", std::vector<float>(4, 0.0f)}};
    const nn::BoundComponent b(comp, [&](const std::string& n) { return std::span<const float>(w.at(n)); });

    SUBCASE("constant input normalises to zero") {
        auto st = b.make_state();
        std::vector<float> in(40, 3.5f);
        for (int t = 0; t < 5; ++t) {
            const std::span<const float> args[] = {in};
            b.step(args, st);
            for (float v : b.output(st, 0)) CHECK(std::abs(v) <= 1e-6);
        }
    }
    SUBCASE("zero input stays zero") {
        auto st = b.make_state();
        std::vector<float> in(40, 0.0f);
        const std::span<const float> args[] = {in};
        b.step(args, st);
        for (float v : b.output(st, 0)) CHECK(v == 0.0f);
    }
    SUBCASE("statistics equal a brute-force cumulative oracle") {
        w["c/1/gain"] = support::uniform(4, 5, 0.5f, 1.5f);
        w["c/1/bias"] = support::uniform(4, 6);
        const nn::BoundComponent bb(comp, [&](const std::string& n) { return std::span<const float>(w.at(n)); });
        auto st = bb.make_state();
        std::vector<std::vector<float>> seen;
        for (int t = 0; t < 8; ++t) {
            seen.push_back(support::uniform(40, 100 + static_cast<std::uint64_t>(t), -2.0f + t, 3.0f + t));
            const std::span<const float> args[] = {seen.back()};
            bb.step(args, st);
            double mean = 0.0, n = 0.0;
            for (const auto& fr : seen)
                for (float v : fr) mean += v, n += 1.0;
            mean /= n;
            double var = 0.0;
            for (const auto& fr : seen)
                for (float v : fr) var += (v - mean) * (v - mean);
            var /= n;
            const auto y = bb.output(st, 0);
            for (int ch = 0; ch < 4; ++ch)
                for (int k = 0; k < 10; ++k) {
                    const auto i = static_cast<std::size_t>(ch * 10 + k);
                    const double ref = (seen.back()[i] - mean) / std::sqrt(var + nn::kClnEps) *
                                           w["c/1/gain"][static_cast<std::size_t>(ch)] +
                                       w["c/1/bias"][static_cast<std::size_t>(ch)];
                    CHECK(std::abs(y[i] - ref) <= 1e-5);
                }
        }
    }
}

TEST_CASE("PReLU") {
    LayerSpec s;
    s.kind = LayerKind::prelu;
    s.in = s.out = {2, 3};
    const std::vector<float> slope{0.25f, 0.5f};
    const std::vector<float> x{1.0f, -2.0f, 0.0f, -4.0f, 3.0f, -0.5f};
    std::vector<float> y(6);
    nn::prelu_frame(s, slope, x, y);
    CHECK(y == std::vector<float>{1.0f, -0.5f, 0.0f, -2.0f, 3.0f, -0.25f});
}

TEST_CASE("channel shuffle interleaves groups") {
    const std::vector<float> x{0, 1, 2, 3, 10, 11, 12, 13};
    std::vector<float> y(8);
    nn::shuffle_frame(2, x, y);
    CHECK(y == std::vector<float>{0, 10, 1, 11, 2, 12, 3, 13});
}

namespace {

// Plain GRU, gate order (r, z, n), one bias per gate.
std::vector<float> gru_oracle(const std::vector<float>& wih, const std::vector<float>& whh, const std::vector<float>& b,
                              const std::vector<float>& x, const std::vector<float>& h, int hid) {
    const int in = static_cast<int>(x.size());
    auto dot = [](const float* w, const std::vector<float>& v) {
        double a = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) a += double(w[i]) * v[i];
        return a;
    };
    std::vector<float> out(static_cast<std::size_t>(hid));
    for (int i = 0; i < hid; ++i) {
        const double r = sig(dot(&wih[static_cast<std::size_t>(i * in)], x) + dot(&whh[static_cast<std::size_t>(i * hid)], h) + b[static_cast<std::size_t>(i)]);
        const double z = sig(dot(&wih[static_cast<std::size_t>((hid + i) * in)], x) + dot(&whh[static_cast<std::size_t>((hid + i) * hid)], h) + b[static_cast<std::size_t>(hid + i)]);
        const double n = std::tanh(dot(&wih[static_cast<std::size_t>((2 * hid + i) * in)], x) + b[static_cast<std::size_t>(2 * hid + i)] +
                                   r * dot(&whh[static_cast<std::size_t>((2 * hid + i) * hid)], h));
        out[static_cast<std::size_t>(i)] = static_cast<float>((1.0 - z) * n + z * h[static_cast<std::size_t>(i)]);
    }
    return out;
}

LayerSpec gru_spec(int in, int hid, int groups) {
    LayerSpec s;
    s.kind = LayerKind::gru_grouped;
    s.in = {in, 1};
    s.out = {hid, 1};
    s.hidden = hid;
    s.groups = groups;
    return s;
}

}  // namespace

TEST_CASE("ungrouped GRU equals a plain GRU cell") {
    const auto s = gru_spec(6, 5, 1);
    auto w = random_weights(s, 7);
    auto h = support::uniform(5, 8);
    const auto x = support::uniform(6, 9);
    const auto ref = gru_oracle(w.data[0], w.data[1], w.data[2], x, h, 5);
    std::vector<float> scratch;
    nn::gru_grouped_frame(s, w.w, x, h, scratch);
    for (std::size_t i = 0; i < 5; ++i) CHECK(h[i] == doctest::Approx(ref[i]).epsilon(1e-5));
}

TEST_CASE("GRU with zero weights halves the state") {
    const auto s = gru_spec(4, 6, 2);
    Owned o;
    for (const auto& d : s.tensors()) o.data.emplace_back(d.elements(), 0.0f);
    o.w = nn::prepare_weights(s, {o.data.begin(), o.data.end()});
    auto h = support::uniform(6, 1);
    const auto h0 = h;
    std::vector<float> scratch;
    nn::gru_grouped_frame(s, o.w, support::uniform(4, 2), h, scratch);
    for (std::size_t i = 0; i < 6; ++i) CHECK(h[i] == 0.5f * h0[i]);
}

TEST_CASE("grouped GRU equals a block-diagonal dense GRU") {
    const int in = 8, hid = 6, g = 2, ig = in / g, hg = hid / g;
    const auto sg = gru_spec(in, hid, g);
    auto wg = random_weights(sg, 30);
    // dense weights: gate rows ordered (r, z, n) over the full hidden size
    std::vector<float> wih(static_cast<std::size_t>(3 * hid * in), 0.0f), whh(static_cast<std::size_t>(3 * hid * hid), 0.0f),
        b(static_cast<std::size_t>(3 * hid));
    for (int grp = 0; grp < g; ++grp)
        for (int gate = 0; gate < 3; ++gate)
            for (int i = 0; i < hg; ++i) {
                const int row = gate * hid + grp * hg + i;
                const int grow = gate * hg + i;
                for (int j = 0; j < ig; ++j)
                    wih[static_cast<std::size_t>(row * in + grp * ig + j)] = wg.data[0][static_cast<std::size_t>((grp * 3 * hg + grow) * ig + j)];
                for (int j = 0; j < hg; ++j)
                    whh[static_cast<std::size_t>(row * hid + grp * hg + j)] = wg.data[1][static_cast<std::size_t>((grp * 3 * hg + grow) * hg + j)];
                b[static_cast<std::size_t>(row)] = wg.data[2][static_cast<std::size_t>(grp * 3 * hg + grow)];
            }
    const auto sd = gru_spec(in, hid, 1);
    const std::vector<std::span<const float>> dense{wih, whh, b};
    const auto wd = nn::prepare_weights(sd, dense);
    auto h1 = support::uniform(hid, 31);
    auto h2 = h1;
    std::vector<float> scratch;
    for (int t = 0; t < 4; ++t) {
        const auto x = support::uniform(in, 40 + static_cast<std::uint64_t>(t));
        nn::gru_grouped_frame(sg, wg.w, x, h1, scratch);
        nn::gru_grouped_frame(sd, wd, x, h2, scratch);
    }
    CHECK(support::max_abs_diff(h1, h2) <= 1e-6);
}

TEST_CASE("LSTM matches a direct cell, gate order i f g o") {
    LayerSpec s;
    s.kind = LayerKind::lstm;
    s.in = {5, 1};
    s.out = {4, 1};
    s.hidden = 4;
    auto w = random_weights(s, 50);
    auto h = support::uniform(4, 51), c = support::uniform(4, 52);
    const auto x = support::uniform(5, 53);
    std::vector<double> pre(16);
    for (int r = 0; r < 16; ++r) {
        double a = w.data[2][static_cast<std::size_t>(r)];
        for (int j = 0; j < 5; ++j) a += double(w.data[0][static_cast<std::size_t>(r * 5 + j)]) * x[static_cast<std::size_t>(j)];
        for (int j = 0; j < 4; ++j) a += double(w.data[1][static_cast<std::size_t>(r * 4 + j)]) * h[static_cast<std::size_t>(j)];
        pre[static_cast<std::size_t>(r)] = a;
    }
    std::vector<double> hr(4), cr(4);
    for (std::size_t j = 0; j < 4; ++j) {
        cr[j] = sig(pre[4 + j]) * c[j] + sig(pre[j]) * std::tanh(pre[8 + j]);
        hr[j] = sig(pre[12 + j]) * std::tanh(cr[j]);
    }
    std::vector<float> scratch;
    nn::lstm_frame(s, w.w, x, h, c, scratch);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(h[j] == doctest::Approx(hr[j]).epsilon(1e-5));
        CHECK(c[j] == doctest::Approx(cr[j]).epsilon(1e-5));
    }
}

TEST_CASE("closed-form parameter and MAC counts") {
    LayerSpec lin;
    lin.kind = LayerKind::linear;
    lin.in = {256, 1};
    lin.out = {161, 1};
    CHECK(nn::count_params(lin) == 41377);

    CHECK(nn::count_params(gru_spec(128, 128, 1)) == 98688);

    LayerSpec c1;
    c1.kind = LayerKind::conv1d;
    c1.in = c1.out = {64, 1};
    c1.kernel_t = 5;
    c1.dilation = 2;
    CHECK(nn::count_macs_per_frame(c1) == 20480);
    CHECK(c1.lookback() == 8);

    LayerSpec cln;
    cln.kind = LayerKind::cln;
    cln.in = cln.out = {64, 80};
    CHECK(nn::count_params(cln) == 128);
    CHECK(nn::count_macs_per_frame(cln) == 2 * 64 * 80);

    const auto g = gru_spec(128, 128, 2);
    CHECK(nn::count_params(g) == 2 * 3 * (64 * 64 + 64 * 64 + 64));
}

TEST_CASE("invalid specs are rejected") {
    CHECK_THROWS_AS(gru_spec(128, 128, 3).validate(), ConfigError);
    auto s = conv_spec(LayerKind::conv2d, 2, 161, 4, 1, 3, 2, 81);
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.out.freq = 80;
    s.kernel_t = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    LayerSpec unshaped;
    unshaped.kind = LayerKind::linear;
    CHECK_THROWS_AS(nn::count_params(unshaped), ConfigError);
}

TEST_CASE("weight tensors of the wrong size are rejected") {
    const auto s = gru_spec(4, 4, 1);
    std::vector<float> small(3);
    CHECK_THROWS_AS(nn::prepare_weights(s, {small, small, small}), ShapeError);
}
