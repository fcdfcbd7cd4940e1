#include <doctest.h>

#include <json.hpp>

#include "taylorse/error.hpp"
#include "taylorse/model_zoo.hpp"

using namespace taylorse;

TEST_CASE("TaEr encoder frequency chain") {
    const auto g = model::build_taer(0, 1);
    std::vector<int> chain{161};
    for (const auto& n : g.zeroth.nodes())
        if (n.spec.kind == nn::LayerKind::glu2d) chain.push_back(n.spec.out.freq);
    CHECK(chain == std::vector<int>{161, 80, 39, 19, 9, 4});
    CHECK(g.feature_width() == 256);
    const auto& outs = g.zeroth.outputs();
    CHECK(g.zeroth.shape(outs[0]) == nn::Shape{1, 161});
}

TEST_CASE("parameter counts are exact and increments constant") {
    for (auto v : {Variant::taer, Variant::taerlite}) {
        std::vector<std::size_t> counts;
        for (int q = 0; q <= 4; ++q) counts.push_back(model::build(v, q, 1).count_params());
        const std::size_t inc = counts[1] - counts[0];
        for (int q = 1; q <= 4; ++q) CHECK(counts[static_cast<std::size_t>(q)] - counts[static_cast<std::size_t>(q - 1)] == inc);
        if (v == Variant::taer) {
            CHECK(counts[0] == 2234305);
            CHECK(inc == 1354306);
        } else {
            CHECK(counts[0] == 145697);
            CHECK(inc == 592962);
        }
    }
}

TEST_CASE("surrogate output heads emit two 161-bin planes") {
    for (auto v : {Variant::taer, Variant::taerlite}) {
        const auto g = model::build(v, 2, 1);
        REQUIRE(g.surrogates.size() == 2);
        for (const auto& s : g.surrogates) {
            REQUIRE(s.outputs().size() == 2);
            for (int o : s.outputs()) CHECK(s.shape(o) == nn::Shape{161, 1});
        }
    }
}

TEST_CASE("channel count widens only the input layers") {
    const auto one = model::build_taer(1, 1), seven = model::build_taer(1, 7);
    // first GLU: (64 x 2M x 1 x 3) weights twice
    CHECK(seven.count_params() - one.count_params() == 2 * 64 * 12 * 3);
    const auto lite1 = model::build_taerlite(1, 1), lite7 = model::build_taerlite(1, 7);
    CHECK(lite7.count_params() - lite1.count_params() == 6 * 32 * 128 + 2 * 32 * 12 * 3);
}

TEST_CASE("symbolic receptive fields") {
    const auto taer = model::receptive_field(model::build_taer(1, 1));
    CHECK(taer.zeroth_order == 177);
    CHECK(taer.high_order == 137);
    const auto lite = model::receptive_field(model::build_taerlite(1, 1));
    CHECK(lite.zeroth_order == 2);
    CHECK(lite.high_order == 2);
    CHECK(model::receptive_field(model::build_taer(0, 1)).high_order == 0);
}

TEST_CASE("probe agrees with the symbolic receptive field and sees causality") {
    for (auto v : {Variant::taer, Variant::taerlite})
        for (int m : {1, 2}) {
            const auto g = model::build(v, 1, m);
            const auto w = model::random_weights(g, {static_cast<std::uint64_t>(m), 1.0f});
            const auto p = model::probe_receptive_field(g, w, 3);
            const auto s = model::receptive_field(g);
            CHECK(p.field.zeroth_order == s.zeroth_order);
            CHECK(p.field.high_order == s.high_order);
            CHECK(p.causal);
        }
}

TEST_CASE("probe on the lite encoder and post-filter") {
    const auto g = model::build_taerlite(1, 1);
    const auto w = model::random_weights(g, {5, 1.0f});
    bool causal = false;
    CHECK(model::probe_component(*g.encoder, w, 0, 1, &causal) == 1);
    CHECK(causal);
    CHECK(model::probe_component(*g.post_filter, w, 0, 1, &causal) == 2);
}

TEST_CASE("random archives cover the graph exactly") {
    for (auto v : {Variant::taer, Variant::taerlite}) {
        const auto g = model::build(v, 2, 2);
        const auto a = model::random_weights(g, {1, 1.0f});
        CHECK(a.total_elements() == g.count_params());
        CHECK(weights::validate(a, g).ok());
        CHECK(a.header.variant == v);
        CHECK(a.header.order == 2);
        CHECK(a.header.channels == 2);
        for (const auto& t : a.tensors())
            if (t.name.ends_with("/slope"))
                for (float s : t.data) CHECK(s == 0.25f);
    }
}

TEST_CASE("random weights are reproducible per seed") {
    const auto g = model::build_taerlite(1, 1);
    CHECK(model::random_weights(g, {9, 1.0f}) == model::random_weights(g, {9, 1.0f}));
    CHECK_FALSE(model::random_weights(g, {9, 1.0f}) == model::random_weights(g, {10, 1.0f}));
}

TEST_CASE("MAC totals") {
    const auto lite = model::build_taerlite(3, 1);
    CHECK(lite.count_macs_per_frame() == 2386000);
    std::size_t layers = 0;
    for (const auto* c : lite.components()) layers += c->macs_per_frame();
    CHECK(lite.count_macs_per_frame() - layers == 32 * 161 * 3 + 322 * 2 + 3 * 644);
}

TEST_CASE("describe emits a per-layer table") {
    const auto g = model::build_taerlite(1, 1);
    const auto text = model::describe_text(g);
    CHECK(text.find("surrogate1") != std::string::npos);
    CHECK(text.find("gru_grouped") != std::string::npos);
    const auto j = nlohmann::json::parse(model::describe_json(g));
    CHECK(j["params"].get<std::size_t>() == g.count_params());
    CHECK(j["receptive_field"]["zeroth_order"].get<int>() == 2);
    std::size_t sum = 0;
    for (const auto& comp : j["components"])
        for (const auto& layer : comp["layers"]) {
            sum += layer["params"].get<std::size_t>();
            CHECK(layer.contains("macs_per_frame"));
            CHECK(layer.contains("lookback"));
        }
    CHECK(sum == g.count_params());
}

TEST_CASE("argument validation") {
    CHECK_THROWS_AS(model::build_taer(-1, 1), ConfigError);
    CHECK_THROWS_AS(model::build_taerlite(1, 0), ConfigError);
    CHECK(parse_variant("TaErLite") == Variant::taerlite);
    CHECK_THROWS_AS(parse_variant("gtcrn"), ConfigError);
}
