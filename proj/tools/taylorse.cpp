#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>

#include <CLI11.hpp>

#include "taylorse/error.hpp"
#include "taylorse/evalkit.hpp"
#include "taylorse/model_zoo.hpp"
#include "taylorse/runtime.hpp"
#include "taylorse/wav.hpp"
#include "taylorse/weights.hpp"

using namespace taylorse;

namespace {

struct ModelArgs {
    std::string variant = "taerlite";
    int order = 3;
    int channels = 1;
};

void add_model_args(CLI::App* app, ModelArgs& m) {
    app->add_option("--variant", m.variant, "taer or taerlite")->capture_default_str();
    app->add_option("--order,-q", m.order, "expansion order Q")->capture_default_str();
    app->add_option("--channels,-m", m.channels, "input channels M")->capture_default_str();
}

model::ModelGraph build(const ModelArgs& m) { return model::build(parse_variant(m.variant), m.order, m.channels); }

std::vector<double> mono(const wav::Audio& a, const std::string& what) {
    if (a.channels() != 1) throw ShapeError(what + " must be mono");
    return a.samples.front();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming Taylor-unfolding speech enhancement"};
    app.require_subcommand(1);

    // enhance
    auto* enhance = app.add_subcommand("enhance", "enhance a 16 kHz WAV file frame by frame");
    std::string model_path, input, output, dump_dir, report;
    std::size_t chunk = 160;
    enhance->add_option("--model", model_path, "weight archive")->required();
    enhance->add_option("--input", input, "noisy WAV")->required();
    enhance->add_option("--output", output, "enhanced mono WAV")->required();
    enhance->add_option("--dump-orders", dump_dir, "write order_<q>.bin magnitude dumps here");
    enhance->add_option("--report", report, "append a timing row to this CSV");
    enhance->add_option("--chunk", chunk, "samples per streaming call")->capture_default_str();

    // bench-rtf
    auto* bench = app.add_subcommand("bench-rtf", "real-time factor over repeated runs");
    ModelArgs bench_model;
    double seconds = 10.0;
    int runs = 5;
    std::uint64_t seed = 1;
    bench->add_option("--model", model_path, "weight archive (random weights when omitted)");
    add_model_args(bench, bench_model);
    bench->add_option("--seconds", seconds, "synthetic audio length")->capture_default_str();
    bench->add_option("--runs", runs, "repetitions")->capture_default_str();
    bench->add_option("--seed", seed)->capture_default_str();

    // probe
    auto* probe = app.add_subcommand("probe", "receptive field, symbolic and measured");
    ModelArgs probe_model;
    probe_model.order = 1;
    add_model_args(probe, probe_model);
    probe->add_option("--seed", seed)->capture_default_str();

    // count
    auto* count = app.add_subcommand("count", "parameters and MACs");
    ModelArgs count_model;
    bool json = false;
    add_model_args(count, count_model);
    count->add_flag("--json", json);

    // describe
    auto* describe = app.add_subcommand("describe", "per-layer table");
    ModelArgs describe_model;
    add_model_args(describe, describe_model);
    describe->add_flag("--json", json);

    // init
    auto* init = app.add_subcommand("init", "write an archive of random weights");
    ModelArgs init_model;
    float scale = 1.0f;
    add_model_args(init, init_model);
    init->add_option("--seed", seed)->capture_default_str();
    init->add_option("--scale", scale, "multiplier on the uniform init bound")->capture_default_str();
    init->add_option("--output", output, "archive path")->required();

    // validate
    auto* validate = app.add_subcommand("validate", "check an archive against its graph");
    validate->add_option("--model", model_path)->required();

    // mix
    auto* mixc = app.add_subcommand("mix", "mix clean speech and noise at a target SNR");
    std::string clean_path, noise_path, noisy_path, enhanced_path, name;
    double snr_db = 0.0;
    bool ortho = false;
    mixc->add_option("--clean", clean_path)->required();
    mixc->add_option("--noise", noise_path, "noise WAV (white noise when omitted)");
    mixc->add_option("--snr", snr_db, "target SNR in dB")->required();
    mixc->add_option("--output", output)->required();
    mixc->add_option("--seed", seed)->capture_default_str();
    mixc->add_flag("--orthogonalize", ortho, "remove the noise component correlated with the clean signal");

    // score
    auto* scorec = app.add_subcommand("score", "SNR / SI-SNR of noisy and enhanced against clean");
    scorec->add_option("--clean", clean_path)->required();
    scorec->add_option("--noisy", noisy_path)->required();
    scorec->add_option("--enhanced", enhanced_path)->required();
    scorec->add_option("--name", name, "utterance label (defaults to the noisy file name)");
    scorec->add_option("--report", report, "append to this CSV");

    // synth
    auto* synth = app.add_subcommand("synth", "write a harmonic test signal (amplitude-modulated tone complex)");
    double synth_seconds = 2.0, f0 = 150.0;
    synth->add_option("--seconds", synth_seconds)->capture_default_str();
    synth->add_option("--f0", f0, "fundamental in Hz")->capture_default_str();
    synth->add_option("--output", output)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (enhance->parsed()) {
            runtime::EnhanceOptions opt;
            if (!dump_dir.empty()) opt.dump_orders = dump_dir;
            if (!report.empty()) opt.report = report;
            opt.chunk = chunk;
            const auto r = runtime::enhance_file(model_path, input, output, opt);
            std::printf("%zu frames, %.2f s audio, %.3f s wall, RTF %.4f\n", r.frames, r.audio_seconds,
                        r.wall_seconds, r.rtf);
        } else if (bench->parsed()) {
            std::shared_ptr<const taylor::Engine> engine;
            if (!model_path.empty()) {
                engine = runtime::load_engine(model_path);
            } else {
                auto g = build(bench_model);
                auto w = model::random_weights(g, {seed, 1.0f});
                engine = std::make_shared<const taylor::Engine>(std::move(g), std::move(w));
            }
            const auto r = runtime::bench_rtf(engine, seconds, runs, seed);
            std::printf("%s Q=%d M=%d, %.1f s of audio per run\n", std::string(to_string(engine->graph().variant)).c_str(),
                        engine->order(), engine->channels(), r.audio_seconds);
            for (std::size_t i = 0; i < r.runs.size(); ++i) std::printf("run %zu: RTF %.4f\n", i + 1, r.runs[i]);
            std::printf("mean RTF %.4f\n", r.mean);
        } else if (probe->parsed()) {
            const auto g = build(probe_model);
            const auto symbolic = model::receptive_field(g);
            const auto t0 = std::chrono::steady_clock::now();
            const auto measured = model::probe_receptive_field(g, model::random_weights(g, {seed, 1.0f}), seed);
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::printf("zeroth-order path: %d frames (symbolic %d)\n", measured.field.zeroth_order,
                        symbolic.zeroth_order);
            if (g.order > 0)
                std::printf("high-order path:   %d frames (symbolic %d)\n", measured.field.high_order,
                            symbolic.high_order);
            std::printf("causal: %s, probe time %.2f s\n", measured.causal ? "yes" : "NO", dt);
        } else if (count->parsed()) {
            const auto g = build(count_model);
            if (json) {
                std::cout << model::describe_json(g, -1) << "\n";
            } else {
                std::printf("params %zu\n", g.count_params());
                for (const auto* c : g.components())
                    std::printf("  %-12s %zu\n", c->name().c_str(), c->param_count());
                const auto macs = g.count_macs_per_frame();
                std::printf("MACs/frame %zu (%.4f G/s at 100 frames/s)\n", macs, static_cast<double>(macs) * 100.0 / 1e9);
            }
        } else if (describe->parsed()) {
            const auto g = build(describe_model);
            std::cout << (json ? model::describe_json(g) + "\n" : model::describe_text(g));
        } else if (init->parsed()) {
            const auto g = build(init_model);
            weights::save(model::random_weights(g, {seed, scale}), output);
            std::printf("wrote %s (%zu params)\n", output.c_str(), g.count_params());
        } else if (validate->parsed()) {
            const auto a = weights::load(model_path);
            const auto g = model::build(a.header.variant, a.header.order, a.header.channels);
            const auto r = weights::validate(a, g);
            std::printf("%s\n", r.ok() ? "ok" : r.summary().c_str());
            return r.ok() ? 0 : 1;
        } else if (mixc->parsed()) {
            const auto clean_audio = wav::read_at_rate(clean_path, 16000);
            const auto clean = mono(clean_audio, "clean input");
            std::vector<double> noise;
            if (noise_path.empty()) {
                noise = eval::white_noise(clean.size(), seed);
            } else {
                noise = eval::fit_length(mono(wav::read_at_rate(noise_path, 16000), "noise input"), clean.size());
            }
            if (ortho) noise = eval::orthogonalize(noise, clean);
            wav::Audio out;
            out.sample_rate = 16000;
            out.format = clean_audio.format;
            out.samples.push_back(eval::mix(clean, noise, snr_db));
            std::printf("SI-SNR in %.2f dB\n", eval::si_snr(out.samples.front(), clean));
            wav::write(output, out);
        } else if (synth->parsed()) {
            wav::Audio out;
            auto& x = out.samples.emplace_back(static_cast<std::size_t>(synth_seconds * 16000.0));
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double t = static_cast<double>(i) / 16000.0;
                const double env = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * 3.0 * t);
                for (int h = 1; f0 * h < 4000.0; ++h) x[i] += env * 0.2 / h * std::sin(2 * std::numbers::pi * f0 * h * t);
            }
            wav::write(output, out);
        } else if (scorec->parsed()) {
            const auto clean = mono(wav::read_at_rate(clean_path, 16000), "clean input");
            const auto noisy_audio = wav::read_at_rate(noisy_path, 16000);
            const auto enhanced = mono(wav::read_at_rate(enhanced_path, 16000), "enhanced input");
            const auto& noisy = noisy_audio.samples.front();
            const auto row = eval::score(name.empty() ? std::filesystem::path(noisy_path).stem().string() : name,
                                         clean, noisy, enhanced);
            std::printf("%s: SNR in %.2f dB, SI-SNR in %.2f dB, SI-SNR out %.2f dB\n", row.utterance.c_str(),
                        row.snr_in, row.si_snr_in, row.si_snr_out);
            if (!report.empty()) eval::write_scores(report, std::span(&row, 1), true);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
